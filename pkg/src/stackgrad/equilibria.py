"""Best responses, implicit Jacobians and equilibrium certificates.

``check_dne`` certifies a differential Nash equilibrium from the
individual gradients and Hessian blocks.  ``check_dse`` certifies a
differential Stackelberg solution from the leader's total gradient
``D(x, r(x))`` and a finite-difference total Hessian.  ``quadratic_oracle``
solves the quadratic benchmark family in closed form.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import _solve_follower_block, hierarchical_gradient
from .errors import DegenerateGameError, MissingConstantError, NonConvergenceError
from .game import Game, QuadraticGameSpec, as_strategy, fd_step

__all__ = [
    "EquilibriumReport",
    "QuadraticOracleResult",
    "StationarityWarning",
    "best_response_solve",
    "implicit_jacobian",
    "total_hessian",
    "check_dne",
    "check_dse",
    "quadratic_oracle",
    "GRAD_TOL",
    "EIG_TOL",
]

GRAD_TOL = 1e-6
EIG_TOL = 1e-8


class StationarityWarning(UserWarning):
    """``y`` is not a stationary best response to ``x``."""


def best_response_solve(
    game: Game,
    x,
    tol: float = 1e-10,
    max_iters: int = 10_000,
    y0=None,
    beta: Optional[float] = None,
) -> np.ndarray:
    """Follower best response by projected gradient ascent with step ``1/K2``."""
    x = as_strategy(x, game.d1, "x")
    if beta is None:
        if game.meta.K2 is None:
            raise MissingConstantError("best_response_solve needs meta.K2 (or an explicit beta)")
        beta = 1.0 / game.meta.K2
    y = game.y_box.project(game.y_box.center if y0 is None else as_strategy(y0, game.d2, "y0"))
    norm = np.inf
    for _ in range(max_iters + 1):
        g = game.grad(2, "y", x, y)
        norm = float(np.linalg.norm(g))
        if norm <= tol:
            return y
        if not np.isfinite(norm):
            break
        y = game.y_box.project(y + beta * g)
    raise NonConvergenceError(
        f"best response did not reach tol={tol} in {max_iters} iterations (|grad_y f2| = {norm:.3g})", norm
    )


def implicit_jacobian(game: Game, x, y, stationarity_tol: float = 1e-6) -> np.ndarray:
    """``d r / d x = -(grad_yy f2)^{-1} d2 f2 / dy dx`` as a ``d2 x d1`` matrix."""
    x = as_strategy(x, game.d1, "x")
    y = as_strategy(y, game.d2, "y")
    residual = float(np.linalg.norm(game.grad(2, "y", x, y)))
    if residual > stationarity_tol:
        warnings.warn(
            f"implicit_jacobian evaluated off the best response (|grad_y f2| = {residual:.3g})",
            StationarityWarning,
            stacklevel=2,
        )
    Hyx = np.atleast_2d(game.second(2, "yx", x, y))
    return -_solve_follower_block(game, x, y, Hyx, None)


def _max_eig(H) -> float:
    H = np.atleast_2d(np.asarray(H, dtype=float))
    return float(np.linalg.eigvalsh(0.5 * (H + H.T))[-1])


@dataclass
class EquilibriumReport:
    kind: str
    x: np.ndarray
    y: np.ndarray
    grad_norm_leader: float
    grad_norm_follower: float
    max_eig_leader_hessian: float
    max_eig_follower_hessian: float
    classification: str
    grad_tol: float
    eig_tol: float

    @property
    def stationary(self) -> bool:
        return self.grad_norm_leader <= self.grad_tol and self.grad_norm_follower <= self.grad_tol

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "grad_norm_leader": self.grad_norm_leader,
            "grad_norm_follower": self.grad_norm_follower,
            "max_eig_leader_hessian": self.max_eig_leader_hessian,
            "max_eig_follower_hessian": self.max_eig_follower_hessian,
            "classification": self.classification,
            "tolerances": {"grad_tol": self.grad_tol, "eig_tol": self.eig_tol},
        }


def check_dne(game: Game, x, y, grad_tol: float = GRAD_TOL, eig_tol: float = EIG_TOL) -> EquilibriumReport:
    """Classify ``(x, y)`` as a differential Nash equilibrium or not."""
    x = as_strategy(x, game.d1, "x")
    y = as_strategy(y, game.d2, "y")
    gl = float(np.linalg.norm(game.grad(1, "x", x, y)))
    gf = float(np.linalg.norm(game.grad(2, "y", x, y)))
    el = _max_eig(game.second(1, "xx", x, y))
    ef = _max_eig(game.second(2, "yy", x, y))
    if gl <= grad_tol and gf <= grad_tol:
        label = "DNE" if el < -eig_tol and ef < -eig_tol else "stationary-only"
    else:
        label = "none"
    return EquilibriumReport("dne", x, y, gl, gf, el, ef, label, grad_tol, eig_tol)


def total_hessian(game: Game, x, y0=None, br_tol: float = 1e-12) -> np.ndarray:
    """Central-difference Jacobian of ``x -> D(x, r(x))`` (symmetrized)."""
    x = as_strategy(x, game.d1, "x")
    y_ref = best_response_solve(game, x, tol=br_tol, y0=y0)
    h = fd_step(x)
    cols = []
    for j in range(game.d1):
        xp, xm = x.copy(), x.copy()
        xp[j] += h[j]
        xm[j] -= h[j]
        Dp = hierarchical_gradient(game, xp, best_response_solve(game, xp, tol=br_tol, y0=y_ref))
        Dm = hierarchical_gradient(game, xm, best_response_solve(game, xm, tol=br_tol, y0=y_ref))
        cols.append((Dp - Dm) / (2.0 * h[j]))
    H = np.column_stack(cols)
    return 0.5 * (H + H.T)


def check_dse(
    game: Game, x, y, grad_tol: float = GRAD_TOL, eig_tol: float = EIG_TOL, br_tol: float = 1e-12
) -> EquilibriumReport:
    """Classify ``(x, y)`` as a differential Stackelberg solution or not.

    The leader's total gradient and Hessian are taken along the follower's
    best response ``r(x)`` (solved numerically); the follower's conditions
    are evaluated at the given ``y``.
    """
    x = as_strategy(x, game.d1, "x")
    y = as_strategy(y, game.d2, "y")
    y_br = best_response_solve(game, x, tol=br_tol, y0=y)
    gl = float(np.linalg.norm(hierarchical_gradient(game, x, y_br)))
    gf = float(np.linalg.norm(game.grad(2, "y", x, y)))
    el = _max_eig(total_hessian(game, x, y0=y_br, br_tol=br_tol))
    ef = _max_eig(game.second(2, "yy", x, y))
    if gl < grad_tol and gf < grad_tol:
        label = "DSS" if el < -eig_tol and ef < -eig_tol else "stationary-only"
    else:
        label = "none"
    return EquilibriumReport("dse", x, y, gl, gf, el, ef, label, grad_tol, eig_tol)


@dataclass
class QuadraticOracleResult:
    x_star: np.ndarray
    y_star: np.ndarray
    g_hessian: np.ndarray
    is_strict_max: bool

    def to_dict(self) -> dict:
        return {
            "x_star": self.x_star.tolist(),
            "y_star": self.y_star.tolist(),
            "g_hessian": self.g_hessian.tolist(),
            "is_strict_max": self.is_strict_max,
        }


def quadratic_oracle(spec) -> QuadraticOracleResult:
    """Closed-form stationary point of ``g(x) = f1(x, A x + c)``.

    Accepts a :class:`QuadraticGameSpec` or a game built from one.
    """
    if isinstance(spec, Game):
        if spec.spec is None:
            raise TypeError(f"{spec!r} is not a quadratic game")
        spec = spec.spec
    if not isinstance(spec, QuadraticGameSpec):
        raise TypeError(f"expected QuadraticGameSpec, got {type(spec).__name__}")
    H = spec.leader_hessian()
    eig = np.linalg.eigvalsh(0.5 * (H + H.T))
    scale = max(1.0, float(np.max(np.abs(eig))))
    if float(np.min(np.abs(eig))) <= 1e-12 * scale:
        raise DegenerateGameError(f"leader Hessian is singular (eigenvalues {eig})")
    x_star = np.linalg.solve(H, -spec._leader_offset())
    return QuadraticOracleResult(
        x_star=x_star,
        y_star=spec.best_response(x_star),
        g_hessian=H,
        is_strict_max=bool(eig[-1] < 0),
    )
