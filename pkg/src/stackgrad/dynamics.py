"""Per-step learning updates.

Every update projects back onto the players' strategy boxes.  The leader's
hierarchical gradient uses the implicit-function-theorem Jacobian of the
follower's best response, evaluated with a linear solve against the
follower Hessian block:

    D(x, y) = grad_x f1 - [d2 f2 / dx dy] (grad_yy f2)^{-1} grad_y f1
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DivergedError, ScheduleError, SingularHessianError
from .game import Game

__all__ = [
    "PerturbationDraw",
    "NoiseModel",
    "RidgeFallbackWarning",
    "draw_perturbation",
    "sga_step",
    "follower_ga_step",
    "hierarchical_gradient",
    "coupled_step",
    "spsa_increment",
    "spsa_gradient",
    "SINGULAR_EIG_TOL",
]

SINGULAR_EIG_TOL = 1e-10


class RidgeFallbackWarning(UserWarning):
    """A singular follower Hessian was regularized instead of rejected."""


@dataclass(frozen=True)
class PerturbationDraw:
    """Rademacher sign vector and the draw index it came from."""

    signs: np.ndarray
    index: int = 0

    def __post_init__(self):
        signs = np.atleast_1d(np.asarray(self.signs, dtype=float))
        if signs.ndim != 1 or signs.size == 0 or not np.all(np.abs(signs) == 1.0):
            raise ValueError(f"perturbation signs must be a non-empty vector of +-1, got {signs}")
        object.__setattr__(self, "signs", signs)


def draw_perturbation(rng: np.random.Generator, dim: int, index: int = 0) -> PerturbationDraw:
    """Sample uniformly from ``{-1, +1}^dim``."""
    signs = 2.0 * rng.integers(0, 2, size=dim) - 1.0
    return PerturbationDraw(signs, index)


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean additive noise; ``kind="none"`` never touches the generator."""

    kind: str = "none"
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian"):
            raise ValueError(f"noise kind must be 'none' or 'gaussian', got {self.kind!r}")
        if not (self.sigma >= 0 and np.isfinite(self.sigma)):
            raise ValueError(f"noise sigma must be finite and >= 0, got {self.sigma}")

    @property
    def active(self) -> bool:
        return self.kind == "gaussian"

    def sample(self, rng: Optional[np.random.Generator], size=None):
        if not self.active:
            return 0.0 if size is None else np.zeros(size)
        return self.sigma * rng.standard_normal(size)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma}


def _require_finite(v, what):
    if not np.all(np.isfinite(v)):
        raise DivergedError(f"{what} is not finite: {v}")
    return v


def _check_rate(name, value):
    if not value >= 0:
        raise ValueError(f"{name} must be non-negative, got {value}")


def sga_step(
    game: Game,
    x: np.ndarray,
    y: np.ndarray,
    a1: float,
    a2: float,
    noise: NoiseModel = NoiseModel(),
    rng: Optional[np.random.Generator] = None,
):
    """One step of simultaneous gradient ascent on each player's own payoff."""
    _check_rate("a1", a1)
    _check_rate("a2", a2)
    gx = _require_finite(game.grad(1, "x", x, y), "grad_x f1")
    gy = _require_finite(game.grad(2, "y", x, y), "grad_y f2")
    if noise.active:
        gx = gx + noise.sample(rng, game.d1)
        gy = gy + noise.sample(rng, game.d2)
    return game.x_box.project(x + a1 * gx), game.y_box.project(y + a2 * gy)


def follower_ga_step(game: Game, x_commit: np.ndarray, y: np.ndarray, beta: float) -> np.ndarray:
    """Projected gradient ascent for the follower against a fixed leader strategy."""
    if not beta > 0:
        raise ValueError(f"follower step beta must be positive, got {beta}")
    K2 = game.meta.K2
    if K2 is not None and beta > 1.0 / K2 * (1 + 1e-12):
        raise ValueError(f"follower step beta={beta} exceeds 1/K2={1.0 / K2}")
    gy = _require_finite(game.grad(2, "y", x_commit, y), "grad_y f2")
    return game.y_box.project(y + beta * gy)


def _solve_follower_block(game, x, y, rhs, ridge):
    Hyy = np.atleast_2d(game.second(2, "yy", x, y))
    eig = np.linalg.eigvalsh(0.5 * (Hyy + Hyy.T))
    smallest = float(eig[np.argmin(np.abs(eig))])
    if abs(smallest) <= SINGULAR_EIG_TOL:
        if ridge is None:
            raise SingularHessianError(
                f"grad_yy f2 is singular at x={x}, y={y} (eigenvalue {smallest:.3g})", smallest
            )
        warnings.warn(
            f"grad_yy f2 singular (eigenvalue {smallest:.3g}); applying ridge {ridge}",
            RidgeFallbackWarning,
            stacklevel=3,
        )
        Hyy = Hyy - ridge * np.eye(Hyy.shape[0])
    return np.linalg.solve(Hyy, rhs)


def hierarchical_gradient(game: Game, x: np.ndarray, y: np.ndarray, ridge: Optional[float] = None) -> np.ndarray:
    """Total leader gradient ``D(x, y)`` through the follower's best response.

    Raises :class:`SingularHessianError` when ``grad_yy f2`` has an
    eigenvalue within ``SINGULAR_EIG_TOL`` of zero, unless ``ridge`` is
    given, in which case ``grad_yy f2 - ridge * I`` is used and a
    :class:`RidgeFallbackWarning` is emitted.
    """
    gx = np.asarray(game.grad(1, "x", x, y), dtype=float)
    gy1 = np.asarray(game.grad(1, "y", x, y), dtype=float)
    Hxy = np.atleast_2d(game.second(2, "xy", x, y))
    v = _solve_follower_block(game, x, y, gy1, ridge)
    return gx - Hxy @ v


def coupled_step(
    game: Game,
    x: np.ndarray,
    y: np.ndarray,
    a1: float,
    a2: float,
    noise: NoiseModel = NoiseModel(),
    rng: Optional[np.random.Generator] = None,
):
    """Two-timescale hierarchical gradient step (leader uses ``D``, follower ascends ``f2``)."""
    _check_rate("a1", a1)
    _check_rate("a2", a2)
    D = _require_finite(hierarchical_gradient(game, x, y), "D(x, y)")
    gy = _require_finite(game.grad(2, "y", x, y), "grad_y f2")
    w1 = noise.sample(rng, game.d1)
    w2 = noise.sample(rng, game.d2)
    return game.x_box.project(x + a1 * (D + w1)), game.y_box.project(y + a2 * (gy + w2))


def spsa_increment(f_obs: float, delta: float, draw: PerturbationDraw, i: int) -> float:
    """Single-measurement SPSA estimate of the ``i``-th gradient coordinate."""
    if not delta > 0:
        raise ScheduleError(f"perturbation delta must be positive, got {delta}")
    return f_obs / (delta * draw.signs[i])


def spsa_gradient(f_obs: float, delta: float, draw: PerturbationDraw) -> np.ndarray:
    """All coordinates of :func:`spsa_increment` at once."""
    if not delta > 0:
        raise ScheduleError(f"perturbation delta must be positive, got {delta}")
    return f_obs / (delta * draw.signs)
