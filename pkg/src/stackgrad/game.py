"""Two-player differentiable games and their derivative evaluators.

Strategies are plain 1-D float arrays; each player's strategy space is an
axis-aligned :class:`Box`.  A :class:`Game` bundles both payoffs with
first/second derivative evaluators.  Missing derivatives are filled in by
central finite differences and recorded in ``Game.fd_fallback``.

Block naming follows ``second(player, "xy", x, y)[i, j] = d2 f / dx_i dy_j``,
so the ``xy`` block is ``d1 x d2`` and ``yx`` is its transpose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import DimensionError, IllPosedGameError

__all__ = [
    "Box",
    "GameConstants",
    "Game",
    "QuadraticGameSpec",
    "FDReport",
    "as_strategy",
    "eval_payoff",
    "gradient",
    "second_derivative",
    "fd_validate",
    "fd_step",
]

BLOCKS = ("xx", "xy", "yx", "yy")
_CBRT_EPS = np.finfo(float).eps ** (1.0 / 3.0)


def fd_step(v, scale=None):
    """Default central-difference step per coordinate."""
    base = _CBRT_EPS if scale is None else scale
    return base * np.maximum(1.0, np.abs(v))


def as_strategy(v, dim: int, name: str = "strategy") -> np.ndarray:
    """Coerce ``v`` to a finite float vector of length ``dim``."""
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise DimensionError(f"{name} must have shape ({dim},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise IllPosedGameError(f"{name} has non-finite entries: {arr}")
    return arr


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box ``[lower, upper]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise DimensionError(f"box bounds must be matching non-empty vectors, got {lo.shape} and {hi.shape}")
        if np.any(lo > hi) or np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError(f"invalid box: lower={lo}, upper={hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def uniform(cls, dim: int, lo: float, hi: float) -> "Box":
        return cls(np.full(dim, float(lo)), np.full(dim, float(hi)))

    @classmethod
    def unbounded(cls, dim: int) -> "Box":
        return cls.uniform(dim, -np.inf, np.inf)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    @property
    def center(self) -> np.ndarray:
        lo = np.where(np.isfinite(self.lower), self.lower, 0.0)
        hi = np.where(np.isfinite(self.upper), self.upper, 0.0)
        # half-infinite sides anchor at their finite bound
        return np.where(np.isfinite(self.lower) & np.isfinite(self.upper), 0.5 * (lo + hi), lo + hi)

    def project(self, v: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(v, self.lower), self.upper)

    def contains(self, v, atol: float = 0.0) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(np.all(v >= self.lower - atol) and np.all(v <= self.upper + atol))

    def interior(self, v, margin: float = 0.0) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(np.all(v > self.lower + margin) and np.all(v < self.upper - margin))

    def corners(self) -> np.ndarray:
        grid = np.array(np.meshgrid(*zip(self.lower, self.upper), indexing="ij"))
        return grid.reshape(self.dim, -1).T

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True)
class GameConstants:
    """Optional smoothness constants; ``None`` means unknown."""

    L1: Optional[float] = None
    K1: Optional[float] = None
    K2: Optional[float] = None
    mu: Optional[float] = None
    L_r: Optional[float] = None
    K_r: Optional[float] = None
    B: Optional[float] = None

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


PayoffFn = Callable[[np.ndarray, np.ndarray], float]
VectorFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class Game:
    """A two-player differentiable game ``(f1, f2)`` over boxes ``X x Y``.

    Player 1 is always the leader.  ``grads`` maps ``(player, "x"|"y")`` to a
    gradient callable and ``seconds`` maps ``(player, block)`` to a Hessian
    block callable; anything missing is computed by central differences.
    ``best_response`` optionally supplies a closed-form ``r(x)`` used only
    by oracles and diagnostics, never by the leader.
    """

    spec: Optional["QuadraticGameSpec"] = None

    def __init__(
        self,
        d1: int,
        d2: int,
        f1: PayoffFn,
        f2: PayoffFn,
        *,
        grads: Optional[Mapping[tuple, VectorFn]] = None,
        seconds: Optional[Mapping[tuple, VectorFn]] = None,
        x_box: Optional[Box] = None,
        y_box: Optional[Box] = None,
        meta: Optional[GameConstants] = None,
        best_response: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        name: str = "game",
    ):
        if int(d1) < 1 or int(d2) < 1:
            raise DimensionError(f"strategy dimensions must be positive, got d1={d1}, d2={d2}")
        self.d1, self.d2 = int(d1), int(d2)
        self.name = name
        self.meta = meta or GameConstants()
        self.x_box = x_box if x_box is not None else Box.unbounded(self.d1)
        self.y_box = y_box if y_box is not None else Box.unbounded(self.d2)
        if self.x_box.dim != self.d1 or self.y_box.dim != self.d2:
            raise DimensionError("box dimensions do not match the game")
        self.best_response = best_response
        self._payoff = {1: f1, 2: f2}
        self._grad = dict(grads or {})
        self._second = dict(seconds or {})
        fallback = set()
        for player in (1, 2):
            for wrt in ("x", "y"):
                if (player, wrt) not in self._grad:
                    self._grad[(player, wrt)] = self._fd_grad(player, wrt)
                    fallback.add((player, wrt))
            # yx is derived from xy (and vice versa) before resorting to FD
            if (player, "yx") not in self._second and (player, "xy") in self._second:
                xy = self._second[(player, "xy")]
                self._second[(player, "yx")] = lambda x, y, _xy=xy: np.asarray(_xy(x, y)).T
            if (player, "xy") not in self._second and (player, "yx") in self._second:
                yx = self._second[(player, "yx")]
                self._second[(player, "xy")] = lambda x, y, _yx=yx: np.asarray(_yx(x, y)).T
            for block in BLOCKS:
                if (player, block) not in self._second:
                    self._second[(player, block)] = self._fd_second(player, block)
                    fallback.add((player, block))
        self.fd_fallback = frozenset(fallback)

    def __repr__(self):
        return f"Game({self.name!r}, d1={self.d1}, d2={self.d2})"

    # raw evaluators: no dimension checks, used in inner loops

    def payoff(self, player: int, x: np.ndarray, y: np.ndarray) -> float:
        return float(self._payoff[player](x, y))

    def grad(self, player: int, wrt: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self._grad[(player, wrt)](x, y)

    def second(self, player: int, block: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self._second[(player, block)](x, y)

    def leader_view(self) -> "LeaderPayoff":
        return LeaderPayoff(self._payoff[1], self.x_box, self.d1)

    # finite-difference fallbacks

    def _fd_grad(self, player, wrt):
        f = self._payoff[player]

        def grad(x, y):
            v = x if wrt == "x" else y
            h = fd_step(v)
            out = np.empty(v.shape[0])
            for i in range(v.shape[0]):
                vp, vm = v.copy(), v.copy()
                vp[i] += h[i]
                vm[i] -= h[i]
                if wrt == "x":
                    fp, fm = f(vp, y), f(vm, y)
                else:
                    fp, fm = f(x, vp), f(x, vm)
                out[i] = (fp - fm) / (2.0 * h[i])
            return out

        return grad

    def _fd_second(self, player, block):
        # block "ab" = d/db of grad_a
        outer, inner = block[0], block[1]

        def second(x, y):
            g = self._grad[(player, outer)]
            v = x if inner == "x" else y
            h = fd_step(v)
            cols = []
            for j in range(v.shape[0]):
                vp, vm = v.copy(), v.copy()
                vp[j] += h[j]
                vm[j] -= h[j]
                if inner == "x":
                    gp, gm = g(vp, y), g(vm, y)
                else:
                    gp, gm = g(x, vp), g(x, vm)
                cols.append((np.asarray(gp) - np.asarray(gm)) / (2.0 * h[j]))
            return np.column_stack(cols)

        return second


class LeaderPayoff:
    """What the leader is allowed to see: its own payoff and strategy box."""

    __slots__ = ("_f1", "box", "dim")

    def __init__(self, f1: PayoffFn, box: Box, dim: int):
        self._f1 = f1
        self.box = box
        self.dim = dim

    def __call__(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(self._f1(x, y))


def _check_player(player):
    if player not in (1, 2):
        raise ValueError(f"player must be 1 or 2, got {player!r}")


def _finite(value, what):
    if not np.all(np.isfinite(value)):
        raise IllPosedGameError(f"{what} is not finite: {value}")
    return value


def eval_payoff(game: Game, player: int, x, y) -> float:
    """Return ``f_player(x, y)``."""
    _check_player(player)
    x = as_strategy(x, game.d1, "x")
    y = as_strategy(y, game.d2, "y")
    return _finite(game.payoff(player, x, y), f"f{player}(x, y)")


def gradient(game: Game, player: int, wrt: str, x, y) -> np.ndarray:
    """Return the gradient of ``f_player`` with respect to ``wrt``."""
    _check_player(player)
    if wrt not in ("x", "y"):
        raise ValueError(f"wrt must be 'x' or 'y', got {wrt!r}")
    x = as_strategy(x, game.d1, "x")
    y = as_strategy(y, game.d2, "y")
    g = np.atleast_1d(np.asarray(game.grad(player, wrt, x, y), dtype=float))
    expected = game.d1 if wrt == "x" else game.d2
    if g.shape != (expected,):
        raise DimensionError(f"grad_{wrt} f{player} has shape {g.shape}, expected ({expected},)")
    return _finite(g, f"grad_{wrt} f{player}")


def second_derivative(game: Game, player: int, block: str, x, y) -> np.ndarray:
    """Return one second-derivative block of ``f_player``."""
    _check_player(player)
    if block not in BLOCKS:
        raise ValueError(f"block must be one of {BLOCKS}, got {block!r}")
    x = as_strategy(x, game.d1, "x")
    y = as_strategy(y, game.d2, "y")
    h = np.atleast_2d(np.asarray(game.second(player, block, x, y), dtype=float))
    dims = {"x": game.d1, "y": game.d2}
    expected = (dims[block[0]], dims[block[1]])
    if h.shape != expected:
        raise DimensionError(f"block {block} of f{player} has shape {h.shape}, expected {expected}")
    return _finite(h, f"second {block} f{player}")


@dataclass
class FDReport:
    """Worst scaled error of each analytic derivative against central differences."""

    errors: dict
    tol: float

    @property
    def worst(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def flagged(self) -> list:
        return sorted(k for k, v in self.errors.items() if v > self.tol)

    @property
    def ok(self) -> bool:
        return not self.flagged


def _scaled_err(analytic, approx):
    analytic, approx = np.asarray(analytic, float), np.asarray(approx, float)
    scale = max(1.0, float(np.max(np.abs(approx), initial=0.0)))
    return float(np.max(np.abs(analytic - approx), initial=0.0)) / scale


def fd_validate(game: Game, x, y, eps: float = 1e-5, tol: float = 1e-6) -> FDReport:
    """Compare every derivative evaluator of ``game`` against central differences.

    Gradients are checked against differences of the payoff and Hessian
    blocks against differences of the (analytic) gradients.  The error is
    ``max|analytic - fd| / max(1, max|fd|)``; keys look like ``"f1.grad_x"``
    and ``"f2.xy"``.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    x = as_strategy(x, game.d1, "x")
    y = as_strategy(y, game.d2, "y")
    errors = {}

    def shifted(v, j, s):
        w = v.copy()
        w[j] += s
        return w

    for player in (1, 2):
        f = game._payoff[player]
        for wrt, v in (("x", x), ("y", y)):
            h = fd_step(v, eps)
            fd = np.empty(v.shape[0])
            for j in range(v.shape[0]):
                if wrt == "x":
                    fd[j] = (f(shifted(x, j, h[j]), y) - f(shifted(x, j, -h[j]), y)) / (2 * h[j])
                else:
                    fd[j] = (f(x, shifted(y, j, h[j])) - f(x, shifted(y, j, -h[j]))) / (2 * h[j])
            errors[f"f{player}.grad_{wrt}"] = _scaled_err(game.grad(player, wrt, x, y), fd)
        for block in BLOCKS:
            outer, inner = block
            g = game._grad[(player, outer)]
            v = x if inner == "x" else y
            h = fd_step(v, eps)
            cols = []
            for j in range(v.shape[0]):
                if inner == "x":
                    gp, gm = g(shifted(x, j, h[j]), y), g(shifted(x, j, -h[j]), y)
                else:
                    gp, gm = g(x, shifted(y, j, h[j])), g(x, shifted(y, j, -h[j]))
                cols.append((np.asarray(gp, float) - np.asarray(gm, float)) / (2 * h[j]))
            errors[f"f{player}.{block}"] = _scaled_err(game.second(player, block, x, y), np.column_stack(cols))
    return FDReport(errors, tol)


def _sym(a, name, tol=1e-10):
    if a.shape[0] != a.shape[1] or not np.allclose(a, a.T, atol=tol, rtol=0):
        raise ValueError(f"{name} must be symmetric")


@dataclass(frozen=True)
class QuadraticGameSpec:
    """Quadratic benchmark family with a closed-form best response.

    ``f1(x, y) = -1/2 x'Q1 x - 1/2 y'R1 y + x'S y + b1'x + b2'y + e1``
    ``f2(x, y) = -1/2 (y - A x - c)' M (y - A x - c)``

    ``b2`` and ``e1`` default to zero.  ``M`` must be symmetric positive
    definite, so ``r(x) = A x + c`` exactly.
    """

    Q1: np.ndarray
    R1: np.ndarray
    S: np.ndarray
    b1: np.ndarray
    M: np.ndarray
    A: np.ndarray
    c: np.ndarray
    b2: Optional[np.ndarray] = None
    e1: float = 0.0
    _mu: float = field(init=False, repr=False, compare=False, default=0.0)
    _K2: float = field(init=False, repr=False, compare=False, default=0.0)

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        Q1 = np.atleast_2d(np.asarray(self.Q1, dtype=float))
        d1 = Q1.shape[0]
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        d2 = M.shape[0]
        if d1 < 1 or d2 < 1:
            raise DimensionError("quadratic game needs d1, d2 >= 1")
        shapes = {
            "Q1": (d1, d1),
            "R1": (d2, d2),
            "S": (d1, d2),
            "M": (d2, d2),
            "A": (d2, d1),
            "b1": (d1,),
            "c": (d2,),
            "b2": (d2,),
        }
        raw = {name: getattr(self, name) for name in shapes}
        if raw["b2"] is None:
            raw["b2"] = np.zeros(d2)
        for name, shape in shapes.items():
            arr = np.asarray(raw[name], dtype=float)
            if arr.size == int(np.prod(shape)):
                arr = arr.reshape(shape)
            if arr.shape != shape:
                raise DimensionError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            set_(name, arr)
        _sym(self.Q1, "Q1")
        _sym(self.R1, "R1")
        _sym(self.M, "M")
        eig = np.linalg.eigvalsh(0.5 * (self.M + self.M.T))
        if eig[0] <= 0:
            raise ValueError(f"M must be positive definite (min eigenvalue {eig[0]:.3g})")
        set_("e1", float(self.e1))
        set_("_mu", float(eig[0]))
        set_("_K2", float(eig[-1]))

    @property
    def d1(self) -> int:
        return self.Q1.shape[0]

    @property
    def d2(self) -> int:
        return self.M.shape[0]

    @property
    def mu(self) -> float:
        """Strong-concavity modulus of ``f2`` in ``y``."""
        return self._mu

    @property
    def K2(self) -> float:
        return self._K2

    def best_response(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x + self.c

    def f1(self, x, y) -> float:
        return float(-0.5 * x @ self.Q1 @ x - 0.5 * y @ self.R1 @ y + x @ self.S @ y + self.b1 @ x + self.b2 @ y + self.e1)

    def f2(self, x, y) -> float:
        e = y - self.A @ x - self.c
        return float(-0.5 * e @ self.M @ e)

    def leader_objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return self.f1(x, self.best_response(x))

    def leader_hessian(self) -> np.ndarray:
        SA = self.S @ self.A
        return -self.Q1 + SA + SA.T - self.A.T @ self.R1 @ self.A

    def leader_gradient(self, x) -> np.ndarray:
        """Closed-form gradient of ``g(x) = f1(x, A x + c)``."""
        x = np.asarray(x, dtype=float)
        return self.leader_hessian() @ x + self._leader_offset()

    def _leader_offset(self) -> np.ndarray:
        return -self.A.T @ self.R1 @ self.c + self.S @ self.c + self.b1 + self.A.T @ self.b2

    def constants(self, y_box: Optional[Box] = None) -> GameConstants:
        full = np.block([[-self.Q1, self.S], [self.S.T, -self.R1]])
        return GameConstants(
            K1=float(np.linalg.norm(full, 2)),
            K2=self.K2,
            mu=self.mu,
            L_r=float(np.linalg.norm(self.A, 2)),
            K_r=0.0,
            B=None if y_box is None or not np.isfinite(y_box.diameter) else y_box.diameter,
        )

    def to_game(self, x_box: Optional[Box] = None, y_box: Optional[Box] = None, name: str = "quadratic") -> Game:
        Q1, R1, S, b1, b2, e1 = self.Q1, self.R1, self.S, self.b1, self.b2, self.e1
        M, A, c = self.M, self.A, self.c
        St, At, MA, AtMA = S.T, A.T, M @ A, A.T @ M @ A
        negQ1, negR1, negM = -Q1, -R1, -M

        def f1(x, y):
            return -0.5 * (x @ Q1 @ x) - 0.5 * (y @ R1 @ y) + x @ S @ y + b1 @ x + b2 @ y + e1

        def f2(x, y):
            e = y - A @ x - c
            return -0.5 * (e @ M @ e)

        def f2_y(x, y):
            return M @ (A @ x + c - y)

        def f2_x(x, y):
            return At @ (M @ (y - A @ x - c))

        grads = {
            (1, "x"): lambda x, y: -(Q1 @ x) + S @ y + b1,
            (1, "y"): lambda x, y: -(R1 @ y) + St @ x + b2,
            (2, "x"): f2_x,
            (2, "y"): f2_y,
        }
        seconds = {
            (1, "xx"): lambda x, y: negQ1,
            (1, "xy"): lambda x, y: S,
            (1, "yx"): lambda x, y: St,
            (1, "yy"): lambda x, y: negR1,
            (2, "xx"): lambda x, y: -AtMA,
            (2, "xy"): lambda x, y: MA.T,
            (2, "yx"): lambda x, y: MA,
            (2, "yy"): lambda x, y: negM,
        }
        game = Game(
            self.d1,
            self.d2,
            f1,
            f2,
            grads=grads,
            seconds=seconds,
            x_box=x_box,
            y_box=y_box,
            meta=self.constants(y_box),
            best_response=self.best_response,
            name=name,
        )
        game.spec = self
        return game

    def to_dict(self) -> dict:
        """Row-major nested lists, suitable for TOML or JSON."""
        return {
            "Q1": self.Q1.tolist(),
            "R1": self.R1.tolist(),
            "S": self.S.tolist(),
            "b1": self.b1.tolist(),
            "b2": self.b2.tolist(),
            "e1": self.e1,
            "M": self.M.tolist(),
            "A": self.A.tolist(),
            "c": self.c.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "QuadraticGameSpec":
        required = ("Q1", "R1", "S", "b1", "M", "A", "c")
        missing = [k for k in required if k not in data]
        if missing:
            raise ValueError(f"quadratic spec is missing {', '.join(missing)}")
        unknown = set(data) - set(required) - {"b2", "e1"}
        if unknown:
            raise ValueError(f"unknown quadratic spec keys: {', '.join(sorted(unknown))}")
        kw = {k: np.asarray(data[k], dtype=float) for k in required}
        return cls(**kw, b2=data.get("b2"), e1=float(data.get("e1", 0.0)))


def check_block_symmetry(game: Game, x, y, atol: float = 1e-8) -> float:
    """Largest ``|second(p, yx) - second(p, xy).T|`` over both players."""
    worst = 0.0
    for player in (1, 2):
        xy = second_derivative(game, player, "xy", x, y)
        yx = second_derivative(game, player, "yx", x, y)
        worst = max(worst, float(np.max(np.abs(yx - xy.T))))
    return worst


def box_diameter(box: Box) -> float:
    d = box.diameter
    if not math.isfinite(d):
        raise ValueError("box is unbounded; diameter is infinite")
    return d
