"""Benchmark games with known ground truth.

``g0``
    1-D quadratic game ``f1 = -(x-1)^2 - (y-2)^2``, ``f2 = -(y-x)^2 / 2``.
    Its differential Nash equilibrium (1, 1) differs from its Stackelberg
    solution (1.5, 1.5).
``quadratic_2d``
    Seeded random 2-D quadratic game whose leader objective is strictly
    concave, with the Stackelberg point inside the box.
``two_peak``
    Quartic leader objective ``g(x) = -(x^2 - 1)^2`` with strict local
    maxima at x = -1 and x = +1 (and a local minimum at 0).
"""

from __future__ import annotations

import numpy as np

from .game import Box, Game, GameConstants, QuadraticGameSpec

__all__ = ["g0_spec", "g0", "quadratic_2d_spec", "quadratic_2d", "two_peak", "BUILTIN_GAMES", "builtin_game"]


def g0_spec() -> QuadraticGameSpec:
    # -(x-1)^2 - (y-2)^2 = -x^2 - y^2 + 2x + 4y - 5
    return QuadraticGameSpec(
        Q1=[[2.0]], R1=[[2.0]], S=[[0.0]], b1=[2.0], b2=[4.0], e1=-5.0,
        M=[[1.0]], A=[[1.0]], c=[0.0],
    )


def g0(x_box: Box | None = None, y_box: Box | None = None) -> Game:
    x_box = x_box or Box.uniform(1, -4.0, 4.0)
    y_box = y_box or Box.uniform(1, -10.0, 10.0)
    return g0_spec().to_game(x_box, y_box, name="g0")


G_STAR = -0.5


def _random_rotation(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def quadratic_2d_spec(seed: int = 0, d1: int = 2, d2: int = 2) -> QuadraticGameSpec:
    """Random quadratic game with leader Hessian eigenvalues in [-4, -2].

    ``M`` has eigenvalues in [1, 1.9] so a follower step ``beta = 0.5``
    satisfies both ``beta <= 1/K2`` and ``beta * mu >= 0.5``.  The payoff
    offset ``e1`` puts the leader's optimal value at ``g(x*) = -0.5`` (the
    level of ``g0``); single-measurement SPSA noise scales with ``|g|``.
    """
    rng = np.random.default_rng(seed)
    U = _random_rotation(rng, d2)
    M = U @ np.diag(rng.uniform(1.0, 1.9, d2)) @ U.T
    M = 0.5 * (M + M.T)
    A = rng.normal(0.0, 0.5, (d2, d1))
    c = rng.uniform(-0.5, 0.5, d2)
    S = rng.normal(0.0, 0.3, (d1, d2))
    W = rng.normal(0.0, 0.5, (d2, d2))
    R1 = W @ W.T
    V = _random_rotation(rng, d1)
    P = V @ np.diag(rng.uniform(2.0, 4.0, d1)) @ V.T
    P = 0.5 * (P + P.T)
    SA = S @ A
    Q1 = P + SA + SA.T - A.T @ R1 @ A
    Q1 = 0.5 * (Q1 + Q1.T)
    x_star = rng.uniform(-1.0, 1.0, d1)
    # choose b1 so that grad g(x_star) = 0 with H_g = -P
    b1 = P @ x_star + A.T @ R1 @ c - S @ c
    spec = QuadraticGameSpec(Q1=Q1, R1=R1, S=S, b1=b1, M=M, A=A, c=c)
    e1 = G_STAR - spec.leader_objective(x_star)
    return QuadraticGameSpec(Q1=Q1, R1=R1, S=S, b1=b1, M=M, A=A, c=c, e1=e1)


def quadratic_2d(seed: int = 0, x_box: Box | None = None, y_box: Box | None = None) -> Game:
    spec = quadratic_2d_spec(seed)
    x_box = x_box or Box.uniform(spec.d1, -3.0, 3.0)
    y_box = y_box or Box.uniform(spec.d2, -10.0, 10.0)
    for corner in x_box.corners():
        if not y_box.interior(spec.best_response(corner)):
            raise ValueError(f"seed {seed}: best response leaves the follower box")
    return spec.to_game(x_box, y_box, name=f"quadratic2d[{seed}]")


def two_peak(x_box: Box | None = None, y_box: Box | None = None) -> Game:
    """Non-concave leader game; ``r(x) = 0.5 x + 0.5``."""
    x_box = x_box or Box.uniform(1, -2.0, 2.0)
    y_box = y_box or Box.uniform(1, -5.0, 5.0)

    def f1(x, y):
        x0, y0 = x[0], y[0]
        return -(x0 * x0 - 1.0) ** 2 + x0 * (y0 - 0.5 * x0 - 0.5)

    def f2(x, y):
        e = y[0] - 0.5 * x[0] - 0.5
        return -0.5 * e * e

    grads = {
        (1, "x"): lambda x, y: np.array([-4.0 * x[0] ** 3 + 3.0 * x[0] + y[0] - 0.5]),
        (1, "y"): lambda x, y: np.array([x[0]]),
        (2, "x"): lambda x, y: np.array([0.5 * (y[0] - 0.5 * x[0] - 0.5)]),
        (2, "y"): lambda x, y: np.array([0.5 * x[0] + 0.5 - y[0]]),
    }
    one = np.array([[1.0]])
    seconds = {
        (1, "xx"): lambda x, y: np.array([[3.0 - 12.0 * x[0] ** 2]]),
        (1, "xy"): lambda x, y: one,
        (1, "yx"): lambda x, y: one,
        (1, "yy"): lambda x, y: np.zeros((1, 1)),
        (2, "xx"): lambda x, y: np.array([[-0.25]]),
        (2, "xy"): lambda x, y: np.array([[0.5]]),
        (2, "yx"): lambda x, y: np.array([[0.5]]),
        (2, "yy"): lambda x, y: -one,
    }
    meta = GameConstants(K2=1.0, mu=1.0, L_r=0.5, K_r=0.0, B=y_box.diameter)
    return Game(
        1, 1, f1, f2,
        grads=grads, seconds=seconds, x_box=x_box, y_box=y_box, meta=meta,
        best_response=lambda x: 0.5 * x + 0.5,
        name="two_peak",
    )


BUILTIN_GAMES = {
    "g0": g0,
    "quadratic2d": quadratic_2d,
    "two_peak": two_peak,
}


def builtin_game(name: str, **kwargs) -> Game:
    try:
        factory = BUILTIN_GAMES[name]
    except KeyError:
        raise ValueError(f"unknown builtin game {name!r}; choose from {sorted(BUILTIN_GAMES)}") from None
    return factory(**kwargs)
