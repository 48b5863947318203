"""Trajectory simulation: the HiC commitment loop and the coupled/SGA baselines.

In HiC the leader only ever holds a :class:`~stackgrad.game.LeaderPayoff`
(its own payoff function and box) and the follower strategies it observes.
Followers are black boxes bound to the game.  Each stage the follower
sees the committed leader strategy, updates, and plays the result; the
strategy after the last stage of interval ``n`` is ``y_tilde_n``.

Randomness comes from three independent streams spawned from the run seed:
perturbation signs, leader payoff noise and follower/gradient noise.
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from .dynamics import (
    NoiseModel,
    PerturbationDraw,
    coupled_step,
    draw_perturbation,
    sga_step,
    spsa_gradient,
)
from .equilibria import best_response_solve
from .errors import ConfigError, DivergedError
from .game import Game, as_strategy
from .logio import CsvSink, csv_columns
from .schedules import CommitmentSchedule, PowerLaw, ScheduleSpec, commitment_times, perturbation, step_size, validate

__all__ = [
    "StageClock",
    "IntervalRecord",
    "StageRecord",
    "TrajectoryLog",
    "LeaderConfig",
    "GradientAscentFollower",
    "OracleFollower",
    "CallbackFollower",
    "make_follower",
    "run_streams",
    "run_hic",
    "run_coupled",
    "run_sga",
    "TrackingSeries",
    "tracking_error_series",
]

log = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e3


class StageClock:
    """Interval start times ``t(n) = sum_{m<n} k_m`` and their left inverse ``n(t)``."""

    def __init__(self, lengths: Sequence[int] = ()):
        self.lengths: List[int] = []
        self.starts: List[int] = [0]
        for k in lengths:
            self.append(k)

    def append(self, k: int) -> None:
        if int(k) != k or k < 1:
            raise ValueError(f"commitment length must be a positive integer, got {k}")
        self.lengths.append(int(k))
        self.starts.append(self.starts[-1] + int(k))

    def __len__(self):
        return len(self.lengths)

    def t(self, n: int) -> int:
        return self.starts[n]

    def n_of(self, t: int) -> int:
        if t < 0:
            raise ValueError(f"stage must be >= 0, got {t}")
        return bisect.bisect_right(self.starts, t) - 1

    @property
    def total(self) -> int:
        return self.starts[-1]


@dataclass
class IntervalRecord:
    n: int
    t: int
    x: np.ndarray
    x_tilde: np.ndarray
    signs: np.ndarray
    delta: float
    alpha: float
    k: int
    y_tilde: np.ndarray
    s: float
    eps: Optional[float] = None


@dataclass
class StageRecord:
    t: int
    n: int
    x: np.ndarray
    y: np.ndarray
    s: Optional[float] = None
    eps: Optional[float] = None
    alpha: Optional[float] = None


@dataclass
class TrajectoryLog:
    algorithm: str
    game: str
    seed: int
    d1: int
    d2: int
    x0: np.ndarray
    y0: np.ndarray
    meta: dict = field(default_factory=dict)
    intervals: List[IntervalRecord] = field(default_factory=list)
    stages: List[StageRecord] = field(default_factory=list)
    final_x: Optional[np.ndarray] = None
    final_y: Optional[np.ndarray] = None
    clock: StageClock = field(default_factory=StageClock)
    projections: dict = field(default_factory=lambda: {"leader": 0, "follower": 0})

    @property
    def columns(self) -> list:
        return csv_columns(self.d1, self.d2)

    def leader_path(self) -> np.ndarray:
        """Leader mean strategies ``x_0 .. x_N`` (HiC) or ``x_0 .. x_T`` (baselines)."""
        if self.algorithm == "hic":
            return np.array([r.x for r in self.intervals] + [self.final_x])
        return np.array([r.x for r in self.stages])

    def sidecar(self) -> dict:
        from datetime import datetime, timezone

        return {
            "algorithm": self.algorithm,
            "game": self.game,
            "seed": int(self.seed),
            "d1": self.d1,
            "d2": self.d2,
            "columns": self.columns,
            "x0": self.x0.tolist(),
            "y0": self.y0.tolist(),
            "final_x": None if self.final_x is None else self.final_x.tolist(),
            "final_y": None if self.final_y is None else self.final_y.tolist(),
            "stages": self.clock.total if self.algorithm == "hic" else len(self.stages) - 1,
            "projections": dict(self.projections),
            "created": datetime.now(timezone.utc).isoformat(),
            **self.meta,
        }


@dataclass(frozen=True)
class LeaderConfig:
    schedule: ScheduleSpec = ScheduleSpec()
    commitment: CommitmentSchedule = CommitmentSchedule(mode="fixed", k_fixed=1)
    noise: NoiseModel = NoiseModel()
    x0: Optional[np.ndarray] = None


# followers: bind(game) -> step(x_played, y, t) returning the follower's next
# (unprojected) strategy; the harness projects and counts activations.


class GradientAscentFollower:
    """Deterministic gradient ascent with fixed step ``beta``."""

    kind = "gradient-ascent"

    def __init__(self, beta: float):
        if not beta > 0:
            raise ValueError(f"follower step beta must be positive, got {beta}")
        self.beta = float(beta)

    def bind(self, game: Game):
        K2 = game.meta.K2
        if K2 is not None and self.beta > (1.0 + 1e-12) / K2:
            raise ConfigError(f"follower beta={self.beta} exceeds 1/K2={1.0 / K2}")
        grad_y = game._grad[(2, "y")]
        beta = self.beta

        def step(x, y, t):
            return y + beta * grad_y(x, y)

        return step

    def describe(self) -> dict:
        return {"kind": self.kind, "beta": self.beta}


class OracleFollower:
    """Plays the exact best response to the committed strategy at every stage."""

    kind = "oracle"

    def bind(self, game: Game):
        if game.best_response is not None:
            r = game.best_response
            return lambda x, y, t: r(x)
        return lambda x, y, t: best_response_solve(game, x, tol=1e-12, y0=y)

    def describe(self) -> dict:
        return {"kind": self.kind}


class CallbackFollower:
    """Wraps ``fn(game, x_played, y, t) -> y_next``."""

    kind = "callback"

    def __init__(self, fn: Callable):
        self.fn = fn

    def bind(self, game: Game):
        fn = self.fn
        return lambda x, y, t: np.asarray(fn(game, x, y, t), dtype=float)

    def describe(self) -> dict:
        return {"kind": self.kind, "name": getattr(self.fn, "__name__", repr(self.fn))}


def make_follower(desc: Union[dict, GradientAscentFollower, OracleFollower, CallbackFollower]):
    """Build a follower from a ``{"kind": ..., ...}`` descriptor."""
    if hasattr(desc, "bind"):
        return desc
    kind = desc.get("kind")
    if kind == "gradient-ascent":
        if "beta" not in desc:
            raise ConfigError("gradient-ascent follower needs beta")
        return GradientAscentFollower(desc["beta"])
    if kind == "oracle":
        return OracleFollower()
    if kind == "callback":
        return CallbackFollower(desc["fn"])
    raise ConfigError(f"unknown follower kind {kind!r}")


def run_streams(seed: int):
    """Independent generators for (perturbations, leader noise, follower/gradient noise)."""
    ss = np.random.SeedSequence(int(seed))
    return tuple(np.random.default_rng(child) for child in ss.spawn(3))


def _guard(game):
    return (
        DIVERGENCE_FACTOR * game.x_box.diameter,
        DIVERGENCE_FACTOR * game.y_box.diameter,
    )


def _check_state(x, y, limits, trajectory, last_row):
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DivergedError(f"non-finite state x={x}, y={y}", last_row, trajectory)
    if np.linalg.norm(x) > limits[0] or np.linalg.norm(y) > limits[1]:
        raise DivergedError(f"state escaped {DIVERGENCE_FACTOR:g}x the box diameter: x={x}, y={y}", last_row, trajectory)


def _oracle_fn(game, oracle):
    if oracle is False:
        return None
    if oracle is not None:
        return oracle
    return game.best_response


def run_hic(
    game: Game,
    leader: LeaderConfig,
    follower,
    n_intervals: int,
    seed: int,
    *,
    y0=None,
    log_stages: bool = False,
    keep_stages: bool = True,
    csv_path=None,
    average_observations: bool = False,
    oracle=None,
) -> TrajectoryLog:
    """Run the uncoupled commitment loop for ``n_intervals`` leader updates.

    Per interval ``n``: draw signs ``Delta_n``, commit to
    ``x_tilde = proj(x_n + delta_n Delta_n)`` for ``k_n`` stages while the
    follower adapts, observe ``s = f1(x_tilde, y_tilde) + w`` at the final
    stage (or the interval mean if ``average_observations``), then update
    ``x_{n+1} = proj(x_n + alpha_n s / (delta_n Delta_n))``.

    ``oracle`` (default: the game's closed-form best response, ``False`` to
    disable) is used only to log tracking errors.
    """
    violations = validate(leader.schedule)
    if violations:
        raise ConfigError("schedule violates step-size conditions: " + "; ".join(map(str, violations)))
    if n_intervals < 0:
        raise ValueError(f"n_intervals must be >= 0, got {n_intervals}")
    follower = make_follower(follower)
    f1 = game.leader_view()
    x_box, y_box = game.x_box, game.y_box
    x = x_box.project(as_strategy(leader.x0 if leader.x0 is not None else x_box.center, game.d1, "x0"))
    y = y_box.project(as_strategy(y0 if y0 is not None else y_box.center, game.d2, "y0"))
    step = follower.bind(game)
    r = _oracle_fn(game, oracle)
    rng_delta, rng_noise, _ = run_streams(seed)
    spec, commit, noise = leader.schedule, leader.commitment, leader.noise

    traj = TrajectoryLog(
        "hic", game.name, int(seed), game.d1, game.d2, x.copy(), y.copy(),
        meta={
            "schedule": spec.to_dict(),
            "commitment": commit.to_dict(),
            "noise": noise.to_dict(),
            "follower": follower.describe(),
            "n_intervals": int(n_intervals),
            "average_observations": bool(average_observations),
        },
    )
    sink = CsvSink(csv_path, game.d1, game.d2) if csv_path is not None else None
    limits = _guard(game)
    clock = traj.clock
    last_row = None
    try:
        for n in range(n_intervals):
            alpha = step_size(spec, n)
            delta = perturbation(spec, n)
            k = commitment_times(commit, spec, n)
            t0 = clock.t(n)
            clock.append(k)
            draw: PerturbationDraw = draw_perturbation(rng_delta, game.d1, n)
            raw = x + delta * draw.signs
            x_tilde = x_box.project(raw)
            if np.any(x_tilde != raw):
                traj.projections["leader"] += 1
            w = noise.sample(rng_noise, k)
            s_sum = 0.0
            for j in range(k):
                y_raw = step(x_tilde, y, t0 + j)
                y = y_box.project(y_raw)
                if np.any(y != y_raw):
                    traj.projections["follower"] += 1
                if log_stages or average_observations or j == k - 1:
                    s_stage = f1(x_tilde, y) + (w[j] if noise.active else 0.0)
                    s_sum += s_stage
                if log_stages:
                    eps_t = None if r is None else float(np.linalg.norm(y - r(x_tilde)))
                    if keep_stages:
                        traj.stages.append(StageRecord(t0 + j, n, x_tilde, y.copy(), s_stage, eps_t))
                    if sink is not None:
                        sink.write(n, t0 + j, "stage", x_tilde, y, s_stage, eps_t, delta, alpha, k)
            s = s_sum / k if average_observations else s_stage
            eps = None if r is None else float(np.linalg.norm(y - r(x_tilde)))
            rec = IntervalRecord(n, t0, x, x_tilde, draw.signs, delta, alpha, k, y.copy(), float(s), eps)
            traj.intervals.append(rec)
            if sink is not None:
                sink.write(n, t0, "interval", x, y, s, eps, delta, alpha, k)
            last_row = rec
            raw = x + alpha * spsa_gradient(s, delta, draw)
            x = x_box.project(raw)
            if np.any(x != raw):
                traj.projections["leader"] += 1
            _check_state(x, y, limits, traj, last_row)
        traj.final_x, traj.final_y = x, y
        if sink is not None:
            sink.write(n_intervals, clock.total, "interval", x, y)
    except DivergedError:
        traj.final_x, traj.final_y = x, y
        raise
    finally:
        if sink is not None:
            sink.close()
    return traj


def _as_rate(rate) -> PowerLaw:
    return rate if isinstance(rate, PowerLaw) else PowerLaw(float(rate), 0.0)


def _run_simultaneous(algorithm, step_fn, game, a1, a2, noise, x0, y0, n_steps, seed, csv_path, meta):
    if n_steps < 0:
        raise ValueError(f"n_steps must be >= 0, got {n_steps}")
    a1, a2 = _as_rate(a1), _as_rate(a2)
    x = game.x_box.project(as_strategy(x0, game.d1, "x0"))
    y = game.y_box.project(as_strategy(y0, game.d2, "y0"))
    _, _, rng = run_streams(seed)
    r = game.best_response
    f1 = game.leader_view()
    traj = TrajectoryLog(
        algorithm, game.name, int(seed), game.d1, game.d2, x.copy(), y.copy(),
        meta={"a1": vars(a1).copy(), "a2": vars(a2).copy(), "noise": noise.to_dict(), "n_steps": int(n_steps), **meta},
    )
    sink = CsvSink(csv_path, game.d1, game.d2) if csv_path is not None else None
    limits = _guard(game)
    try:
        for t in range(n_steps + 1):
            s = f1(x, y)
            eps = None if r is None else float(np.linalg.norm(y - r(x)))
            alpha = a1(t) if t < n_steps else None
            rec = StageRecord(t, t, x, y, s, eps, alpha)
            traj.stages.append(rec)
            if sink is not None:
                sink.write(t, t, "stage", x, y, s, eps, None, alpha, None)
            if t == n_steps:
                break
            xn, yn = step_fn(game, x, y, a1(t), a2(t), noise, rng)
            # projection inside the step; count coordinates that landed on a face
            if np.any((xn == game.x_box.lower) | (xn == game.x_box.upper)):
                traj.projections["leader"] += 1
            if np.any((yn == game.y_box.lower) | (yn == game.y_box.upper)):
                traj.projections["follower"] += 1
            x, y = xn, yn
            _check_state(x, y, limits, traj, rec)
        traj.final_x, traj.final_y = x, y
    except DivergedError:
        traj.final_x, traj.final_y = x, y
        raise
    finally:
        if sink is not None:
            sink.close()
    return traj


def run_coupled(game: Game, a1, a2, noise: NoiseModel, x0, y0, n_steps: int, seed: int, *, csv_path=None) -> TrajectoryLog:
    """Two-timescale hierarchical gradient baseline; every stage is logged."""
    return _run_simultaneous("coupled", coupled_step, game, a1, a2, noise, x0, y0, n_steps, seed, csv_path, {})


def run_sga(game: Game, rates, noise: NoiseModel, start, n_steps: int, seed: int, *, csv_path=None) -> TrajectoryLog:
    """Simultaneous gradient ascent baseline; ``rates = (a1, a2)``, ``start = (x0, y0)``."""
    a1, a2 = rates
    x0, y0 = start
    return _run_simultaneous("sga", sga_step, game, a1, a2, noise, x0, y0, n_steps, seed, csv_path, {})


@dataclass
class TrackingSeries:
    n: np.ndarray
    eps: np.ndarray
    ratio: np.ndarray
    max_ratio: float
    slope: float
    vanishing: bool

    def rows(self):
        return list(zip(self.n.tolist(), self.eps.tolist(), self.ratio.tolist()))


def tracking_error_series(traj: TrajectoryLog, game: Game, slope_tol: float = -0.1) -> TrackingSeries:
    """Per-interval ``eps_n = |y_tilde_n - r(x_tilde_n)|`` and ``eps_n / delta_n``.

    ``slope`` is the least-squares slope of ``log(ratio)`` against ``log(n)``
    over ``n >= 1`` with positive ratio; the ratio is flagged as vanishing
    when every ratio is zero or the slope is below ``slope_tol``.
    """
    if traj.algorithm != "hic":
        raise ValueError("tracking errors are defined for commitment (hic) trajectories only")
    ns, eps, ratio = [], [], []
    y_prev = None
    for rec in traj.intervals:
        if game.best_response is not None:
            r = game.best_response(rec.x_tilde)
        else:
            r = best_response_solve(game, rec.x_tilde, tol=1e-12, y0=rec.y_tilde if y_prev is None else y_prev)
            y_prev = r
        e = float(np.linalg.norm(rec.y_tilde - r))
        ns.append(rec.n)
        eps.append(e)
        ratio.append(e / rec.delta)
    ns, eps, ratio = np.array(ns, dtype=int), np.array(eps), np.array(ratio)
    max_ratio = float(ratio.max()) if ratio.size else 0.0
    mask = (ns >= 1) & (ratio > 0)
    if mask.sum() >= 2:
        slope = float(np.polyfit(np.log(ns[mask]), np.log(ratio[mask]), 1)[0])
    else:
        slope = -math.inf
    vanishing = bool(not np.any(ratio > 0) or slope < slope_tol)
    return TrackingSeries(ns, eps, ratio, max_ratio, slope, vanishing)
