"""Step-size, perturbation and commitment schedules.

All schedules are power laws in the interval index ``n``:

    alpha_n = a / (n + 1) ** rho        (leader step size)
    delta_n = c / (n + 1) ** gamma      (perturbation radius)

Commitment lengths ``k_n`` either come from the strongly-concave-follower
rule (``mode="corollary"``) or are a fixed constant.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import List, Optional

from .errors import InvalidBoundError, InvalidContractionError, ScheduleError

__all__ = [
    "PowerLaw",
    "ScheduleSpec",
    "CommitmentSchedule",
    "Violation",
    "step_size",
    "perturbation",
    "validate",
    "commitment_length",
    "commitment_times",
    "tracking_bound",
]


@dataclass(frozen=True)
class PowerLaw:
    """``scale / (n + 1) ** power``; ``power = 0`` gives a constant rate."""

    scale: float
    power: float = 0.0

    def __post_init__(self):
        if not self.scale >= 0 or not math.isfinite(self.scale):
            raise ScheduleError(f"rate scale must be finite and non-negative, got {self.scale}")
        if not math.isfinite(self.power) or self.power < 0:
            raise ScheduleError(f"rate power must be finite and non-negative, got {self.power}")

    def __call__(self, n: int) -> float:
        return self.scale / (n + 1) ** self.power


@dataclass(frozen=True)
class ScheduleSpec:
    a: float = 1.0
    rho: float = 1.0
    c: float = 1.0
    gamma: float = 0.2

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ScheduleError(f"step-size scale a must be positive, got {self.a}")
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ScheduleError(f"perturbation scale c must be positive, got {self.c}")
        if not (math.isfinite(self.rho) and math.isfinite(self.gamma)):
            raise ScheduleError("rho and gamma must be finite")

    def step_size(self, n: int) -> float:
        return step_size(self, n)

    def perturbation(self, n: int) -> float:
        return perturbation(self, n)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_index(n):
    if n < 0:
        raise ValueError(f"schedule index must be >= 0, got {n}")


def step_size(spec: ScheduleSpec, n: int) -> float:
    _check_index(n)
    return spec.a / (n + 1) ** spec.rho


def perturbation(spec: ScheduleSpec, n: int) -> float:
    _check_index(n)
    return spec.c / (n + 1) ** spec.gamma


@dataclass(frozen=True)
class Violation:
    condition: str
    message: str
    values: dict

    def __str__(self):
        vals = ", ".join(f"{k}={v}" for k, v in self.values.items())
        return f"{self.condition}: {self.message} ({vals})"


def validate(spec: ScheduleSpec) -> List[Violation]:
    """Check the step-size/perturbation conditions in closed form.

    For power laws, ``alpha_n -> 0`` iff ``rho > 0``, ``sum alpha_n = inf``
    iff ``rho <= 1``, ``delta_n -> 0`` iff ``gamma > 0`` and
    ``sum alpha_n^2 / delta_n^2 < inf`` iff ``2 (rho - gamma) > 1``.
    An empty list means the spec is valid.
    """
    out = []
    rho, gamma = spec.rho, spec.gamma
    if rho <= 0:
        out.append(Violation("alpha_n -> 0", "step size does not vanish (need rho > 0)", {"rho": rho}))
    if rho > 1:
        out.append(Violation("sum alpha_n = inf", "step sizes are summable (need rho <= 1)", {"rho": rho}))
    if gamma <= 0:
        out.append(Violation("delta_n -> 0", "perturbation delta_n does not vanish (need gamma > 0)", {"gamma": gamma}))
    if not 2 * (rho - gamma) > 1:
        out.append(
            Violation(
                "sum alpha_n^2/delta_n^2 < inf",
                "sum of alpha_n^2/delta_n^2 diverges (need 2(rho - gamma) > 1)",
                {"rho": rho, "gamma": gamma, "2(rho-gamma)": 2 * (rho - gamma)},
            )
        )
    return out


@dataclass(frozen=True)
class CommitmentSchedule:
    """How many stages the leader commits to each perturbed strategy.

    ``mode="corollary"`` picks the smallest ``k_n`` with
    ``(1 - beta*mu) ** (k_n / 2) * B / delta_n <= n ** -p``; ``mode="fixed"``
    always returns ``k_fixed``.
    """

    mode: str = "corollary"
    p: float = 1.0
    beta: Optional[float] = None
    mu: Optional[float] = None
    B: Optional[float] = None
    k_fixed: int = 1

    def __post_init__(self):
        if self.mode not in ("corollary", "fixed"):
            raise ScheduleError(f"commitment mode must be 'corollary' or 'fixed', got {self.mode!r}")
        if self.mode == "fixed":
            if int(self.k_fixed) != self.k_fixed or self.k_fixed < 1:
                raise ScheduleError(f"k_fixed must be a positive integer, got {self.k_fixed}")
            return
        if not self.p > 0:
            raise ScheduleError(f"tracking-rate exponent p must be positive, got {self.p}")
        if self.beta is None or self.mu is None or self.B is None:
            raise ScheduleError("corollary commitments need beta, mu and B")
        _check_contraction(self.beta * self.mu)
        if not self.B > 0:
            raise InvalidBoundError(f"strategy bound B must be positive, got {self.B}")

    @property
    def beta_mu(self) -> float:
        return self.beta * self.mu

    def to_dict(self) -> dict:
        return asdict(self)


def _check_contraction(beta_mu):
    if not 0 < beta_mu < 1:
        raise InvalidContractionError(f"need 0 < beta*mu < 1, got {beta_mu}")


def commitment_length(delta: float, n: int, beta_mu: float, B: float, p: float) -> int:
    """``max(1, ceil(2 (ln delta - ln B - p ln n) / ln(1 - beta mu)))``."""
    _check_contraction(beta_mu)
    if not B > 0:
        raise InvalidBoundError(f"strategy bound B must be positive, got {B}")
    if not delta > 0:
        raise ScheduleError(f"perturbation must be positive, got {delta}")
    if n < 1:
        raise ValueError(f"commitment index must be >= 1, got {n}")
    k = 2.0 * (math.log(delta) - math.log(B) - p * math.log(n)) / math.log1p(-beta_mu)
    return max(1, math.ceil(k))


def commitment_times(sched: CommitmentSchedule, spec: ScheduleSpec, n: int) -> int:
    """Commitment length ``k_n`` for interval ``n`` (interval 0 reuses ``k_1``)."""
    _check_index(n)
    if sched.mode == "fixed":
        return int(sched.k_fixed)
    m = max(n, 1)
    return commitment_length(perturbation(spec, m), m, sched.beta_mu, sched.B, sched.p)


def tracking_bound(sched: CommitmentSchedule, delta: float, k: int) -> float:
    """Worst-case ``epsilon_n / delta_n`` implied by ``k`` contraction steps."""
    return (1.0 - sched.beta_mu) ** (k / 2.0) * sched.B / delta
