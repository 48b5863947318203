import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from stackgrad import Box, QuadraticGameSpec

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def _spd(rng, d, lo, hi):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return q @ np.diag(rng.uniform(lo, hi, d)) @ q.T


def random_spec(seed, d1=None, d2=None, concave=True):
    """Random quadratic spec; with ``concave`` the leader objective is strictly concave."""
    rng = np.random.default_rng(seed)
    d1 = d1 or int(rng.integers(1, 4))
    d2 = d2 or int(rng.integers(1, 4))
    M = _spd(rng, d2, 0.5, 2.0)
    M = 0.5 * (M + M.T)
    A = rng.normal(0, 0.5, (d2, d1))
    S = rng.normal(0, 0.3, (d1, d2))
    W = rng.normal(0, 0.5, (d2, d2))
    R1 = W @ W.T
    P = _spd(rng, d1, 1.0, 3.0) if concave else rng.normal(0, 1, (d1, d1))
    SA = S @ A
    Q1 = P + SA + SA.T - A.T @ R1 @ A
    Q1 = 0.5 * (Q1 + Q1.T)
    return QuadraticGameSpec(
        Q1=Q1, R1=R1, S=S, b1=rng.normal(0, 1, d1), M=M, A=A, c=rng.uniform(-0.5, 0.5, d2),
        b2=rng.normal(0, 0.5, d2), e1=float(rng.normal()),
    )


def random_game(seed, **kw):
    spec = random_spec(seed, **kw)
    return spec.to_game(Box.uniform(spec.d1, -50, 50), Box.uniform(spec.d2, -1e3, 1e3), name=f"rand[{seed}]")


seeds = st.integers(0, 2**31 - 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
