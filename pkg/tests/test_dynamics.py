import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_game, random_spec, seeds
from stackgrad import (
    Box,
    Game,
    NoiseModel,
    PerturbationDraw,
    best_response_solve,
    coupled_step,
    draw_perturbation,
    follower_ga_step,
    g0,
    hierarchical_gradient,
    sga_step,
    spsa_gradient,
    spsa_increment,
)
from stackgrad.dynamics import RidgeFallbackWarning
from stackgrad.errors import ScheduleError, SingularHessianError

G0 = g0()
one = lambda v: np.array([float(v)])  # noqa: E731


# simultaneous gradient ascent


def test_sga_fixed_at_dne():
    for a in (0.0, 0.1, 0.7):
        x, y = sga_step(G0, one(1), one(1), a, a)
        assert x[0] == 1.0 and y[0] == 1.0


def test_sga_from_origin():
    x, y = sga_step(G0, one(0), one(0), 0.1, 0.1)
    assert x[0] == pytest.approx(0.2, abs=1e-15)
    assert y[0] == 0.0


@given(st.floats(-4, 4), st.floats(-10, 10))
def test_sga_zero_rates_identity(x, y):
    xn, yn = sga_step(G0, one(x), one(y), 0.0, 0.0)
    assert xn[0] == x and yn[0] == y


def test_sga_rejects_negative_rates():
    with pytest.raises(ValueError):
        sga_step(G0, one(0), one(0), -0.1, 0.1)


# follower gradient ascent


@given(st.floats(-4, 4), st.floats(-10, 10))
def test_follower_one_step_exact_with_unit_beta(xt, y):
    # y + (xt - y) can differ from xt by rounding only
    assert follower_ga_step(G0, one(xt), one(y), 1.0)[0] == pytest.approx(xt, abs=1e-12)


def test_follower_stationary_at_best_response():
    assert follower_ga_step(G0, one(2.5), one(2.5), 0.7)[0] == 2.5


def test_follower_half_step():
    y = follower_ga_step(G0, one(2), one(0), 0.5)
    assert y[0] == 1.0
    # distance to r(2)=2 halves, within the (1 - beta mu)^(1/2) bound
    assert abs(y[0] - 2) <= 0.5 ** 0.5 * 2


def test_follower_beta_bounds():
    with pytest.raises(ValueError):
        follower_ga_step(G0, one(0), one(0), 1.5)
    with pytest.raises(ValueError):
        follower_ga_step(G0, one(0), one(0), 0.0)


@given(seeds, st.floats(0.05, 1.0), st.integers(1, 30))
def test_follower_contraction_bound(seed, frac, steps):
    game = random_game(seed)
    spec = game.spec
    beta = frac / spec.K2
    q = 1 - beta * spec.mu
    r = np.random.default_rng(seed)
    xt = r.uniform(-2, 2, game.d1)
    target = spec.best_response(xt)
    ys = [r.uniform(-5, 5, game.d2)]
    for _ in range(steps):
        ys.append(follower_ga_step(game, xt, ys[-1], beta))
    d = [np.linalg.norm(y - target) for y in ys]
    for t in range(len(d)):
        for k in range(1, len(d) - t):
            assert d[t + k] <= q ** (k / 2) * d[t] + 1e-12


# hierarchical gradient


def test_hierarchical_gradient_zero_at_dse():
    assert hierarchical_gradient(G0, one(1.5), one(1.5))[0] == pytest.approx(0.0, abs=1e-15)


def test_hierarchical_gradient_leader_ignores_follower():
    game = Game(
        1, 1, lambda x, y: -(x[0] ** 2), lambda x, y: -0.5 * (y[0] - x[0]) ** 2,
        grads={(1, "x"): lambda x, y: -2 * x, (1, "y"): lambda x, y: np.zeros(1)},
    )
    assert hierarchical_gradient(game, one(0.7), one(-3))[0] == pytest.approx(-1.4, abs=1e-15)


@given(seeds)
def test_hierarchical_gradient_matches_oracle(seed):
    game = random_game(seed)
    spec = game.spec
    x = np.random.default_rng(seed).uniform(-2, 2, game.d1)
    D = hierarchical_gradient(game, x, spec.best_response(x))
    np.testing.assert_allclose(D, spec.leader_gradient(x), rtol=1e-9, atol=1e-9)


@given(seeds)
def test_hierarchical_gradient_matches_fd_of_solved_objective(seed):
    game = random_game(seed, d1=2, d2=2)
    x = np.random.default_rng(seed).uniform(-1, 1, 2)
    D = hierarchical_gradient(game, x, best_response_solve(game, x, tol=1e-13))
    h = 1e-5
    fd = np.empty(2)
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fp = game.payoff(1, x + e, best_response_solve(game, x + e, tol=1e-13))
        fm = game.payoff(1, x - e, best_response_solve(game, x - e, tol=1e-13))
        fd[j] = (fp - fm) / (2 * h)
    assert np.linalg.norm(D - fd) <= 1e-4 * max(1.0, np.linalg.norm(fd))


def test_singular_follower_hessian():
    game = Game(
        1, 1, lambda x, y: x[0] * y[0], lambda x, y: x[0] * y[0],
        seconds={(2, "yy"): lambda x, y: np.zeros((1, 1)), (2, "xy"): lambda x, y: np.ones((1, 1))},
    )
    with pytest.raises(SingularHessianError) as err:
        hierarchical_gradient(game, one(1), one(1))
    assert err.value.eigenvalue == 0.0
    with pytest.warns(RidgeFallbackWarning):
        D = hierarchical_gradient(game, one(1), one(1), ridge=1.0)
    assert np.all(np.isfinite(D))


# coupled step


def test_coupled_fixed_point():
    x, y = coupled_step(G0, one(1.5), one(1.5), 0.3, 0.3)
    assert x[0] == 1.5 and y[0] == 1.5


def test_coupled_deterministic_with_noise():
    noise = NoiseModel("gaussian", 0.1)
    a = coupled_step(G0, one(0), one(0), 0.1, 0.1, noise, np.random.default_rng(4))
    b = coupled_step(G0, one(0), one(0), 0.1, 0.1, noise, np.random.default_rng(4))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_coupled_converges_to_dse():
    x, y = one(0), one(0)
    for _ in range(10_000):
        x, y = coupled_step(G0, x, y, 0.01, 0.5)
    assert abs(x[0] - 1.5) <= 1e-3 and abs(y[0] - 1.5) <= 1e-3


def test_noise_none_leaves_rng_untouched():
    rng = np.random.default_rng(0)
    state = rng.bit_generator.state
    coupled_step(G0, one(0), one(0), 0.1, 0.1, NoiseModel(), rng)
    assert rng.bit_generator.state == state


@given(seeds, st.floats(0.0, 50.0), st.floats(0.0, 50.0))
def test_steps_are_projection_closed(seed, a1, a2):
    spec = random_spec(seed)
    game = spec.to_game(Box.uniform(spec.d1, -1, 1), Box.uniform(spec.d2, -1, 1))
    r = np.random.default_rng(seed)
    x, y = r.uniform(-1, 1, spec.d1), r.uniform(-1, 1, spec.d2)
    for xn, yn in (sga_step(game, x, y, a1, a2), coupled_step(game, x, y, a1, a2)):
        assert game.x_box.contains(xn) and game.y_box.contains(yn)
    assert game.y_box.contains(follower_ga_step(game, x, y * 50, 1.0 / spec.K2))


# SPSA


def test_spsa_trivial_cases():
    draw = PerturbationDraw([1.0, -1.0, 1.0])
    assert all(spsa_increment(0.0, 0.3, draw, i) == 0.0 for i in range(3))
    assert spsa_increment(1.0, 0.5, PerturbationDraw([-1.0]), 0) == -2.0
    with pytest.raises(ScheduleError):
        spsa_increment(1.0, 0.0, draw, 0)
    with pytest.raises(ValueError):
        PerturbationDraw([1.0, 0.5])


def test_spsa_g0_example():
    f = lambda v: G0.payoff(1, one(v), one(v))  # noqa: E731
    assert f(0.1) == pytest.approx(-4.42, abs=1e-14)
    assert f(-0.1) == pytest.approx(-5.62, abs=1e-14)
    avg = 0.5 * (
        spsa_increment(f(0.1), 0.1, PerturbationDraw([1.0]), 0)
        + spsa_increment(f(-0.1), 0.1, PerturbationDraw([-1.0]), 0)
    )
    assert avg == pytest.approx(6.0, abs=1e-12)


@given(seeds, st.floats(0.01, 2.0))
def test_spsa_exact_over_all_sign_vectors(seed, delta):
    spec = random_spec(seed)
    x = np.random.default_rng(seed).uniform(-2, 2, spec.d1)
    total = np.zeros(spec.d1)
    signs = list(itertools.product((-1.0, 1.0), repeat=spec.d1))
    for s in signs:
        draw = PerturbationDraw(s)
        xt = x + delta * draw.signs
        total += spsa_gradient(spec.f1(xt, spec.best_response(xt)), delta, draw)
    np.testing.assert_allclose(total / len(signs), spec.leader_gradient(x), atol=1e-9 * max(1, 1 / delta))


def test_draw_perturbation_uniform_signs():
    rng = np.random.default_rng(0)
    draws = np.array([draw_perturbation(rng, 3).signs for _ in range(4000)])
    assert set(np.unique(draws)) == {-1.0, 1.0}
    assert np.all(np.abs(draws.mean(axis=0)) < 0.06)
