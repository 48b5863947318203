"""End-to-end acceptance experiments.

Each test prints one ``CRITERION n: PASS|FAIL`` line (visible without
``-s``) and asserts the criterion at its stated tolerance and runtime.
"""

import itertools
import json
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import random_game, random_spec
from stackgrad import (
    CommitmentSchedule,
    GradientAscentFollower,
    LeaderConfig,
    NoiseModel,
    PerturbationDraw,
    ScheduleSpec,
    best_response_solve,
    check_dse,
    g0,
    hierarchical_gradient,
    implicit_jacobian,
    quadratic_2d,
    run_coupled,
    run_hic,
    run_sga,
    spsa_increment,
    tracking_error_series,
    two_peak,
)
from stackgrad.cli import main
from stackgrad.config import load_config
from stackgrad.logio import read_csv, validate_csv, validate_json

pytestmark = pytest.mark.slow


@contextmanager
def criterion(capsys, number, title, budget):
    start = time.perf_counter()
    detail = {}
    try:
        yield detail
        elapsed = time.perf_counter() - start
        assert elapsed < budget, f"runtime {elapsed:.1f}s exceeds {budget}s"
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        with capsys.disabled():
            print(f"\nCRITERION {number}: FAIL  {title} ({elapsed:.1f}s) {exc}")
        raise
    with capsys.disabled():
        extra = " ".join(f"{k}={v}" for k, v in detail.items())
        print(f"\nCRITERION {number}: PASS  {title} ({elapsed:.1f}s) {extra}")


def test_criterion_1_spsa_exactness(capsys):
    with criterion(capsys, 1, "SPSA average over all sign vectors equals the leader gradient", 1.0) as info:
        worst = 0.0
        for seed in range(20):
            spec = random_spec(100 + seed)
            rng = np.random.default_rng(seed)
            signs = [PerturbationDraw(s) for s in itertools.product((-1.0, 1.0), repeat=spec.d1)]
            for _ in range(10):
                x = rng.uniform(-2, 2, spec.d1)
                delta = rng.uniform(0.05, 1.0)
                total = np.zeros(spec.d1)
                for draw in signs:
                    xt = x + delta * draw.signs
                    f_obs = spec.f1(xt, spec.best_response(xt))
                    total += [spsa_increment(f_obs, delta, draw, i) for i in range(spec.d1)]
                worst = max(worst, float(np.max(np.abs(total / len(signs) - spec.leader_gradient(x)))))
        info["max_abs_err"] = f"{worst:.2e}"
        assert worst <= 1e-9


def test_criterion_2_implicit_jacobian(capsys):
    with criterion(capsys, 2, "implicit Jacobian matches finite differences of the solved best response", 5.0) as info:
        worst = 0.0
        for seed in range(20):
            game = random_game(200 + seed)
            x = np.random.default_rng(seed).uniform(-1, 1, game.d1)
            y = best_response_solve(game, x, tol=1e-13)
            J = implicit_jacobian(game, x, y)
            h = 1e-5
            fd = np.column_stack([
                (best_response_solve(game, x + h * e, tol=1e-13, y0=y)
                 - best_response_solve(game, x - h * e, tol=1e-13, y0=y)) / (2 * h)
                for e in np.eye(game.d1)
            ])
            worst = max(worst, float(np.linalg.norm(J - fd) / max(np.linalg.norm(fd), 1e-12)))
        info["max_rel_err"] = f"{worst:.2e}"
        assert worst <= 1e-4


def _quadratic_benchmarks():
    yield g0(), [0.25, 0.5, 1.0]
    for seed in range(4):
        game = quadratic_2d(seed)
        yield game, [0.3 / game.meta.K2, 0.7 / game.meta.K2, 1.0 / game.meta.K2]


def test_criterion_3_contraction(capsys):
    with criterion(capsys, 3, "follower contraction bound on every logged trajectory", 5.0) as info:
        checked = 0
        for game, betas in _quadratic_benchmarks():
            mu = game.meta.mu
            for beta in betas:
                q = 1.0 - beta * mu
                leader = LeaderConfig(ScheduleSpec(), CommitmentSchedule(mode="fixed", k_fixed=6), NoiseModel("gaussian", 0.01),
                                      np.zeros(game.d1))
                traj = run_hic(game, leader, GradientAscentFollower(beta), 60, seed=checked, log_stages=True,
                               y0=game.y_box.upper * 0.5)
                y_prev = traj.y0
                for rec in traj.intervals:
                    r = game.best_response(rec.x_tilde)
                    path = [y_prev] + [s.y for s in traj.stages[rec.t:rec.t + rec.k]]
                    d = [float(np.linalg.norm(y - r)) for y in path]
                    for t in range(len(d)):
                        for k in range(1, len(d) - t):
                            assert d[t + k] <= q ** (k / 2) * d[t] + 1e-12, (game.name, beta, rec.n, t, k)
                            checked += 1
                    y_prev = rec.y_tilde
        info["inequalities"] = checked


def test_criterion_4_commitment_schedule(capsys):
    with criterion(capsys, 4, "solved commitment lengths keep eps_n/delta_n <= 1/n", 30.0) as info:
        worst = 0.0
        for seed in range(4):
            game = quadratic_2d(seed)
            beta = 0.5 / game.meta.mu
            assert beta <= 1.0 / game.meta.K2
            sched = CommitmentSchedule(beta=beta, mu=game.meta.mu, B=game.y_box.diameter, p=1.0)
            traj = run_hic(game, LeaderConfig(ScheduleSpec(), sched, NoiseModel(), np.zeros(2)),
                           GradientAscentFollower(beta), 501, seed)
            series = tracking_error_series(traj, game)
            n = series.n[1:]
            worst = max(worst, float(np.max(series.ratio[1:] * n)))
            assert np.all(series.ratio[1:] <= 1.0 / n)
        info["max_n_times_ratio"] = f"{worst:.3f}"


def _median_point(game, rows):
    xs = np.array([r["final_x"] for r in rows])
    x_med = np.median(xs, axis=0)
    return x_med, best_response_solve(game, x_med)


def test_criterion_5_hic_convergence(capsys, tmp_path):
    with criterion(capsys, 5, "HiC median distance <= 0.05 and DSS at the median point", 180.0) as info:
        for name in ("g0_hic", "quadratic2d_hic"):
            out = tmp_path / name
            assert main(["run", name, "--out", str(out)]) == 0
            capsys.readouterr()
            summary = json.loads((out / "summary.json").read_text())
            cfg = load_config(name)
            assert cfg.noise.sigma == 0.01 and cfg.horizon == 5000 and len(summary["rows"]) == 20
            assert cfg.schedule == ScheduleSpec()
            med = summary["aggregates"]["median_final_distance"]
            game = cfg.build_game()
            x_med, y_med = _median_point(game, summary["rows"])
            rep = check_dse(game, x_med, y_med, grad_tol=1e-2)
            info[f"{name}.median"] = f"{med:.4f}"
            info[f"{name}.grad"] = f"{rep.grad_norm_leader:.4f}"
            assert med <= 0.05
            assert rep.classification == "DSS", rep.to_dict()


def test_criterion_6_baseline_contrast(capsys):
    with criterion(capsys, 6, "SGA reaches the Nash point while coupled and HiC reach the Stackelberg point", 60.0) as info:
        game = g0()
        sga = run_sga(game, (0.1, 0.1), NoiseModel(), ([0.0], [0.0]), 500, seed=0)
        p_sga = np.r_[sga.final_x, sga.final_y]
        assert np.max(np.abs(p_sga - 1.0)) <= 1e-3
        cpl = run_coupled(game, 0.01, 0.5, NoiseModel(), [0.0], [0.0], 10_000, seed=0)
        assert np.max(np.abs(np.r_[cpl.final_x, cpl.final_y] - 1.5)) <= 5e-2
        leader = LeaderConfig(ScheduleSpec(), CommitmentSchedule(beta=0.5, mu=1.0, B=20.0), NoiseModel("gaussian", 0.01),
                              np.zeros(1))
        finals = [run_hic(game, leader, GradientAscentFollower(0.5), 5000, seed=s).final_x for s in range(5)]
        x_hic = np.median(np.array(finals), axis=0)
        y_hic = best_response_solve(game, x_hic)
        assert np.max(np.abs(np.r_[x_hic, y_hic] - 1.5)) <= 5e-2
        u_hic = game.payoff(1, x_hic, y_hic)
        u_sga = game.payoff(1, sga.final_x, sga.final_y)
        info["leader_payoff_hic"] = f"{u_hic:.4f}"
        info["leader_payoff_sga"] = f"{u_sga:.4f}"
        assert u_hic == pytest.approx(-0.5, abs=1e-2)
        assert u_sga == pytest.approx(-1.0, abs=1e-2)
        assert u_hic > u_sga


def test_criterion_7_set_convergence(capsys, tmp_path):
    with criterion(capsys, 7, "two-peak HiC runs end near a local maximum with small total gradient", 180.0) as info:
        game = two_peak()
        # critical points of g(x) = f1(x, r(x)) = -(x^2 - 1)^2: roots of g'(x) = -4x^3 + 4x
        roots = np.roots([-4.0, 0.0, 4.0, 0.0]).real
        maxima = np.sort([r for r in roots if -12 * r ** 2 + 4 < 0])
        np.testing.assert_allclose(maxima, [-1.0, 1.0], atol=1e-12)
        out = tmp_path / "tp"
        assert main(["run", "two_peak_hic", "--out", str(out)]) == 0
        capsys.readouterr()
        rows = json.loads((out / "summary.json").read_text())["rows"]
        assert len(rows) == 40
        xs = np.array([r["final_x"][0] for r in rows])
        grads = [float(np.linalg.norm(hierarchical_gradient(game, np.array([x]), game.best_response(np.array([x])))))
                 for x in xs]
        dist = np.min(np.abs(xs[:, None] - maxima[None, :]), axis=1)
        info["max_grad"] = f"{max(grads):.4f}"
        info["max_dist"] = f"{dist.max():.2e}"
        info["at_-1/+1"] = f"{int(np.sum(xs < 0))}/{int(np.sum(xs > 0))}"
        assert max(grads) <= 1e-2
        assert np.all(dist <= 0.05)


def test_criterion_8_determinism_and_schemas(capsys, tmp_path):
    with criterion(capsys, 8, "equal config and seed give identical CSV bodies; outputs match schemas", 120.0) as info:
        files = 0
        for name, seeds in (("g0_hic", "0..1"), ("quadratic2d_hic", "3..3"), ("g0_coupled", "0..1"), ("g0_sga", "0..0")):
            cfg = load_config(name)
            d1 = d2 = 2 if "quadratic" in name else 1
            outs = []
            for rep in ("a", "b"):
                out = tmp_path / f"{name}_{rep}"
                assert main(["run", name, "--out", str(out), "--seed-range", seeds]) == 0
                outs.append(out)
            for csv_a in sorted(outs[0].glob("run_*.csv")):
                csv_b = outs[1] / csv_a.name
                assert csv_a.read_bytes() == csv_b.read_bytes()
                assert validate_csv(csv_a, d1, d2) == []
                validate_json(json.loads(csv_a.with_suffix(".meta.json").read_text()), "meta")
                files += 2
            assert (outs[0] / "series.csv").read_bytes() == (outs[1] / "series.csv").read_bytes()
            header, _ = read_csv(outs[0] / "series.csv")
            assert header == ["seed", "n", "distance", "ratio"]
            validate_json(json.loads((outs[0] / "summary.json").read_text()), "summary")
            files += 2
            assert cfg.algorithm in ("hic", "coupled", "sga")
        capsys.readouterr()
        for argv, kind in ((["oracle", "g0_spec"], "oracle"), (["validate", "g0_hic"], "validation")):
            assert main(argv) == 0
            validate_json(json.loads(capsys.readouterr().out), kind)
            files += 1
        assert main(["certify", "g0_hic", "--x", "1.5"]) == 0
        payload = json.loads(capsys.readouterr().out)
        validate_json(payload["dse"], "report")
        validate_json(payload["dne"], "report")
        info["files_checked"] = files + 1
