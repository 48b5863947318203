"""``stackgrad`` command line: run, certify, oracle, validate.

Exit codes: 0 ok, 2 config error, 3 runtime error.  ``STACKGRAD_LOG``
sets the log level (``DEBUG``, ``INFO``, ...; default ``WARNING``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config import ExperimentConfig, check_config, load_config, load_quadratic_spec, parse_seed_range
from .equilibria import GRAD_TOL, EIG_TOL, best_response_solve, check_dne, check_dse, quadratic_oracle
from .errors import ConfigError, DegenerateGameError, DivergedError, StackgradError
from .harness import LeaderConfig, make_follower, run_coupled, run_hic, run_sga
from .logio import SERIES_COLUMNS, format_value, validate_json, write_json

log = logging.getLogger("stackgrad")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
RUN_GRAD_TOL = 1e-2

__all__ = ["main", "cmd_run", "cmd_certify", "cmd_oracle", "cmd_validate", "summarize"]


def _setup_logging():
    level = os.environ.get("STACKGRAD_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _err(msg):
    print(f"stackgrad: {msg}", file=sys.stderr)


def _x_star(game):
    if game.spec is None:
        return None
    try:
        return quadratic_oracle(game.spec).x_star
    except DegenerateGameError:
        return None


def _execute(cfg: ExperimentConfig, game, seed: int, csv_path):
    x0 = cfg.x0 if cfg.x0 is not None else game.x_box.center
    y0 = cfg.y0 if cfg.y0 is not None else game.y_box.center
    if cfg.algorithm == "hic":
        leader = LeaderConfig(cfg.schedule, cfg.commitment_schedule(game), cfg.noise, np.asarray(x0, dtype=float))
        return run_hic(
            game, leader, make_follower(cfg.follower), cfg.horizon, seed,
            y0=y0, log_stages=cfg.log_stages, keep_stages=False, csv_path=csv_path,
            average_observations=cfg.average_observations,
        )
    a1, a2 = cfg.power_laws()
    if cfg.algorithm == "coupled":
        return run_coupled(game, a1, a2, cfg.noise, x0, y0, cfg.horizon, seed, csv_path=csv_path)
    return run_sga(game, (a1, a2), cfg.noise, (x0, y0), cfg.horizon, seed, csv_path=csv_path)


def _series(traj, x_star):
    rows = []
    dist = (lambda x: float(np.linalg.norm(np.asarray(x) - x_star))) if x_star is not None else (lambda x: None)
    if traj.algorithm == "hic":
        for rec in traj.intervals:
            ratio = None if rec.eps is None else rec.eps / rec.delta
            rows.append((traj.seed, rec.n, dist(rec.x), ratio))
        if traj.final_x is not None:
            rows.append((traj.seed, len(traj.intervals), dist(traj.final_x), None))
    else:
        rows.extend((traj.seed, rec.t, dist(rec.x), None) for rec in traj.stages)
    return rows


def _certify_row(game, x, grad_tol, eig_tol):
    try:
        y = best_response_solve(game, x)
        rep = check_dse(game, x, y, grad_tol=grad_tol, eig_tol=eig_tol)
        return rep.grad_norm_leader, rep.grad_norm_follower, rep.classification
    except StackgradError as exc:
        log.warning("certification failed at x=%s: %s", x, exc)
        return None, None, "error"


def run_seed(cfg: ExperimentConfig, seed: int, out_dir: str) -> dict:
    """Run one seed, write its CSV and sidecar, return the summary row and series."""
    game = cfg.build_game()
    out = Path(out_dir)
    csv_path = out / f"run_{seed}.csv"
    x_star = _x_star(game)
    start = time.perf_counter()
    try:
        traj = _execute(cfg, game, seed, csv_path)
    except DivergedError as exc:
        log.error("seed %d diverged: %s", seed, exc)
        return {"seed": seed, "error": str(exc)}
    except StackgradError as exc:
        log.error("seed %d failed: %s", seed, exc)
        return {"seed": seed, "error": str(exc)}
    wall = time.perf_counter() - start
    sidecar = traj.sidecar()
    write_json(out / f"run_{seed}.meta.json", sidecar)
    gl, gf, label = _certify_row(
        game, traj.final_x, cfg.certify.get("grad_tol", RUN_GRAD_TOL), cfg.certify.get("eig_tol", EIG_TOL)
    )
    row = {
        "seed": int(seed),
        "final_x": traj.final_x.tolist(),
        "final_y": traj.final_y.tolist(),
        "final_distance": None if x_star is None else float(np.linalg.norm(traj.final_x - x_star)),
        "grad_norm_leader": gl,
        "grad_norm_follower": gf,
        "classification": label,
        "wall_clock": wall,
        "projections": int(sum(traj.projections.values())),
    }
    return {"seed": seed, "row": row, "series": _series(traj, x_star)}


def summarize(rows: List[dict]) -> dict:
    """Aggregates derived from the per-seed rows."""
    d = [r["final_distance"] for r in rows if r["final_distance"] is not None]
    if not d:
        return {"n_runs": len(rows), "median_final_distance": None, "iqr_final_distance": None}
    q1, med, q3 = np.percentile(d, [25, 50, 75])
    return {"n_runs": len(rows), "median_final_distance": float(med), "iqr_final_distance": float(q3 - q1)}


def _write_series(path, series):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for row in series:
            w.writerow([format_value(v) for v in row])


def cmd_run(config, seed_range: Optional[str] = None, jobs: int = 1, out: Optional[str] = None, plot: bool = False) -> int:
    try:
        cfg = load_config(config)
        if seed_range is not None:
            cfg = replace(cfg, seeds=parse_seed_range(seed_range))
        if not cfg.seeds:
            raise ConfigError("no seeds to run ([run].seeds is empty)")
        game = cfg.build_game()
        problems = check_config(cfg, game)
        if problems:
            raise ConfigError("invalid config: " + "; ".join(map(str, problems)))
        if cfg.algorithm == "hic":
            cfg.commitment_schedule(game)
        else:
            cfg.power_laws()
        if jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {jobs}")
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    out_dir = Path(out or cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    log.info("running %d seeds of %s on %s into %s", len(cfg.seeds), cfg.algorithm, game.name, out_dir)

    if jobs == 1 or len(cfg.seeds) == 1:
        results = [run_seed(cfg, s, str(out_dir)) for s in cfg.seeds]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(cfg.seeds))) as pool:
            results = list(pool.map(run_seed, [cfg] * len(cfg.seeds), cfg.seeds, [str(out_dir)] * len(cfg.seeds)))

    ok = [r for r in results if "row" in r]
    failed = [int(r["seed"]) for r in results if "row" not in r]
    rows = [r["row"] for r in ok]
    x_star = _x_star(game)
    summary = {
        "config": str(cfg.path),
        "algorithm": cfg.algorithm,
        "game": game.name,
        "x_star": None if x_star is None else x_star.tolist(),
        "rows": rows,
        "aggregates": summarize(rows),
        "failed_seeds": failed,
    }
    validate_json(summary, "summary")
    write_json(out_dir / "summary.json", summary)
    series = [row for r in ok for row in r["series"]]
    _write_series(out_dir / "series.csv", series)
    if plot:
        try:
            from .plotting import plot_series
        except ImportError as exc:
            _err(f"--plot needs matplotlib ({exc})")
        else:
            plot_series(series, out_dir)
    agg = summary["aggregates"]
    print(json.dumps({"out": str(out_dir), "failed_seeds": failed, **agg}))
    if failed:
        _err(f"runtime failure for seeds {failed}; summary written for the remaining seeds")
        return EXIT_RUNTIME
    return EXIT_OK


_PRECEDENCE = ("DSS", "DNE", "stationary-only", "none")


def cmd_certify(config, x, y=None, grad_tol: float = GRAD_TOL, eig_tol: float = EIG_TOL, out=None) -> int:
    try:
        cfg = load_config(config)
        game = cfg.build_game()
        x = np.asarray(x, dtype=float)
        if x.shape != (game.d1,):
            raise ConfigError(f"--x needs {game.d1} values, got {x.size}")
        if y is not None:
            y = np.asarray(y, dtype=float)
            if y.shape != (game.d2,):
                raise ConfigError(f"--y needs {game.d2} values, got {y.size}")
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    try:
        if y is None:
            y = best_response_solve(game, x)
        dse = check_dse(game, x, y, grad_tol=grad_tol, eig_tol=eig_tol)
        dne = check_dne(game, x, y, grad_tol=grad_tol, eig_tol=eig_tol)
    except StackgradError as exc:
        _err(str(exc))
        return EXIT_RUNTIME
    label = min((dse.classification, dne.classification), key=_PRECEDENCE.index)
    payload = {"classification": label, "dse": dse.to_dict(), "dne": dne.to_dict()}
    validate_json(payload["dse"], "report")
    validate_json(payload["dne"], "report")
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        write_json(out, payload)
    print(text)
    return EXIT_OK


def cmd_oracle(spec_path, out=None) -> int:
    try:
        spec = load_quadratic_spec(spec_path)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    try:
        res = quadratic_oracle(spec)
    except DegenerateGameError as exc:
        _err(f"degenerate game: {exc}")
        return EXIT_RUNTIME
    payload = res.to_dict()
    validate_json(payload, "oracle")
    if out:
        write_json(out, payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_validate(config, out=None) -> int:
    try:
        cfg = load_config(config)
        problems = check_config(cfg)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    payload = {
        "ok": not problems,
        "violations": [{"condition": v.condition, "message": v.message, "values": v.values} for v in problems],
    }
    validate_json(payload, "validation")
    if out:
        write_json(out, payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    for v in problems:
        _err(f"violated: {v}")
    return EXIT_OK if not problems else EXIT_CONFIG


def _floats(text):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stackgrad", description="Stackelberg learning with commitments.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a config over its seeds")
    r.add_argument("config", help="TOML config path or bundled config name (e.g. g0_hic)")
    r.add_argument("--seed-range", metavar="A..B", help="inclusive seed range, overrides the config")
    r.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel worker processes")
    r.add_argument("--out", metavar="DIR", help="output directory, overrides [run].out")
    r.add_argument("--plot", action="store_true", help="also render SVG line charts (needs matplotlib)")

    c = sub.add_parser("certify", help="classify a point as DSS / DNE / stationary-only / none")
    c.add_argument("config")
    c.add_argument("--x", type=_floats, required=True, help="leader strategy, e.g. 1.5 or 0.1,0.2")
    c.add_argument("--y", type=_floats, help="follower strategy (default: numerical best response)")
    c.add_argument("--grad-tol", type=float, default=GRAD_TOL)
    c.add_argument("--eig-tol", type=float, default=EIG_TOL)
    c.add_argument("--out", metavar="FILE")

    o = sub.add_parser("oracle", help="closed-form solution of a quadratic spec")
    o.add_argument("spec")
    o.add_argument("--out", metavar="FILE")

    v = sub.add_parser("validate", help="check schedule and follower preconditions")
    v.add_argument("config")
    v.add_argument("--out", metavar="FILE")
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command == "run":
        return cmd_run(args.config, args.seed_range, args.jobs, args.out, args.plot)
    if args.command == "certify":
        return cmd_certify(args.config, args.x, args.y, args.grad_tol, args.eig_tol, args.out)
    if args.command == "oracle":
        return cmd_oracle(args.spec, args.out)
    return cmd_validate(args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())
