"""TOML experiment configs and quadratic spec files.

An experiment config looks like::

    algorithm = "hic"            # hic | coupled | sga

    [game]
    builtin = "g0"               # or: seed = 3 with builtin = "quadratic2d"
    # quadratic = { Q1 = [[2.0]], ... }   inline matrices, row-major
    # x_box = { lower = [-4.0], upper = [4.0] }

    [schedule]                   # hic: alpha_n = a/(n+1)^rho, delta_n = c/(n+1)^gamma
    a = 1.0
    rho = 1.0
    c = 1.0
    gamma = 0.2

    [commitment]                 # mu defaults to the game's, B to the follower box diameter
    mode = "corollary"
    p = 1.0
    beta = 0.5

    [follower]
    kind = "gradient-ascent"
    beta = 0.5

    [noise]
    kind = "gaussian"
    sigma = 0.01

    [rates]                      # coupled / sga: a_i(t) = scale/(t+1)^power
    a1 = { scale = 0.01, power = 0.6 }
    a2 = { scale = 0.5, power = 0.4 }

    [run]
    seed_range = "0..19"         # inclusive; or seeds = [0, 1, 2]
    horizon = 5000               # intervals (hic) or steps (coupled, sga)
    x0 = [0.0]
    out = "runs/g0_hic"
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import tomli_w

from .benchmarks import builtin_game
from .dynamics import NoiseModel
from .errors import ConfigError, ScheduleError
from .game import Box, Game, QuadraticGameSpec
from .schedules import CommitmentSchedule, PowerLaw, ScheduleSpec, Violation, validate

__all__ = [
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "parse_seed_range",
    "bundled_config",
    "load_quadratic_spec",
    "dump_quadratic_spec",
    "check_config",
]

ALGORITHMS = ("hic", "coupled", "sga")
CONFIG_DIR = Path(__file__).parent / "configs"


def parse_seed_range(text: str) -> List[int]:
    """``"a..b"`` (inclusive) -> ``[a, ..., b]``."""
    m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", str(text))
    if not m:
        raise ConfigError(f"seed range must look like 'a..b', got {text!r}")
    a, b = int(m.group(1)), int(m.group(2))
    if b < a:
        raise ConfigError(f"empty seed range {text!r}")
    return list(range(a, b + 1))


def bundled_config(name: str) -> Optional[Path]:
    stem = name[:-5] if name.endswith(".toml") else name
    path = CONFIG_DIR / f"{stem}.toml"
    return path if path.is_file() else None


def _read_toml(path) -> dict:
    path = Path(path)
    if not path.is_file():
        found = bundled_config(str(path))
        if found is None:
            raise ConfigError(f"config file not found: {path}")
        path = found
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc


def _box(data, dim, what):
    if data is None:
        return None
    try:
        box = Box(data["lower"], data["upper"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must have numeric 'lower' and 'upper' lists: {exc}") from exc
    if box.dim != dim:
        raise ConfigError(f"{what} has dimension {box.dim}, game needs {dim}")
    return box


def load_quadratic_spec(path) -> QuadraticGameSpec:
    """Read a quadratic spec from a TOML file.

    Accepts matrices at top level, under ``[quadratic]``, or under
    ``[game.quadratic]`` of an experiment config.
    """
    data = _read_toml(path)
    if "game" in data and isinstance(data["game"], dict):
        data = data["game"]
    if "quadratic" in data:
        data = data["quadratic"]
    try:
        return QuadraticGameSpec.from_dict(data)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: invalid quadratic spec: {exc}") from exc


def dump_quadratic_spec(spec: QuadraticGameSpec, path=None) -> str:
    text = tomli_w.dumps({"quadratic": spec.to_dict()})
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _game_from_section(sec: dict, base: Path) -> Game:
    if not isinstance(sec, dict):
        raise ConfigError("[game] must be a table")
    if "builtin" in sec:
        kwargs = {}
        if sec["builtin"] == "quadratic2d":
            kwargs["seed"] = int(sec.get("seed", 0))
        try:
            game = builtin_game(sec["builtin"], **kwargs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        x_box = _box(sec.get("x_box"), game.d1, "game.x_box")
        y_box = _box(sec.get("y_box"), game.d2, "game.y_box")
        if x_box is not None or y_box is not None:
            game = builtin_game(sec["builtin"], x_box=x_box, y_box=y_box, **kwargs)
        return game
    if "quadratic" in sec or "spec" in sec:
        if "spec" in sec:
            spec = load_quadratic_spec((base / sec["spec"]) if not Path(sec["spec"]).is_absolute() else sec["spec"])
        else:
            try:
                spec = QuadraticGameSpec.from_dict(sec["quadratic"])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"invalid [game.quadratic]: {exc}") from exc
        x_box = _box(sec.get("x_box"), spec.d1, "game.x_box")
        y_box = _box(sec.get("y_box"), spec.d2, "game.y_box")
        return spec.to_game(x_box, y_box, name=sec.get("name", "quadratic"))
    raise ConfigError("[game] needs 'builtin', 'quadratic' or 'spec'")


@dataclass
class ExperimentConfig:
    path: str
    algorithm: str
    game_section: dict
    schedule: Optional[ScheduleSpec]
    commitment: dict
    follower: dict
    noise: NoiseModel
    rates: dict
    seeds: List[int]
    horizon: int
    x0: Optional[list]
    y0: Optional[list]
    out: str
    log_stages: bool = False
    average_observations: bool = False
    certify: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def base_dir(self) -> Path:
        return Path(self.path).resolve().parent

    def build_game(self) -> Game:
        return _game_from_section(self.game_section, self.base_dir)

    def commitment_schedule(self, game: Game) -> CommitmentSchedule:
        sec = dict(self.commitment)
        mode = sec.get("mode", "corollary")
        try:
            if mode == "fixed":
                return CommitmentSchedule(mode="fixed", k_fixed=int(sec.get("k_fixed", 1)))
            beta = sec.get("beta", self.follower.get("beta"))
            mu = sec.get("mu", game.meta.mu)
            B = sec.get("B", game.meta.B if game.meta.B is not None else game.y_box.diameter)
            return CommitmentSchedule(mode=mode, p=float(sec.get("p", 1.0)), beta=beta, mu=mu, B=B)
        except ScheduleError as exc:
            raise ConfigError(f"[commitment]: {exc}") from exc

    def power_laws(self):
        out = []
        for key in ("a1", "a2"):
            val = self.rates.get(key)
            if val is None:
                raise ConfigError(f"[rates] needs {key}")
            try:
                if isinstance(val, dict):
                    out.append(PowerLaw(float(val["scale"]), float(val.get("power", 0.0))))
                else:
                    out.append(PowerLaw(float(val), 0.0))
            except (KeyError, ScheduleError, ValueError, TypeError) as exc:
                raise ConfigError(f"[rates].{key}: {exc}") from exc
        return tuple(out)


def parse_config(data: dict, path: str = "<memory>") -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from parsed TOML; raises :class:`ConfigError`."""
    algorithm = data.get("algorithm", "hic")
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {algorithm!r}")
    if "game" not in data:
        raise ConfigError("config needs a [game] table")
    sched = None
    if "schedule" in data or algorithm == "hic":
        try:
            sched = ScheduleSpec(**{k: float(v) for k, v in data.get("schedule", {}).items()})
        except TypeError as exc:
            raise ConfigError(f"[schedule]: {exc}") from exc
        except ScheduleError as exc:
            raise ConfigError(f"[schedule]: {exc}") from exc
    noise_sec = data.get("noise", {})
    try:
        noise = NoiseModel(noise_sec.get("kind", "none"), float(noise_sec.get("sigma", 0.0)))
    except ValueError as exc:
        raise ConfigError(f"[noise]: {exc}") from exc
    run = data.get("run", {})
    if "seeds" in run and "seed_range" in run:
        raise ConfigError("[run] takes either seeds or seed_range, not both")
    if "seed_range" in run:
        seeds = parse_seed_range(run["seed_range"])
    else:
        seeds = run.get("seeds", [0])
        if not isinstance(seeds, list) or not all(isinstance(s, int) and s >= 0 for s in seeds):
            raise ConfigError(f"[run].seeds must be a list of non-negative integers, got {seeds!r}")
    horizon = run.get("horizon", 1000)
    if not isinstance(horizon, int) or horizon < 0:
        raise ConfigError(f"[run].horizon must be a non-negative integer, got {horizon!r}")
    follower = dict(data.get("follower", {"kind": "oracle"}))
    if follower.get("kind") not in ("gradient-ascent", "oracle"):
        raise ConfigError(f"[follower].kind must be 'gradient-ascent' or 'oracle', got {follower.get('kind')!r}")
    if algorithm in ("coupled", "sga") and "rates" not in data:
        raise ConfigError(f"algorithm {algorithm!r} needs a [rates] table")
    cfg = ExperimentConfig(
        path=str(path),
        algorithm=algorithm,
        game_section=data["game"],
        schedule=sched,
        commitment=dict(data.get("commitment", {"mode": "fixed", "k_fixed": 1})),
        follower=follower,
        noise=noise,
        rates=dict(data.get("rates", {})),
        seeds=list(seeds),
        horizon=horizon,
        x0=run.get("x0"),
        y0=run.get("y0"),
        out=str(run.get("out", "runs")),
        log_stages=bool(run.get("log_stages", False)),
        average_observations=bool(run.get("average_observations", False)),
        certify=dict(data.get("certify", {})),
        raw=data,
    )
    return cfg


def load_config(path) -> ExperimentConfig:
    data = _read_toml(path)
    resolved = Path(path) if Path(path).is_file() else bundled_config(str(path))
    return parse_config(data, str(resolved))


def check_config(cfg: ExperimentConfig, game: Optional[Game] = None) -> List[Violation]:
    """Schedule conditions plus the follower/commitment preconditions."""
    out = list(validate(cfg.schedule)) if cfg.schedule is not None else []
    game = game or cfg.build_game()
    if cfg.algorithm == "hic":
        if cfg.follower.get("kind") == "gradient-ascent":
            beta = cfg.follower.get("beta")
            K2 = game.meta.K2
            if beta is None or not beta > 0:
                out.append(Violation("beta in (0, 1/K2]", "follower step must be positive", {"beta": beta}))
            elif K2 is not None and beta > 1.0 / K2 * (1 + 1e-12):
                out.append(Violation("beta in (0, 1/K2]", "follower step exceeds 1/K2", {"beta": beta, "1/K2": 1.0 / K2}))
        if cfg.commitment.get("mode", "corollary") == "corollary":
            beta = cfg.commitment.get("beta", cfg.follower.get("beta"))
            mu = cfg.commitment.get("mu", game.meta.mu)
            B = cfg.commitment.get("B", game.meta.B if game.meta.B is not None else game.y_box.diameter)
            if beta is None or mu is None:
                out.append(Violation("0 < beta*mu < 1", "corollary commitments need beta and mu", {"beta": beta, "mu": mu}))
            elif not 0 < beta * mu < 1:
                out.append(Violation("0 < beta*mu < 1", "follower contraction factor out of range", {"beta*mu": beta * mu}))
            if B is None or not B > 0 or not np.isfinite(B):
                out.append(Violation("B > 0", "strategy bound must be positive and finite", {"B": B}))
    return out
