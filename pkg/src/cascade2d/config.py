"""JSON configuration ingestion for runs and sweeps.

Strictness over convenience: unknown keys are hard errors (no silent typo
tolerance), and every constraint violation in a file is reported in one
exception rather than one at a time.  ``config_echo`` materializes all
defaults into a plain dict whose JSON serialization reloads to an identical
configuration, which is what the CLI drops into every report directory.
"""

from __future__ import annotations

import json
from pathlib import Path

from .experiment import SWEEP_MODES, SweepConfig, SweepPoint
from .integrator import RunConfig, ShellForcingConfig

__all__ = ["ConfigError", "load_config", "parse_config", "config_echo"]


class ConfigError(ValueError):
    """Invalid configuration; the message lists every problem found."""


_FORCING_KEYS = ("k_min", "k_max", "epsilon")
_RUN_KEYS = (
    "nu",
    "alpha",
    "gamma",
    "lambda",
    "grid_n",
    "forcing",
    "seed",
    "t_burn",
    "t_sample",
    "sample_interval",
    "dt_max",
    "cfl_failure_limit",
)
_SWEEP_KEYS = (
    "mode",
    "forcing",
    "points",
    "t_burn",
    "t_sample",
    "sample_interval",
    "dt_max",
    "beta",
    "plateau_tolerance",
)
_POINT_KEYS = ("nu", "alpha", "gamma", "lambda", "grid_n", "seeds")


class _Reader:
    """Pulls typed values out of one JSON object, collecting complaints."""

    def __init__(self, doc: dict, problems: list[str], context: str = ""):
        self.doc = doc
        self.problems = problems
        self.context = context

    def complain(self, key: str, message: str) -> None:
        self.problems.append(f"{self.context}{key}: {message}")

    def reject_unknown(self, allowed) -> None:
        for key in self.doc:
            if key not in allowed:
                self.complain(key, "unknown key")

    def number(self, key, default=None, *, minimum=None, exclusive=False):
        if key not in self.doc:
            if default is None:
                self.complain(key, "required key is missing")
            return default
        value = self.doc[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.complain(key, f"must be a number, got {value!r}")
            return default
        value = float(value)
        if minimum is not None:
            if exclusive and not value > minimum:
                self.complain(key, f"must be > {minimum}, got {value:g}")
                return default
            if not exclusive and not value >= minimum:
                self.complain(key, f"must be >= {minimum}, got {value:g}")
                return default
        return value

    def integer(self, key, default=None, *, minimum=None):
        if key not in self.doc:
            if default is None:
                self.complain(key, "required key is missing")
            return default
        value = self.doc[key]
        if isinstance(value, bool) or not isinstance(value, int):
            self.complain(key, f"must be an integer, got {value!r}")
            return default
        if minimum is not None and value < minimum:
            self.complain(key, f"must be >= {minimum}, got {value}")
            return default
        return value

    def mapping(self, key) -> dict | None:
        if key not in self.doc:
            self.complain(key, "required key is missing")
            return None
        value = self.doc[key]
        if not isinstance(value, dict):
            self.complain(key, f"must be an object, got {type(value).__name__}")
            return None
        return value


def _read_forcing(doc: dict, problems: list[str], context: str) -> ShellForcingConfig | None:
    reader = _Reader(doc, problems, context)
    reader.reject_unknown(_FORCING_KEYS)
    k_min = reader.number("k_min", minimum=0.0, exclusive=True)
    k_max = reader.number("k_max", minimum=0.0, exclusive=True)
    epsilon = reader.number("epsilon", minimum=0.0, exclusive=True)
    if None in (k_min, k_max, epsilon):
        return None
    if k_max < k_min:
        problems.append(f"{context}k_max: must be >= k_min, got {k_max:g} < {k_min:g}")
        return None
    return ShellForcingConfig(k_min, k_max, epsilon)


def _parse_run(doc: dict) -> RunConfig:
    problems: list[str] = []
    reader = _Reader(doc, problems)
    reader.reject_unknown(_RUN_KEYS)
    nu = reader.number("nu", minimum=0.0, exclusive=True)
    alpha = reader.number("alpha", minimum=0.0)
    gamma = reader.number("gamma", minimum=0.0)
    box_size = reader.number("lambda", minimum=0.0, exclusive=True)
    grid_n = reader.integer("grid_n", minimum=8)
    seed = reader.integer("seed", minimum=0)
    forcing_doc = reader.mapping("forcing")
    forcing = None
    if forcing_doc is not None:
        forcing = _read_forcing(forcing_doc, problems, "forcing.")
    t_burn = reader.number("t_burn", 50.0, minimum=0.0)
    t_sample = reader.number("t_sample", 200.0, minimum=0.0)
    sample_interval = reader.number("sample_interval", 0.5, minimum=0.0, exclusive=True)
    dt_max = reader.number("dt_max", 0.05, minimum=0.0, exclusive=True)
    cfl_failure_limit = reader.integer("cfl_failure_limit", 5, minimum=1)
    if problems:
        raise ConfigError("; ".join(problems))
    try:
        return RunConfig(
            box_size=box_size,
            n=grid_n,
            nu=nu,
            alpha=alpha,
            gamma=gamma,
            forcing=forcing,
            dt_max=dt_max,
            t_burn=t_burn,
            t_sample=t_sample,
            sample_interval=sample_interval,
            seed=seed,
            cfl_failure_limit=cfl_failure_limit,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_point(doc, index: int, problems: list[str]) -> SweepPoint | None:
    context = f"points[{index}]."
    if not isinstance(doc, dict):
        problems.append(f"points[{index}]: must be an object")
        return None
    reader = _Reader(doc, problems, context)
    reader.reject_unknown(_POINT_KEYS)
    nu = reader.number("nu", minimum=0.0, exclusive=True)
    alpha = reader.number("alpha", minimum=0.0)
    gamma = reader.number("gamma", minimum=0.0)
    box_size = reader.number("lambda", minimum=0.0, exclusive=True)
    grid_n = reader.integer("grid_n", minimum=8)
    seeds = doc.get("seeds", [0])
    if not isinstance(seeds, list) or not all(
        isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds
    ):
        reader.complain("seeds", f"must be a list of nonnegative integers, got {seeds!r}")
        return None
    if None in (nu, alpha, gamma, box_size, grid_n):
        return None
    return SweepPoint(
        nu=nu,
        alpha=alpha,
        gamma=gamma,
        box_size=box_size,
        n=grid_n,
        seeds=tuple(seeds),
    )


def _parse_sweep(doc: dict) -> SweepConfig:
    problems: list[str] = []
    reader = _Reader(doc, problems)
    reader.reject_unknown(_SWEEP_KEYS)
    mode = doc.get("mode")
    if not isinstance(mode, str):
        reader.complain("mode", f"must be a string, got {mode!r}")
        mode = None
    forcing_doc = reader.mapping("forcing")
    forcing = None
    if forcing_doc is not None:
        forcing = _read_forcing(forcing_doc, problems, "forcing.")
    raw_points = doc.get("points")
    points = []
    if not isinstance(raw_points, list) or not raw_points:
        reader.complain("points", "must be a non-empty list")
    else:
        for index, entry in enumerate(raw_points):
            point = _parse_point(entry, index, problems)
            if point is not None:
                points.append(point)
    t_burn = reader.number("t_burn", 50.0, minimum=0.0)
    t_sample = reader.number("t_sample", 200.0, minimum=0.0)
    sample_interval = reader.number("sample_interval", 0.5, minimum=0.0, exclusive=True)
    dt_max = reader.number("dt_max", 0.05, minimum=0.0, exclusive=True)
    beta = reader.number("beta", 0.1)
    plateau_tolerance = reader.number("plateau_tolerance", 0.3, minimum=0.0, exclusive=True)
    if problems:
        raise ConfigError("; ".join(problems))
    try:
        return SweepConfig(
            mode=mode,
            points=tuple(points),
            forcing_k_min=forcing.k_min,
            forcing_k_max=forcing.k_max,
            epsilon=forcing.epsilon_target,
            t_burn=t_burn,
            t_sample=t_sample,
            sample_interval=sample_interval,
            dt_max=dt_max,
            beta=beta,
            plateau_tolerance=plateau_tolerance,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(doc) -> RunConfig | SweepConfig:
    """Validate an already-parsed JSON document (see load_config)."""
    if not isinstance(doc, dict):
        raise ConfigError(f"top level must be an object, got {type(doc).__name__}")
    if "mode" in doc or "points" in doc:
        return _parse_sweep(doc)
    return _parse_run(doc)


def load_config(path) -> RunConfig | SweepConfig:
    """Read and validate a JSON config file.

    A document with "mode" or "points" keys describes a sweep, anything
    else a single run.  Unknown keys anywhere are hard errors, and the
    raised ConfigError lists every violation in the file at once.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config(doc)


def config_echo(config: RunConfig | SweepConfig) -> dict:
    """Plain-dict image of a config with every default materialized.

    Serializing the echo as JSON and reloading it reproduces the identical
    configuration, which makes the echo dropped into report directories a
    complete provenance record.
    """
    if isinstance(config, RunConfig):
        return {
            "nu": config.nu,
            "alpha": config.alpha,
            "gamma": config.gamma,
            "lambda": config.box_size,
            "grid_n": config.n,
            "seed": config.seed,
            "forcing": {
                "k_min": config.forcing.k_min,
                "k_max": config.forcing.k_max,
                "epsilon": config.forcing.epsilon_target,
            },
            "t_burn": config.t_burn,
            "t_sample": config.t_sample,
            "sample_interval": config.sample_interval,
            "dt_max": config.dt_max,
            "cfl_failure_limit": config.cfl_failure_limit,
        }
    if isinstance(config, SweepConfig):
        return {
            "mode": config.mode,
            "forcing": {
                "k_min": config.forcing_k_min,
                "k_max": config.forcing_k_max,
                "epsilon": config.epsilon,
            },
            "points": [
                {
                    "nu": point.nu,
                    "alpha": point.alpha,
                    "gamma": point.gamma,
                    "lambda": point.box_size,
                    "grid_n": point.n,
                    "seeds": list(point.seeds),
                }
                for point in config.points
            ],
            "t_burn": config.t_burn,
            "t_sample": config.t_sample,
            "sample_interval": config.sample_interval,
            "dt_max": config.dt_max,
            "beta": config.beta,
            "plateau_tolerance": config.plateau_tolerance,
        }
    raise TypeError(f"not a run or sweep config: {type(config).__name__}")
