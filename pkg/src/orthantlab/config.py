"""Experiment configuration: flat key/value files, validation, manifests.

Config files are `key = value` lines ('#' starts a comment); lists are
comma-separated.  Every key can be overridden by a CLI flag of the same
name.  Emission is canonical (sorted keys, normalized values), so
emit -> parse round-trips and the config hash is stable.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, fields
from fractions import Fraction

from .errors import ConfigError
from .lattice import GENERATOR_ID

ARTIFACT_VERSION = "0.1.0"

SUBCOMMANDS = (
    "theta", "sweep", "critical", "shape", "walk",
    "osss-check", "russo-check", "oracle", "explore-trace",
)

_INT = "int"
_FLOAT = "float"
_STR = "str"
_BOOL = "bool"
_FLOATS = "float_list"
_INTS = "int_list"

# key -> (type, default); None defaults mean "subcommand decides"
SCHEMA = {
    "command": (_STR, None),
    "d": (_INT, 2),
    "model": (_STR, "half-orthant"),
    "eta": (_STR, "0"),
    "p": (_FLOAT, None),
    "p_grid": (_FLOATS, None),
    "n": (_INT, None),
    "n_list": (_INTS, None),
    "window": (_INT, None),
    "window_scale": (_INT, None),
    "trials": (_INT, 1000),
    "seed": (_INT, 0),
    "threads": (_INT, 1),
    "out_dir": (_STR, "runs"),
    "tol": (_FLOAT, 1.0 / 64),
    "min_successes": (_INT, 10),
    "threshold": (_FLOAT, 0.5),
    "steps": (_INT, 10000),
    "walks": (_INT, 100),
    "round_cap": (_INT, None),
    "k": (_INT, None),
    "depth": (_INT, None),
    "exact": (_BOOL, True),
    "u": (_INTS, None),
    "kind": (_STR, "ptilde"),
    "quenched": (_BOOL, False),
    "paths": (_BOOL, False),
}


@dataclass
class ExperimentConfig:
    command: str | None = None
    d: int = 2
    model: str = "half-orthant"
    eta: str = "0"
    p: float | None = None
    p_grid: list | None = None
    n: int | None = None
    n_list: list | None = None
    window: int | None = None
    window_scale: int | None = None
    trials: int = 1000
    seed: int = 0
    threads: int = 1
    out_dir: str = "runs"
    tol: float = 1.0 / 64
    min_successes: int = 10
    threshold: float = 0.5
    steps: int = 10000
    walks: int = 100
    round_cap: int | None = None
    k: int | None = None
    depth: int | None = None
    exact: bool = True
    u: list | None = None
    kind: str = "ptilde"
    quenched: bool = False
    paths: bool = False

    def eta_fraction(self) -> Fraction:
        return Fraction(self.eta)


def _parse_value(key: str, text: str):
    typ, _ = SCHEMA[key]
    text = text.strip()
    if typ == _INT:
        return int(text)
    if typ == _FLOAT:
        return float(text)
    if typ == _BOOL:
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if typ == _FLOATS:
        return [float(x) for x in text.split(",") if x.strip()]
    if typ == _INTS:
        return [int(x) for x in text.split(",") if x.strip()]
    return text


def validate(cfg: ExperimentConfig) -> list[str]:
    """All validation problems, not just the first."""
    errs = []
    if cfg.command is not None and cfg.command not in SUBCOMMANDS:
        errs.append(f"unknown command {cfg.command!r}")
    if not 2 <= cfg.d <= 4:
        errs.append(f"d={cfg.d} outside supported range 2..4")
    try:
        eta = Fraction(cfg.eta)
        if not 0 <= eta <= 1:
            errs.append(f"eta={cfg.eta} outside [0, 1]")
    except (ValueError, ZeroDivisionError):
        errs.append(f"eta={cfg.eta!r} is not a valid rational")
    if cfg.model not in ("orthant", "half-orthant"):
        errs.append(f"model={cfg.model!r} (use 'orthant' or 'half-orthant')")
    if cfg.p is not None and not 0 <= cfg.p <= 1:
        errs.append(f"p={cfg.p} outside [0, 1]")
    if cfg.p_grid is not None:
        if not cfg.p_grid:
            errs.append("p_grid is empty")
        elif any(not 0 <= x <= 1 for x in cfg.p_grid):
            errs.append("p_grid has entries outside [0, 1]")
    if cfg.n is not None and cfg.n < 0:
        errs.append(f"n={cfg.n} must be nonnegative")
    if cfg.n_list is not None and not cfg.n_list:
        errs.append("n_list is empty")
    if cfg.window is not None and cfg.window < 0:
        errs.append(f"window={cfg.window} must be nonnegative")
    if cfg.trials < 1:
        errs.append("trials must be positive")
    if cfg.tol <= 0:
        errs.append("tol must be positive")
    if cfg.threads < 1:
        errs.append("threads must be positive")
    if cfg.steps < 1:
        errs.append("steps must be positive")
    if cfg.walks < 1:
        errs.append("walks must be positive")
    if cfg.kind not in ("ptilde", "pc"):
        errs.append(f"kind={cfg.kind!r} (use 'ptilde' or 'pc')")
    return errs


def parse_config(text: str) -> ExperimentConfig:
    """Parse a flat key/value config; raises ConfigError with every problem."""
    values = {}
    errs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errs.append(f"line {lineno}: expected 'key = value', got {raw!r}")
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            errs.append(f"line {lineno}: unknown key {key!r}")
            continue
        try:
            values[key] = _parse_value(key, val)
        except ValueError as exc:
            errs.append(f"line {lineno}: bad value for {key}: {exc}")
    if errs:
        raise ConfigError(errs)
    cfg = ExperimentConfig(**values)
    problems = validate(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def emit_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse(emit(cfg)) == cfg."""
    lines = []
    for f in sorted(fields(cfg), key=lambda f: f.name):
        val = getattr(cfg, f.name)
        if val is None:
            continue
        if isinstance(val, bool):
            text = "true" if val else "false"
        elif isinstance(val, list):
            text = ",".join(repr(x) if isinstance(x, float) else str(x) for x in val)
        elif isinstance(val, float):
            text = repr(val)
        else:
            text = str(val)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


# Runtime-only keys: they steer execution, not results, so they stay out of
# the config hash (equal hash + version must mean bit-identical outputs).
_UNHASHED = ("threads", "out_dir")


def config_hash(cfg: ExperimentConfig) -> str:
    lines = [
        line for line in emit_config(cfg).splitlines()
        if line.split(" = ")[0] not in _UNHASHED
    ]
    payload = "\n".join(lines) + ARTIFACT_VERSION
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class RunManifest:
    """Provenance record: a run's identity and what it wrote."""

    config_hash: str
    generator: str
    version: str
    command: str
    seed: int
    created_utc: str
    outputs: list

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


def make_manifest(cfg: ExperimentConfig, outputs: list) -> RunManifest:
    return RunManifest(
        config_hash=config_hash(cfg),
        generator=GENERATOR_ID,
        version=ARTIFACT_VERSION,
        command=cfg.command or "",
        seed=cfg.seed,
        created_utc=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        outputs=list(outputs),
    )
