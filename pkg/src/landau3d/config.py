"""Run configuration: flat key = value files, validation, and hashing.

The configuration format is deliberately plain text with one ``key = value``
pair per line (``#`` starts a comment) -- language agnostic and diff
friendly.  Parsing applies defaults, validates every invariant, and the
canonical serialization (sorted keys, 17 significant digits) feeds the
config hash stamped into every artifact, so identical configurations
always map to identical artifact headers.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, fields, replace

SCHEMA_VERSION = 1
WORKERS_ENV = "LANDAU3D_WORKERS"

_SPATIAL_NAMES = ("gaussian", "neutral-gaussian")
_VELOCITY_NAMES = ("background", "gaussian", "compact")
_MODES = ("direct", "picard")


class ConfigError(ValueError):
    """Invalid configuration: unknown key, bad value, or broken invariant."""


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of the pipeline in one flat record.

    Times are in units of the inverse plasma frequency and velocities in
    units of the background thermal scale (the nondimensional variables in
    which the equilibrium transform is exp(-|k|)).
    """

    equilibrium: str = "poisson"
    spatial: str = "neutral-gaussian"
    spatial_width: float = 1.0
    velocity: str = "gaussian"
    eps: float = 1e-3
    n_r: int = 96
    r_max: float = 40.0
    n_u: int = 32
    n_l: int = 16
    dt: float = 0.05
    t_max: float = 40.0
    k_min: float = 1e-3
    k_max: float = 20.0
    n_k: int = 256
    mode: str = "direct"
    tol_picard: float = 1e-9
    n_max_picard: int = 12
    window_t: float = 5.0
    relax: float = 1.0
    quad_tol: float = 1e-9
    workers: int = 1
    outdir: str = "out"

    def __post_init__(self):
        if self.equilibrium != "poisson":
            raise ConfigError(f"unknown equilibrium {self.equilibrium!r}")
        if self.spatial not in _SPATIAL_NAMES:
            raise ConfigError(f"unknown spatial profile {self.spatial!r}")
        if self.velocity not in _VELOCITY_NAMES:
            raise ConfigError(f"unknown velocity profile {self.velocity!r}")
        if self.mode not in _MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.eps < 0:
            raise ConfigError("eps must be >= 0")
        if min(self.n_r, self.n_u, self.n_l) < 4:
            raise ConfigError("grid sizes must be >= 4")
        if not (0 < self.dt <= 0.1):
            raise ConfigError("dt must be in (0, 0.1] (carrier resolution)")
        if self.t_max <= 0 or self.r_max <= 0:
            raise ConfigError("t_max and r_max must be > 0")
        if not (0 < self.k_min < self.k_max):
            raise ConfigError("need 0 < k_min < k_max")
        if self.n_k < 4:
            raise ConfigError("n_k must be >= 4")
        if self.spatial_width <= 0:
            raise ConfigError("spatial_width must be > 0")
        if self.tol_picard <= 0 or self.quad_tol <= 0:
            raise ConfigError("tolerances must be > 0")
        if self.n_max_picard < 1:
            raise ConfigError("n_max_picard must be >= 1")
        if self.window_t <= 0:
            raise ConfigError("window_t must be > 0")
        if not (0 < self.relax <= 1):
            raise ConfigError("relax must be in (0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def _coerce(name, text):
    kind = RunConfig.__dataclass_fields__[name].type
    raw = text.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_text(text: str) -> RunConfig:
    """Parse key = value lines into a validated RunConfig."""
    values = {}
    known = {f.name for f in fields(RunConfig)}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key = value, got {body!r}")
        key, _, val = body.partition("=")
        key = key.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, val)
    return RunConfig(**values)


def parse_config(path) -> RunConfig:
    """Read and validate a configuration file (IOError if unreadable)."""
    with open(path, "r", encoding="utf-8") as fh:
        config = parse_text(fh.read())
    override = os.environ.get(WORKERS_ENV)
    if override is not None:
        try:
            workers = int(override)
        except ValueError as exc:
            raise ConfigError(f"{WORKERS_ENV} must be an integer") from exc
        config = replace(config, workers=workers)
    return config


def serialize(config: RunConfig) -> str:
    """Canonical text form: sorted keys, floats at 17 significant digits.

    parse_text(serialize(c)) == c for every valid configuration.
    """
    lines = []
    for f in sorted(fields(RunConfig), key=lambda f: f.name):
        value = getattr(config, f.name)
        if f.type == "float":
            lines.append(f"{f.name} = {value:.17g}")
        else:
            lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def config_hash(config: RunConfig) -> str:
    """Stable 12-hex-digit digest of the canonical serialization."""
    return hashlib.sha256(serialize(config).encode()).hexdigest()[:12]
