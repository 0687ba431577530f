"""Experiment configuration: a flat INI file with one section per concern.

Example::

    [experiment]
    name = gap-exact
    seed = 0

    [lattice]
    dim = 1
    side = 4

    [model]
    q = 2
    p = 0.1
"""

from __future__ import annotations

import configparser
import io
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from swcutoff.errors import ConfigError

ENV_SEED = "SWCUTOFF_SEED"
ENV_OUTPUT_DIR = "SWCUTOFF_OUTPUT_DIR"

# field name -> (section, key, type)
_LAYOUT = {
    "experiment": ("experiment", "name", str),
    "seed": ("experiment", "seed", int),
    "output_dir": ("experiment", "output_dir", str),
    "dim": ("lattice", "dim", int),
    "side": ("lattice", "side", int),
    "grid": ("lattice", "grid", tuple),
    "q": ("model", "q", int),
    "p": ("model", "p", float),
    "beta": ("model", "beta", float),
    "t_max": ("dynamics", "t_max", int),
    "replicas": ("dynamics", "replicas", int),
    "block_side": ("geometry", "block_side", int),
    "halo_width": ("geometry", "halo_width", int),
    "max_components": ("geometry", "max_components", int),
    "max_diameter": ("geometry", "max_diameter", int),
    "min_separation": ("geometry", "min_separation", int),
    "window": ("geometry", "window", str),
}
_POSITIVE = ("dim", "side", "q", "t_max", "replicas", "block_side", "max_components", "min_separation")
_NONNEGATIVE = ("seed", "halo_width", "max_diameter")


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved settings for one experiment run."""

    experiment: str
    dim: int = 1
    side: int | None = None
    grid: tuple = ()
    q: int = 2
    p: float | None = None
    beta: float | None = None
    t_max: int = 10
    replicas: int = 1000
    block_side: int | None = None
    halo_width: int = 1
    max_components: int | None = None
    max_diameter: int | None = None
    min_separation: int | None = None
    window: str | None = None
    seed: int = 0
    output_dir: str = "results"
    tolerances: dict = field(default_factory=dict)

    def validate(self, registered=None) -> "ExperimentConfig":
        if (self.p is None) == (self.beta is None):
            raise ConfigError("[model]: give exactly one of p and beta")
        if self.p is not None and not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"[model] p: must lie in [0, 1], got {self.p}")
        if self.beta is not None and not self.beta >= 0:
            raise ConfigError(f"[model] beta: must be nonnegative, got {self.beta}")
        if self.q < 2:
            raise ConfigError(f"[model] q: must be >= 2, got {self.q}")
        for name in _POSITIVE:
            v = getattr(self, name)
            if v is not None and v <= 0:
                sec, key, _ = _LAYOUT[name]
                raise ConfigError(f"[{sec}] {key}: must be positive, got {v}")
        for name in _NONNEGATIVE:
            v = getattr(self, name)
            if v is not None and v < 0:
                sec, key, _ = _LAYOUT[name]
                raise ConfigError(f"[{sec}] {key}: must be nonnegative, got {v}")
        if any(g <= 0 for g in self.grid):
            raise ConfigError("[lattice] grid: entries must be positive")
        if registered is not None and self.experiment not in registered:
            raise ConfigError(f"unknown experiment {self.experiment!r}; valid names: "
                              + ", ".join(sorted(registered)))
        return self

    @property
    def params(self):
        from swcutoff.measures import ModelParams
        if self.p is not None:
            return ModelParams.from_p(self.q, self.p)
        return ModelParams.from_beta(self.q, self.beta)

    @property
    def resolved_p(self) -> float:
        return self.p if self.p is not None else -math.expm1(-self.beta)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = list(self.grid)
        return d

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for name, (sec, key, typ) in _LAYOUT.items():
            v = getattr(self, name)
            if v is None or (typ is tuple and not v):
                continue
            if not cp.has_section(sec):
                cp.add_section(sec)
            cp.set(sec, key, _format(v, typ))
        if self.tolerances:
            cp.add_section("tolerances")
            for k in sorted(self.tolerances):
                cp.set("tolerances", k, repr(float(self.tolerances[k])))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def file_stem(self) -> str:
        size = "-".join(map(str, self.grid)) if self.grid else str(self.side)
        return f"{self.experiment}_n{size}_p{self.resolved_p!r}_q{self.q}_seed{self.seed}"


def _format(v, typ) -> str:
    if typ is tuple:
        return ",".join(str(x) for x in v)
    if typ is float:
        return repr(float(v))
    return str(v)


def _convert(sec: str, key: str, raw: str, typ):
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        if typ is tuple:
            return tuple(int(x) for x in raw.replace(" ", "").split(",") if x)
        return raw.strip()
    except ValueError:
        kind = {int: "an integer", float: "a number", tuple: "a comma-separated list of integers"}[typ]
        raise ConfigError(f"[{sec}] {key}: expected {kind}, got {raw!r}") from None


_BY_KEY = {(sec, key): (name, typ) for name, (sec, key, typ) in _LAYOUT.items()}


def parse_config(text: str, overrides: dict | None = None, env: dict | None = None,
                 registered=None) -> ExperimentConfig:
    """Parse INI text, then apply environment (seed, output dir) and explicit overrides.

    ``overrides`` maps field names (or ``"section.key"``) to raw strings or values.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    values: dict = {}
    tolerances: dict = {}
    for sec in cp.sections():
        for key, raw in cp.items(sec):
            if sec == "tolerances":
                tolerances[key] = _convert(sec, key, raw, float)
                continue
            if (sec, key) not in _BY_KEY:
                raise ConfigError(f"[{sec}] {key}: unknown key")
            name, typ = _BY_KEY[(sec, key)]
            values[name] = _convert(sec, key, raw, typ)
    env = os.environ if env is None else env
    if env.get(ENV_SEED):
        values["seed"] = _convert("experiment", "seed", env[ENV_SEED], int)
    if env.get(ENV_OUTPUT_DIR):
        values["output_dir"] = env[ENV_OUTPUT_DIR]
    for k, v in (overrides or {}).items():
        if "." in k:
            sec, key = k.split(".", 1)
            if sec == "tolerances":
                tolerances[key] = _convert(sec, key, str(v), float)
                continue
            if (sec, key) not in _BY_KEY:
                raise ConfigError(f"[{sec}] {key}: unknown key")
            name, typ = _BY_KEY[(sec, key)]
        else:
            if k not in _LAYOUT:
                raise ConfigError(f"{k}: unknown key")
            name, typ = k, _LAYOUT[k][2]
        values[name] = _convert(*_LAYOUT[name][:2], v, typ) if isinstance(v, str) else v
    if "experiment" not in values:
        raise ConfigError("[experiment] name: missing")
    return ExperimentConfig(**values, tolerances=tolerances).validate(registered)


def load_config(path: str | Path, overrides: dict | None = None, env: dict | None = None,
                registered=None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, overrides, env, registered)


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **kw).validate()


FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))
