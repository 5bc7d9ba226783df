"""Run configuration: flat ``section.key = value`` text files.

Example::

    # comments start with '#'
    noise.alpha = 1.5
    noise.sigma1 = 0.25
    solver.n_v = 139
    sweep.alphas = 0.5, 1.0, 1.5

Missing keys take the compiled-in defaults, so an empty file is a valid
configuration. ``emit`` writes every key, and parsing the emitted text gives
back an identical :class:`RunConfig`.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError
from .metrics import SweepSpec, ThresholdSpec
from .model import MLParams, MorrisLecarDrift, ZeroDrift
from .montecarlo import SimConfig
from .noise import NoiseSpec
from .solver import S_STAR, Region, SolverConfig, TargetStrip

OUTPUT_ENV = "LEVYESCAPE_OUTPUT"
DEFAULT_OUTPUT = "levyescape-out"


@dataclass(frozen=True)
class RunSection:
    """Start point, drift choice and output location."""

    point_v: float = S_STAR[0]
    point_w: float = S_STAR[1]
    drift: str = "ml"
    output: str = ""
    plot: bool = True

    def __post_init__(self):
        if self.drift not in ("ml", "zero"):
            raise ConfigError("run.drift must be 'ml' or 'zero'")


@dataclass(frozen=True)
class SweepSection:
    alphas: tuple = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75)
    sigmas: tuple = (0.5,)
    mode: str = "diagonal"
    fixed: float | None = None
    quantities: tuple = ("fep", "mfet")
    dense: bool = False
    workers: int = 1
    cache: str = ""

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("sweep.workers must be >= 1")


SECTIONS = {
    "model": MLParams,
    "noise": NoiseSpec,
    "region": Region,
    "target": TargetStrip,
    "solver": SolverConfig,
    "mc": SimConfig,
    "sweep": SweepSection,
    "metrics": ThresholdSpec,
    "run": RunSection,
}


@dataclass(frozen=True)
class RunConfig:
    model: MLParams = field(default_factory=MLParams)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    region: Region = field(default_factory=Region)
    target: TargetStrip = field(default_factory=TargetStrip)
    solver: SolverConfig = field(default_factory=SolverConfig)
    mc: SimConfig = field(default_factory=SimConfig)
    sweep: SweepSection = field(default_factory=SweepSection)
    metrics: ThresholdSpec = field(default_factory=ThresholdSpec)
    run: RunSection = field(default_factory=RunSection)

    @property
    def point(self):
        return (self.run.point_v, self.run.point_w)

    @property
    def seed(self):
        return self.mc.seed

    def drift(self):
        return MorrisLecarDrift(self.model) if self.run.drift == "ml" else ZeroDrift()

    def output_root(self):
        return self.run.output or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT

    def sweep_spec(self):
        from .metrics import dense_alphas
        s = self.sweep
        alphas = dense_alphas() if s.dense else s.alphas
        return SweepSpec(tuple(alphas), tuple(s.sigmas), s.mode, s.fixed, self.point,
                         tuple(s.quantities))


def _parse_value(key, typ, text):
    text = text.strip()
    optional = "None" in typ
    if optional and text.lower() in ("none", ""):
        return None
    base = typ.replace("| None", "").strip()
    try:
        if base == "float":
            return float(text)
        if base == "int":
            return int(text)
        if base == "bool":
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if base == "tuple":
            items = [t.strip() for t in text.split(",") if t.strip()]
            out = []
            for t in items:
                try:
                    out.append(float(t))
                except ValueError:
                    out.append(t)
            return tuple(out)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as {base}") from None


def _format_value(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def _read_pairs(text, origin):
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'section.key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        pairs[key] = value
    return pairs


def _build(pairs):
    grouped = {name: {} for name in SECTIONS}
    for key, value in pairs.items():
        section, _, name = key.partition(".")
        if section not in SECTIONS or not name:
            raise ConfigError(f"{key}: unknown key")
        types = {f.name: f.type for f in fields(SECTIONS[section])}
        if name not in types:
            raise ConfigError(f"{key}: unknown key")
        grouped[section][name] = _parse_value(key, str(types[name]), value)
    built = {}
    for section, cls in SECTIONS.items():
        try:
            built[section] = cls(**grouped[section])
        except ConfigError as exc:
            msg = str(exc)
            names = [f.name for f in fields(cls)]
            if msg.split(" ")[0] in names:
                raise ConfigError(f"{section}.{msg}") from None
            if msg.startswith(section + "."):
                raise
            raise ConfigError(f"{section}: {msg}") from None
    return RunConfig(**built)


def parse_config(path=None, overrides=None):
    """Read ``path`` (optional) and apply ``overrides`` (``{"noise.alpha": "1.5"}``
    or ``["noise.alpha=1.5"]``), later values winning."""
    pairs = {}
    if path:
        try:
            with open(path) as fh:
                pairs.update(_read_pairs(fh.read(), path))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    if overrides:
        if isinstance(overrides, dict):
            pairs.update({k: str(v) for k, v in overrides.items()})
        else:
            pairs.update(_read_pairs("\n".join(overrides), "flags"))
    return _build(pairs)


def parse_text(text):
    return _build(_read_pairs(text, "<text>"))


def emit(cfg: RunConfig):
    lines = []
    for section in SECTIONS:
        obj = getattr(cfg, section)
        for f in fields(obj):
            lines.append(f"{section}.{f.name} = {_format_value(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def with_overrides(cfg: RunConfig, **sections):
    """Copy of ``cfg`` with whole sections or section fields replaced.

    ``with_overrides(cfg, noise={"alpha": 1.5})``.
    """
    out = cfg
    for section, changes in sections.items():
        out = replace(out, **{section: replace(getattr(out, section), **changes)})
    return out
