"""Run configuration: schema, scenario presets and layered parsing.

Configuration files are line oriented ``section.key = value`` pairs; ``#``
starts a comment. Resolution order is preset defaults, then the file, then
command-line overrides. Unknown keys, malformed values and constraint
violations are all reported together, each with its dotted key.
"""

from __future__ import annotations

import copy
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from .constants import COULOMB, PROTON_MASS
from .errors import ConfigurationError

SCENARIOS = (
    "gaussian_barrier",
    "abrupt_barrier",
    "free_packet",
    "hydrogen_1d",
    "kernel_report",
    "classical_limit",
    "custom",
)
POTENTIAL_KINDS = ("zero", "gaussian", "abrupt", "soft_coulomb", "tabulated")


@dataclass
class DomainConfig:
    length: float = 40.0
    nx: int = 400
    coherence_length: float = 0.0  # 0 means equal to length
    m_max: int = 60


@dataclass
class PotentialConfig:
    kind: str = "gaussian"
    height: float = 0.3
    sigma: float = 1.0
    center: float = 0.0
    width: float = 6.0
    coupling: float = COULOMB
    softening: float = 0.01
    file: str = ""


@dataclass
class PacketConfig:
    x0: float = -3.0
    sigma: float = 1.0
    k0: float = 1.5
    mass: float = 1.0


@dataclass
class HydrogenConfig:
    electron_sigma: float = 0.05
    proton_sigma: float = 0.002
    proton_mass: float = PROTON_MASS
    proton_length: float = 0.04
    proton_nx: int = 80


@dataclass
class RunSection:
    particles: int = 100_000
    dt: float = 0.05
    total_time: float = 10.0
    annihilation_period: int = 20
    snapshot_period: int = 40
    particle_cap: int = 50_000_000
    creation_bound: float = 0.1


@dataclass
class OutputConfig:
    dir: str = "run"
    figures: bool = True
    oracle: bool = False
    recon_nx: int = 0  # 0 means domain.nx
    recon_k_stride: int = 1


@dataclass
class ReportConfig:
    series_terms: tuple = (4, 8, 16, 32)
    series_eps: float = 0.05
    hbar_scales: tuple = (1.0, 0.3, 0.1, 0.03, 0.01)


@dataclass
class RunConfig:
    scenario: str = "custom"
    seed: int = 1
    workers: int = 1
    domain: DomainConfig = field(default_factory=DomainConfig)
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    packet: PacketConfig = field(default_factory=PacketConfig)
    hydrogen: HydrogenConfig = field(default_factory=HydrogenConfig)
    run: RunSection = field(default_factory=RunSection)
    output: OutputConfig = field(default_factory=OutputConfig)
    report: ReportConfig = field(default_factory=ReportConfig)

    @property
    def coherence_length(self) -> float:
        return self.domain.coherence_length or self.domain.length


PRESETS = {
    "custom": {},
    "free_packet": {"potential.kind": "zero"},
    "gaussian_barrier": {
        "potential.kind": "gaussian",
        "potential.height": 0.3,
        "domain.length": 40.0,
        "domain.nx": 400,
    },
    "abrupt_barrier": {
        "potential.kind": "abrupt",
        "potential.height": 0.1,
        "potential.width": 6.0,
        "domain.length": 40.0,
        "domain.nx": 400,
        "packet.x0": -7.0,
        "run.dt": 0.02,
        "run.total_time": 20.0,
        "run.snapshot_period": 100,
    },
    "hydrogen_1d": {
        "potential.kind": "soft_coulomb",
        "domain.length": 1.2,
        "domain.nx": 240,
        "domain.m_max": 200,
        "run.particles": 200_000,
        "run.dt": 5e-5,
        "run.total_time": 0.006,
        "run.annihilation_period": 5,
        "run.snapshot_period": 60,
        "output.recon_nx": 48,
        "output.recon_k_stride": 6,
    },
    "kernel_report": {
        "potential.kind": "gaussian",
        "potential.height": 0.3,
        "domain.length": 20.0,
        "domain.nx": 257,
        "domain.m_max": 128,
    },
    "classical_limit": {
        "potential.kind": "gaussian",
        "potential.height": 0.3,
        "domain.length": 20.0,
        "domain.nx": 257,
        "domain.coherence_length": math.pi,
        "domain.m_max": 32,
    },
}


def _sections(cfg):
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            for g in dataclasses.fields(value):
                yield f"{f.name}.{g.name}", value, g
        else:
            yield f.name, cfg, f


def schema() -> dict:
    """Mapping of every valid dotted key to its default value."""
    return {key: getattr(owner, f.name) for key, owner, f in _sections(RunConfig())}


def _coerce(key, raw, default):
    if isinstance(raw, str):
        text = raw.strip()
    else:
        text = raw
    try:
        if isinstance(default, bool):
            if isinstance(text, bool):
                return text
            low = str(text).lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError
        if isinstance(default, int):
            if isinstance(text, float) and not text.is_integer():
                raise ValueError
            value = float(text) if isinstance(text, str) and ("e" in text.lower() or "." in text) else text
            if isinstance(value, float):
                if not value.is_integer():
                    raise ValueError
                value = int(value)
            return int(value)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = text if isinstance(text, (list, tuple)) else [t for t in str(text).split(",") if t.strip()]
            cast = type(default[0]) if default else float
            return tuple(cast(float(t)) if cast is int else cast(t) for t in items)
        return str(text)
    except (TypeError, ValueError):
        kind = type(default).__name__
        raise ConfigurationError(f"{key}: expected {kind}, got {raw!r}") from None


def parse_lines(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into a dict of raw strings."""
    out = {}
    for number, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigurationError(f"{source}:{number}: expected 'key = value', got {line.strip()!r}")
        key, value = body.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def validate(cfg: RunConfig) -> list:
    """Constraint violations as ``key: message`` strings."""
    errs = []

    def need(cond, key, msg):
        if not cond:
            errs.append(f"{key}: {msg}")

    need(cfg.scenario in SCENARIOS, "scenario", f"must be one of {', '.join(SCENARIOS)}")
    need(cfg.workers >= 1, "workers", "must be at least 1")
    need(0 <= cfg.seed < 2**64, "seed", "must be a non-negative 64-bit integer")
    d = cfg.domain
    need(d.length > 0, "domain.length", "must be positive")
    need(d.nx >= 2, "domain.nx", "must be at least 2")
    need(d.coherence_length >= 0, "domain.coherence_length", "must be non-negative (0 selects domain.length)")
    need(d.m_max >= 1, "domain.m_max", "must be at least 1")
    p = cfg.potential
    need(p.kind in POTENTIAL_KINDS, "potential.kind", f"must be one of {', '.join(POTENTIAL_KINDS)}")
    if p.kind in ("gaussian", "abrupt"):
        need(p.height > 0, "potential.height", "must be positive")
    if p.kind == "gaussian":
        need(p.sigma > 0, "potential.sigma", "must be positive")
    if p.kind == "abrupt":
        need(p.width > 0, "potential.width", "must be positive")
    if p.kind == "soft_coulomb":
        need(p.softening > 0, "potential.softening", "must be positive")
        need(p.coupling > 0, "potential.coupling", "must be positive")
    if p.kind == "tabulated":
        need(bool(p.file) and Path(p.file).is_file(), "potential.file", "must name an existing two-column file")
    k = cfg.packet
    need(k.sigma > 0, "packet.sigma", "must be positive")
    need(k.mass > 0, "packet.mass", "must be positive")
    h = cfg.hydrogen
    for name in ("electron_sigma", "proton_sigma", "proton_mass", "proton_length"):
        need(getattr(h, name) > 0, f"hydrogen.{name}", "must be positive")
    need(h.proton_nx >= 2, "hydrogen.proton_nx", "must be at least 2")
    r = cfg.run
    need(r.particles >= 1, "run.particles", "must be positive")
    need(r.dt > 0, "run.dt", "dt must be positive")
    need(r.total_time >= 0, "run.total_time", "must be non-negative")
    need(r.annihilation_period >= 1, "run.annihilation_period", "must be at least 1")
    need(r.snapshot_period >= 1, "run.snapshot_period", "must be at least 1")
    need(r.particle_cap >= 1, "run.particle_cap", "must be positive")
    need(0 < r.creation_bound <= 1, "run.creation_bound", "must lie in (0, 1]")
    o = cfg.output
    need(bool(o.dir), "output.dir", "must not be empty")
    need(o.recon_nx >= 0, "output.recon_nx", "must be non-negative")
    need(o.recon_k_stride >= 1, "output.recon_k_stride", "must be at least 1")
    if o.recon_nx:
        need(d.nx % o.recon_nx == 0, "output.recon_nx", "must divide domain.nx")
    rep = cfg.report
    need(len(rep.series_terms) > 0 and all(t >= 1 for t in rep.series_terms), "report.series_terms", "must be positive integers")
    need(rep.series_eps > 0, "report.series_eps", "must be positive")
    need(len(rep.hbar_scales) > 0 and all(0 < s <= 1 for s in rep.hbar_scales), "report.hbar_scales", "must lie in (0, 1]")
    if cfg.scenario == "hydrogen_1d":
        need(p.kind == "soft_coulomb", "potential.kind", "hydrogen_1d needs soft_coulomb")
    elif cfg.scenario in ("kernel_report", "classical_limit"):
        need(p.kind == "gaussian", "potential.kind", f"{cfg.scenario} analyses the gaussian barrier")
    elif p.kind == "soft_coulomb":
        errs.append("potential.kind: soft_coulomb is only valid for hydrogen_1d")
    return errs


def build(preset: str = "custom", file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Resolve preset defaults, file values and overrides into a validated config."""
    if preset not in PRESETS:
        raise ConfigurationError(f"scenario: unknown preset {preset!r}; choose from {', '.join(SCENARIOS)}")
    cfg = RunConfig()
    table = {key: (owner, f) for key, owner, f in _sections(cfg)}
    defaults = schema()
    layers = [dict(PRESETS[preset], scenario=preset), file_values or {}, overrides or {}]
    errs = []
    for layer in layers:
        for key, raw in layer.items():
            if key not in table:
                errs.append(f"{key}: unknown key")
                continue
            owner, f = table[key]
            try:
                setattr(owner, f.name, _coerce(key, raw, defaults[key]))
            except ConfigurationError as exc:
                errs.append(str(exc))
    errs.extend(validate(cfg))
    if errs:
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(errs))
    return cfg


def parse_config(path=None, overrides=None, preset=None) -> RunConfig:
    """Build a config from an optional file and ``KEY=VALUE`` overrides.

    The preset comes from ``preset``, else the file's ``scenario`` key, else
    the overrides' ``scenario`` key, else ``custom``.
    """
    file_values = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigurationError(f"--config: no such file {str(path)!r}")
        file_values = parse_lines(p.read_text(), str(path))
    overrides = dict(overrides or {})
    name = preset or file_values.get("scenario") or overrides.get("scenario") or "custom"
    return build(name, file_values, overrides)


def to_lines(cfg: RunConfig) -> str:
    """Resolved configuration as sorted ``key = value`` lines, re-parseable."""
    out = []
    for key, owner, f in sorted(_sections(cfg), key=lambda t: t[0]):
        value = getattr(owner, f.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, tuple):
            text = ",".join(repr(v) for v in value)
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        out.append(f"{key} = {text}")
    return "\n".join(out) + "\n"


def copy_config(cfg: RunConfig) -> RunConfig:
    return copy.deepcopy(cfg)
