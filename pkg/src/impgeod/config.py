"""Run configuration: parsing, validation and serialization.

A config is a YAML (or JSON) mapping with the sections below; every section
except ``seed`` is optional.

.. code-block:: yaml

    background:    {lambda: 3.0}
    profile:       {name: quadratic, params: [1.0, -1.0, 0.5]}
    mollifier:     {name: bump, params: []}
    mollifier_alt: {name: polynomial, params: [4]}   # or null
    seed:          {V0: 0, Z0: [1, 0, 0], U0dot: 1, V0dot: 0, Z0dot: [0, 1, 0], e: 1}
    integration:   {rel_tol: 1.0e-12, abs_tol: 1.0e-14, max_step_in_zone: 0.05,
                    zone_margin: 1.0, project_onto_hyperboloid: false,
                    max_crossings: 8, max_steps: 200000}
    ladder:        {eps0: 0.01, ratio: 0.5, count: 5}
    run:           {eps: 0.001, t_span: [-1.0, 7.0]}
    certificate:   {C1: 1.0}
    outputs:       {dir: out, sample_dt: 0.01}
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .core import BackgroundParams, SeedData, make_background
from .errors import ConfigError
from .integrator import IntegrationConfig
from .profiles import make_mollifier, profile_catalog


@dataclass(frozen=True)
class NamedSpec:
    name: str
    params: tuple = ()


@dataclass(frozen=True)
class LadderSpec:
    eps0: float = 1e-2
    ratio: float = 0.5
    count: int = 5

    def values(self) -> np.ndarray:
        if self.count < 1:
            raise ConfigError("ladder.count must be at least 1")
        if not (self.eps0 > 0 and 0 < self.ratio < 1):
            raise ConfigError("ladder needs eps0 > 0 and 0 < ratio < 1")
        return self.eps0 * self.ratio ** np.arange(self.count)


@dataclass(frozen=True)
class RunSpec:
    eps: float = 1e-3
    t_span: tuple = (-1.0, 7.0)


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    sample_dt: float = 0.01


@dataclass(frozen=True)
class RunConfig:
    lam: float
    seed: SeedData
    profile: NamedSpec = NamedSpec("zero")
    mollifier: NamedSpec = NamedSpec("bump")
    mollifier_alt: NamedSpec | None = None
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    ladder: LadderSpec = LadderSpec()
    run: RunSpec = RunSpec()
    C1: float = 1.0
    outputs: OutputSpec = OutputSpec()

    # catalog objects
    def background(self) -> BackgroundParams:
        return make_background(self.lam)

    def make_profile(self):
        return profile_catalog(self.profile.name, self.profile.params)

    def make_mollifier(self):
        return make_mollifier(self.mollifier.name, self.mollifier.params)

    def make_mollifier_alt(self):
        if self.mollifier_alt is None:
            return None
        return make_mollifier(self.mollifier_alt.name, self.mollifier_alt.params)

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "background": {"lambda": self.lam},
            "profile": {"name": self.profile.name, "params": list(self.profile.params)},
            "mollifier": {"name": self.mollifier.name, "params": list(self.mollifier.params)},
            "mollifier_alt": (None if self.mollifier_alt is None else
                              {"name": self.mollifier_alt.name,
                               "params": list(self.mollifier_alt.params)}),
            "seed": self.seed.to_dict(),
            "integration": dataclasses.asdict(self.integration),
            "ladder": dataclasses.asdict(self.ladder),
            "run": {"eps": self.run.eps, "t_span": list(self.run.t_span)},
            "certificate": {"C1": self.C1},
            "outputs": dataclasses.asdict(self.outputs),
        }


SECTIONS = {"background", "profile", "mollifier", "mollifier_alt", "seed", "integration",
            "ladder", "run", "certificate", "outputs"}


def _section(raw: dict, name: str, allowed: set, required: set = frozenset()) -> dict:
    sec = raw.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    missing = required - set(sec)
    if missing:
        raise ConfigError(f"missing keys in {name!r}: {sorted(missing)}")
    return sec


def _float(x, what) -> float:
    try:
        v = float(x)
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be a number, got {x!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{what} must be finite")
    return v


def _named(raw, name, default):
    if name not in raw:
        return default
    if raw[name] is None:
        return None
    sec = _section(raw, name, {"name", "params"}, {"name"})
    params = sec.get("params") or []
    if not isinstance(params, (list, tuple)):
        raise ConfigError(f"{name}.params must be a list")
    return NamedSpec(str(sec["name"]), tuple(_float(p, f"{name}.params") for p in params))


def config_from_dict(raw: dict) -> RunConfig:
    """Build and validate a RunConfig; every catalog name is resolved eagerly."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    if "seed" not in raw:
        raise ConfigError("config needs a 'seed' section")
    bg = _section(raw, "background", {"lambda"})
    lam = _float(bg.get("lambda", 3.0), "background.lambda")
    s = _section(raw, "seed", {"V0", "Z0", "U0dot", "V0dot", "Z0dot", "e"},
                 {"V0", "Z0", "U0dot", "V0dot", "Z0dot", "e"})
    try:
        z0 = [_float(v, "seed.Z0") for v in s["Z0"]]
        zd0 = [_float(v, "seed.Z0dot") for v in s["Z0dot"]]
    except TypeError:
        raise ConfigError("seed.Z0 and seed.Z0dot must be lists of 3 numbers") from None
    if len(z0) != 3 or len(zd0) != 3:
        raise ConfigError("seed.Z0 and seed.Z0dot must have 3 components")
    if s["e"] not in (-1, 0, 1):
        raise ConfigError("seed.e must be -1, 0 or 1")
    seed = SeedData(_float(s["V0"], "seed.V0"), z0, _float(s["U0dot"], "seed.U0dot"),
                    _float(s["V0dot"], "seed.V0dot"), zd0, int(s["e"]))
    integ_fields = {f.name for f in dataclasses.fields(IntegrationConfig)}
    integ = _section(raw, "integration", integ_fields)
    try:
        integration = IntegrationConfig(**integ)
    except TypeError as exc:
        raise ConfigError(f"bad integration section: {exc}") from None
    lad = _section(raw, "ladder", {"eps0", "ratio", "count"})
    ladder = LadderSpec(_float(lad.get("eps0", 1e-2), "ladder.eps0"),
                        _float(lad.get("ratio", 0.5), "ladder.ratio"), int(lad.get("count", 5)))
    ladder.values()
    run = _section(raw, "run", {"eps", "t_span"})
    t_span = tuple(_float(v, "run.t_span") for v in run.get("t_span", (-1.0, 7.0)))
    if len(t_span) != 2 or not t_span[0] < t_span[1]:
        raise ConfigError("run.t_span must be an increasing pair")
    run_spec = RunSpec(_float(run.get("eps", 1e-3), "run.eps"), t_span)
    if not run_spec.eps > 0:
        raise ConfigError("run.eps must be positive")
    cert = _section(raw, "certificate", {"C1"})
    C1 = _float(cert.get("C1", 1.0), "certificate.C1")
    if not C1 > 0:
        raise ConfigError("certificate.C1 must be positive")
    out = _section(raw, "outputs", {"dir", "sample_dt"})
    outputs = OutputSpec(str(out.get("dir", "out")), _float(out.get("sample_dt", 0.01), "outputs.sample_dt"))
    if not outputs.sample_dt > 0:
        raise ConfigError("outputs.sample_dt must be positive")
    cfg = RunConfig(lam, seed, _named(raw, "profile", NamedSpec("zero")),
                    _named(raw, "mollifier", NamedSpec("bump")),
                    _named(raw, "mollifier_alt", None), integration, ladder, run_spec, C1, outputs)
    cfg.background()
    cfg.make_profile()
    cfg.make_mollifier()
    cfg.make_mollifier_alt()
    return cfg


def parse_config_text(text: str) -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML/JSON: {exc}") from None
    return config_from_dict(raw)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if path.suffix == ".json":
        try:
            return config_from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config_text(text)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
