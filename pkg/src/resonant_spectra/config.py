"""Run configuration: one YAML/JSON file, every default spelled out here.

Example::

    model:
      field: [1, 2, 1]          # (b2, b1, b0); or a_coeffs/p4/lam/V2
    h_list: [0.04, 0.02]
    eps: {c: 1.0, gamma: 1.5}   # eps = c h^gamma, gamma > 1
    n_max: {E_max: 1.0, margin: 0.25}
    F0_list: [0.2]
    C: 10.0
    offsets: fit                # or {mu1: -1, mu2: 0.5}
    cluster_band: 0.1           # clusters with |E_k - E0| <= band are compared
    output: out
    seed: 0
    workers: 1
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .magnetic import MagneticModel, default_model


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    field: tuple | None = (1, 2, 1)
    a_coeffs: tuple | None = None
    p4: tuple = (0, 0, 0, 0, 0)
    lam: tuple | None = None
    V2: tuple | None = None

    def build(self) -> MagneticModel:
        if self.a_coeffs is not None:
            return MagneticModel(a_coeffs=self.a_coeffs, p4_coeffs=self.p4, lam=self.lam,
                                 V2=self.V2)
        if self.field is None:
            return default_model()
        base = MagneticModel.from_field(*self.field, lam=self.lam or (1, 1))
        return MagneticModel(a_coeffs=base.a_coeffs, p4_coeffs=self.p4, lam=base.lam,
                             V2=self.V2)


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec = field(default_factory=ModelSpec)
    h_list: tuple = (0.04, 0.02)
    eps_c: float = 1.0
    eps_gamma: float = 1.5
    E_max: float = 1.0
    margin: float = 0.25
    F0_list: tuple = (0.2,)
    C: float = 10.0
    offsets: object = "fit"
    cluster_band: float = 0.1
    E0: float = 1.0
    output: str = "out"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.eps_gamma > 1:
            raise ConfigError("eps gamma must exceed 1 so that eps << h")
        if self.eps_c <= 0:
            raise ConfigError("eps c must be positive")
        if not self.h_list or any(h <= 0 or h >= 1 for h in self.h_list):
            raise ConfigError("h values must lie in (0, 1)")
        if self.margin < 0:
            raise ConfigError("margin must be non-negative")
        if self.C <= 1:
            raise ConfigError("window constant C must exceed 1")
        if self.offsets != "fit" and not (isinstance(self.offsets, dict)
                                         and {"mu1", "mu2"} <= set(self.offsets)):
            raise ConfigError('offsets must be "fit" or a mapping with mu1 and mu2')
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def eps(self, h: float) -> float:
        return self.eps_c * h ** self.eps_gamma

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eps"] = {"c": d.pop("eps_c"), "gamma": d.pop("eps_gamma")}
        d["n_max"] = {"E_max": d.pop("E_max"), "margin": d.pop("margin")}
        return json.loads(json.dumps(d))


def _tuple(v):
    if isinstance(v, list):
        return tuple(_tuple(x) for x in v)
    return v


def config_from_dict(data: dict | None) -> RunConfig:
    data = dict(data or {})
    known = {"model", "h_list", "eps", "n_max", "F0_list", "C", "offsets", "cluster_band",
             "E0", "output", "seed", "workers"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    m = dict(data.pop("model", {}) or {})
    bad = set(m) - {"field", "a_coeffs", "p4", "lam", "V2"}
    if bad:
        raise ConfigError(f"unknown model keys: {sorted(bad)}")
    if "a_coeffs" in m and "field" not in m:
        m["field"] = None
    model = ModelSpec(**{k: _tuple(v) for k, v in m.items()})
    kw = {}
    eps = data.pop("eps", None)
    if eps is not None:
        kw["eps_c"] = float(eps.get("c", 1.0))
        kw["eps_gamma"] = float(eps.get("gamma", 1.5))
    nmax = data.pop("n_max", None)
    if nmax is not None:
        kw["E_max"] = float(nmax.get("E_max", 1.0))
        kw["margin"] = float(nmax.get("margin", 0.25))
    for key in ("h_list", "F0_list"):
        if key in data:
            kw[key] = tuple(float(x) for x in data.pop(key))
    kw.update(data)
    return RunConfig(model=model, **kw)


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return config_from_dict(data)
