"""Run configuration for the command line driver: one JSON file, every default written out."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .cones import SYSTOLE


class ConfigError(ValueError):
    pass


@dataclass
class SurfaceSection:
    genus: int = 2


@dataclass
class SurgerySection:
    q: int = 1
    epsilon: float = 0.05
    eta: float = 1.0
    strict_half_bound: bool = False
    plateau: float = 0.8
    mollifier: float = 0.2
    box_mass: float = 0.01
    n_samples: int = 1000
    grid: int = 200


@dataclass
class CensusSection:
    max_length: float = 12.0
    fit_range: list = field(default_factory=lambda: [8.0, 12.0])
    max_letters: int = 13
    farey_T: float = 1e4
    farey_T_min: float = 1e2
    critical_points: int = 4


@dataclass
class ConesSection:
    q_values: list = field(default_factory=lambda: [1, 2, 3])
    sweep_q: list = field(default_factory=lambda: [-3, -2, -1, 0, 1, 2, 3])
    sweep_epsilons: list = field(default_factory=lambda: [0.05, 0.5])
    epsilon: float = 0.05
    n_sequences: int = 100_000
    seq_length: int = 50
    t_min: float = SYSTOLE
    t_max: float = SYSTOLE + 5.0
    seed: int = 0
    shards: int = 10


@dataclass
class OutputSection:
    dir: str = "results"
    format: str = "json"


@dataclass
class RunConfig:
    surface: SurfaceSection = field(default_factory=SurfaceSection)
    surgery: SurgerySection = field(default_factory=SurgerySection)
    census: CensusSection = field(default_factory=CensusSection)
    cones: ConesSection = field(default_factory=ConesSection)
    output: OutputSection = field(default_factory=OutputSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_TYPES = {"int": int, "float": (int, float), "bool": bool, "str": str, "list": list}


def _check_type(path, value, annotation):
    kind = annotation if isinstance(annotation, str) else annotation.__name__
    want = _TYPES.get(kind)
    if want is None:
        return
    if isinstance(value, bool) and kind != "bool":
        raise ConfigError(f"{path}: expected {kind}, got bool")
    if not isinstance(value, want):
        raise ConfigError(f"{path}: expected {kind}, got {type(value).__name__}")


def _fill(obj, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(obj)}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in fields:
            raise ConfigError(f"{path}: unknown key")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            _fill(current, value, path)
        else:
            _check_type(path, value, fields[key].type)
            setattr(obj, key, float(value) if fields[key].type == "float" else value)


def validate(cfg: RunConfig) -> RunConfig:
    s, c, k, o = cfg.surgery, cfg.census, cfg.cones, cfg.output
    checks = [
        (cfg.surface.genus == 2, "surface.genus", "only genus 2 is built"),
        (s.eta > 0, "surgery.eta", "must be positive"),
        (0 < s.epsilon < s.eta / (2 * np.pi), "surgery.epsilon", f"must lie in (0, eta/2pi) = (0, {s.eta / (2 * np.pi):.6g})"),
        (0 < s.box_mass < 1, "surgery.box_mass", "must lie in (0, 1)"),
        (s.n_samples >= 1, "surgery.n_samples", "must be positive"),
        (s.grid >= 2, "surgery.grid", "must be at least 2"),
        (0 < c.max_length <= 14.0, "census.max_length", "must lie in (0, 14]"),
        (len(c.fit_range) == 2 and 0 < c.fit_range[0] < c.fit_range[1] <= c.max_length, "census.fit_range", "must be [lo, hi] inside (0, max_length]"),
        (1 <= c.max_letters <= 13, "census.max_letters", "must lie in [1, 13]"),
        (0 < c.farey_T_min < c.farey_T <= 1e5, "census.farey_T", "need 0 < farey_T_min < farey_T <= 1e5"),
        (c.critical_points >= 0, "census.critical_points", "must be nonnegative"),
        (all(isinstance(q, int) and q >= 0 for q in k.q_values), "cones.q_values", "certificates need integers q >= 0"),
        (all(isinstance(q, int) for q in k.sweep_q), "cones.sweep_q", "must be integers"),
        (all(e > 0 for e in k.sweep_epsilons), "cones.sweep_epsilons", "must be positive"),
        (k.epsilon > 0, "cones.epsilon", "must be positive"),
        (k.n_sequences >= 1 and k.seq_length >= 1, "cones.n_sequences", "sequence counts must be positive"),
        (0 < k.t_min < k.t_max, "cones.t_max", "need 0 < t_min < t_max"),
        (k.shards >= 1 and k.n_sequences % k.shards == 0, "cones.shards", "must divide n_sequences"),
        (o.format in ("csv", "json"), "output.format", "must be csv or json"),
    ]
    for ok, path, msg in checks:
        if not ok:
            raise ConfigError(f"{path}: {msg}")
    return cfg


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        _fill(cfg, data, "")
    if overrides:
        _fill(cfg, overrides, "")
    return validate(cfg)
