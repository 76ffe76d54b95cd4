"""Experiment configuration: a JSON document with a frozen schema version."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

SCHEMA_VERSION = 1


@dataclass
class EnsembleSpec:
    n: int = 200
    w: int = 20
    law: str = "gaussian"
    shape: str = "uniform"
    symmetry: str = "symmetric"
    eps_m: float = 0.1
    c: float = 0.1
    A: Optional[float] = None


@dataclass
class FlowSpec:
    t: float = 0.2
    dt: float = 0.01
    paths: int = 10000


@dataclass
class EmfSpec:
    sites: int = 4
    d: int = 2
    cls: str = "symmetric"
    cutoff: Optional[int] = None


@dataclass
class StatsSpec:
    kappa: float = 0.1
    tau: float = 0.3
    samples: int = 10
    windows: list = field(default_factory=list)


@dataclass
class ExperimentConfig:
    command: str
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    flow: FlowSpec = field(default_factory=FlowSpec)
    emf: EmfSpec = field(default_factory=EmfSpec)
    stats: StatsSpec = field(default_factory=StatsSpec)
    seed: int = 0
    seed_scheme: str = "blake2b-chain"
    out: str = "results"
    options: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported config schema version {version} (expected {SCHEMA_VERSION})")
        parts = {"ensemble": EnsembleSpec, "flow": FlowSpec, "emf": EmfSpec, "stats": StatsSpec}
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key, kind in parts.items():
            if key in data and isinstance(data[key], dict):
                data[key] = kind(**data[key])
        return cls(**data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.loads(Path(path).read_text())
