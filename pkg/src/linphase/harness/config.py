"""Experiment configuration: a JSON document mapped onto dataclasses.

Schema (all keys optional except ``kind``)::

    {
      "kind": "gauss-sweep" | "antenna" | "solve",
      "seed": 2020,                  # master seed
      "trials": 500,                 # per sweep point; antenna: realisations (default 10)
      "methods": ["linear-pc", ...],
      "workers": 1,                  # process count; LINPHASE_WORKERS overrides
      "gauss":   {"n": 20, "m1": 20, "m2": [1, 2, ..., 30]},
      "antenna": {<AntennaParams fields>},
      "solver":  {"max_iterations": 2000, "memory": 10, "gradient_tolerance": 1e-12,
                  "sufficient_decrease": 1e-4, "curvature": 0.9},
      "out": "results/"              # used when the CLI gets no --out
    }

Unknown keys are rejected so that typos do not silently fall back to
defaults.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..scenario import AntennaParams
from ..solvers import NonconvexSettings

KINDS = ("gauss-sweep", "antenna", "solve")
METHODS = (
    "linear-pc",
    "linear-pc-refined",
    "nonconvex-augmented",
    "nonconvex-incoherent",
    "coherent",
)
DEFAULT_METHODS = {
    "gauss-sweep": ["linear-pc", "nonconvex-augmented", "nonconvex-incoherent"],
    "antenna": list(METHODS),
    "solve": ["linear-pc"],
}
DEFAULT_TRIALS = {"gauss-sweep": 500, "antenna": 10, "solve": 1}
WORKERS_ENV = "LINPHASE_WORKERS"


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class GaussParams:
    n: int = 20
    m1: int = 20
    m2: list = field(default_factory=lambda: list(range(1, 31)))


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 2020
    trials: int | None = None
    methods: list | None = None
    workers: int = 1
    gauss: GaussParams = field(default_factory=GaussParams)
    antenna: AntennaParams = field(default_factory=AntennaParams)
    solver: NonconvexSettings = field(default_factory=NonconvexSettings)
    out: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.trials is None:
            self.trials = DEFAULT_TRIALS[self.kind]
        if self.methods is None:
            self.methods = list(DEFAULT_METHODS[self.kind])
        self.validate()

    def validate(self) -> None:
        if not _is_int(self.seed) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if not _is_int(self.trials) or self.trials < 1:
            raise ConfigError(f"trials must be an integer >= 1, got {self.trials!r}")
        if not _is_int(self.workers) or self.workers < 1:
            raise ConfigError("workers must be an integer >= 1")
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods contain duplicates")
        g = self.gauss
        if not (_is_int(g.n) and g.n >= 1 and _is_int(g.m1) and g.m1 >= 0):
            raise ConfigError("gauss.n must be >= 1 and gauss.m1 >= 0")
        if not g.m2 or not all(_is_int(v) and v > 0 for v in g.m2):
            raise ConfigError("gauss.m2 must be a nonempty list of positive integers")
        if len(set(g.m2)) != len(g.m2):
            raise ConfigError("gauss.m2 contains duplicates")
        try:
            self.antenna.validate()
        except ValueError as exc:
            raise ConfigError(f"antenna: {exc}") from exc
        if math.isnan(self.antenna.snr_db) or self.antenna.snr_db == -math.inf:
            raise ConfigError("antenna.snr_db must be a number or +inf")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a JSON object")
        doc = dict(doc)
        if "kind" not in doc:
            raise ConfigError("missing required key 'kind'")
        sections = {"gauss": GaussParams, "antenna": AntennaParams, "solver": NonconvexSettings}
        kwargs = {}
        for key, typ in sections.items():
            if key in doc:
                kwargs[key] = _section(typ, doc.pop(key), key)
        _reject_unknown(cls, doc, "top level")
        try:
            return cls(**doc, **kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def effective_workers(self) -> int:
        """Worker count, overridden by the environment variable if set."""
        env = os.environ.get(WORKERS_ENV)
        if env is None or env == "":
            return self.workers
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        if value < 1:
            raise ConfigError(f"{WORKERS_ENV} must be >= 1")
        return value


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _reject_unknown(typ, doc: dict, where: str) -> None:
    names = {f.name for f in dataclasses.fields(typ)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise ConfigError(f"unknown keys at {where}: {unknown}")


def _section(typ, doc, name: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"section {name!r} must be an object")
    _reject_unknown(typ, doc, name)
    if typ is AntennaParams and "snr_db" in doc:
        doc = dict(doc, snr_db=_parse_snr(doc["snr_db"]))
    try:
        return typ(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def _parse_snr(value) -> float:
    # JSON has no infinity literal; accept the string "inf" for noiseless runs
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        raise ConfigError(f"antenna.snr_db: expected a number or 'inf', got {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"antenna.snr_db: expected a number, got {value!r}")
    return float(value)


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return ExperimentConfig.from_dict(doc)
