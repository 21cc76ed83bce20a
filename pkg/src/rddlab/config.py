"""Experiment configuration: JSON documents plus CLI overrides.

A fully resolved configuration determines every number in the outputs;
the manifest echoes it back so results are recomputable from the
manifest alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import DiagonalAnomaly, WhiteAnomaly
from .errors import ConfigError
from .profiles import ProfileSpec, make_profile
from .solver import ConstraintKind, SolverConfig

EXPERIMENTS = ("pareto-z", "pareto-j", "detect-sim", "rcs", "jpeg", "profile-report")

_DEFAULT_PROFILE = {"kind": "exponential-decay", "n": 32, "decay": 0.15}
_DEFAULT_DELTAS = [2.0, 6.0, 10.0, 14.0]


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    profile: dict = field(default_factory=lambda: dict(_DEFAULT_PROFILE))
    anomaly: dict | None = None
    delta_grid: list = field(default_factory=lambda: list(_DEFAULT_DELTAS))
    omega_grid: object = field(default_factory=lambda: {"kind": "auto", "count": 20, "max_fraction": 0.9})
    solver: dict = field(default_factory=dict)
    n_samples: int = 10_000
    constraint: str = "z"           # detect-sim / profile-report
    # rcs
    m_counts: list | None = None
    selection_cap: int = 10_000
    epsilon: float | None = None
    # jpeg
    dataset: dict = field(default_factory=lambda: {
        "kind": "synthetic", "train": 3000, "test": 800, "size": 28, "noise_std": 0.05,
    })
    alpha: float = 1.0
    eta: float = 0.5
    calibration: str = "empirical"
    n_scored_blocks: int = 10_000
    dump_symbols: bool = False
    q_min: float = 1e-6
    # profile-report
    delta: float = 10.0

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.seed is None:
            raise ConfigError("seed is mandatory")
        self.seed = int(self.seed)
        if self.experiment == "pareto-j":
            self.constraint = "j"
        elif self.experiment == "pareto-z":
            self.constraint = "z"
        if self.anomaly is None:
            # the aware constraint needs a concrete diagonal anomaly
            self.anomaly = ({"kind": "identity"} if self.constraint == "j"
                            else {"kind": "white", "alpha": 1.0})
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if self.constraint not in ("z", "j"):
            raise ConfigError("constraint must be 'z' or 'j'")
        if not isinstance(self.omega_grid, (list, dict)):
            raise ConfigError("omega_grid must be a list or an auto spec")
        if isinstance(self.omega_grid, list) and not self.omega_grid:
            raise ConfigError("omega grid must be non-empty")
        if isinstance(self.delta_grid, list) and not self.delta_grid:
            raise ConfigError("delta grid must be non-empty")

    # -- resolution helpers ------------------------------------------------

    def profile_values(self) -> np.ndarray:
        return make_profile(ProfileSpec.from_dict(self.profile))

    def anomaly_model(self, n: int):
        doc = self.anomaly
        kind = doc.get("kind")
        if kind == "white":
            return WhiteAnomaly(float(doc.get("alpha", 1.0)))
        if kind == "identity":
            return DiagonalAnomaly(np.ones(n))
        if kind == "diagonal":
            values = np.asarray(doc["values"], dtype=float)
            if values.size != n:
                raise ConfigError(f"diagonal anomaly has {values.size} entries, profile has {n}")
            return DiagonalAnomaly(values)
        raise ConfigError(f"unknown anomaly kind {kind!r}")

    def constraint_kind(self) -> ConstraintKind:
        return ConstraintKind.AGNOSTIC_Z if self.constraint == "z" else ConstraintKind.AWARE_J

    def solver_config(self) -> SolverConfig:
        doc = dict(self.solver)
        doc.setdefault("seed", self.seed)
        return SolverConfig.from_json(doc)

    @classmethod
    def load(cls, experiment: str, config_path=None, overrides: dict | None = None) -> "ExperimentConfig":
        """Merge (defaults, config file, CLI overrides), in that order."""
        doc = {}
        if config_path is not None:
            try:
                doc = json.loads(Path(config_path).read_text())
            except FileNotFoundError as exc:
                raise ConfigError(f"config file not found: {config_path}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}") from exc
            if not isinstance(doc, dict):
                raise ConfigError("config document must be a JSON object")
        doc.setdefault("experiment", experiment)
        if doc["experiment"] != experiment:
            raise ConfigError(
                f"config file is for {doc['experiment']!r} but the {experiment!r} subcommand was invoked"
            )
        doc.setdefault("seed", 0)
        for key, value in (overrides or {}).items():
            if value is not None:
                doc[key] = value
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def to_manifest_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            out[name] = value
        return out
