"""Canonical variance profiles for the desk experiments.

Experiments run on generated profile families rather than hard-coded
tables; the exponential-decay family with trace normalized to n is the
default. Explicit profiles are validated against the canonical
invariants (non-increasing, trace n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ProfileSpec:
    kind: str  # "exponential-decay" | "uniform" | "explicit"
    n: int = 0
    decay: float = 0.0
    values: tuple = ()
    normalize: bool = True

    @classmethod
    def from_dict(cls, doc: dict) -> "ProfileSpec":
        if not isinstance(doc, dict) or "kind" not in doc:
            raise ConfigError("profile must be an object with a 'kind'")
        kind = doc["kind"]
        if kind == "exponential-decay":
            return cls(kind=kind, n=int(doc["n"]), decay=float(doc["decay"]))
        if kind == "uniform":
            return cls(kind=kind, n=int(doc["n"]))
        if kind == "explicit":
            return cls(kind=kind, values=tuple(float(v) for v in doc["values"]),
                       normalize=bool(doc.get("normalize", True)))
        raise ConfigError(f"unknown profile kind {kind!r}")


def make_profile(spec: ProfileSpec) -> np.ndarray:
    """Generate the variance vector for a profile spec (trace = n)."""
    if spec.kind == "uniform":
        if spec.n < 1:
            raise ConfigError("profile n must be >= 1")
        return np.ones(spec.n)
    if spec.kind == "exponential-decay":
        if spec.n < 1:
            raise ConfigError("profile n must be >= 1")
        if not (spec.decay > 0):
            raise ConfigError("decay must be > 0")
        lam = np.exp(-spec.decay * np.arange(spec.n))
        return lam * (spec.n / lam.sum())
    if spec.kind == "explicit":
        lam = np.asarray(spec.values, dtype=float)
        if lam.size < 1 or np.any(lam < 0):
            raise ConfigError("explicit profile must be non-empty and non-negative")
        if np.any(np.diff(lam) > 0):
            raise ConfigError("explicit profile must be non-increasing")
        if spec.normalize:
            if lam.sum() <= 0:
                raise ConfigError("explicit profile must have positive trace")
            lam = lam * (lam.size / lam.sum())
        return lam
    raise ConfigError(f"unknown profile kind {spec.kind!r}")
