"""Closed-form quantities of the Gaussian encoding framework.

A normal source is a zero-mean diagonal Gaussian with per-component
variances ``lam_ok``. An encoder is parameterized by normalized degrees of
freedom ``xi`` in [0, 1]^n: component j is reconstructed with error
variance ``theta_j = lam_ok_j * (1 - xi_j)``, so ``xi_j = 1`` keeps the
component losslessly and ``xi_j = 0`` erases it.

All functions here are pure and side-effect free; every logarithm is
natural internally and converted to bits at the API boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError

LN2 = math.log(2.0)

__all__ = [
    "LN2",
    "WhiteAnomaly",
    "DiagonalAnomaly",
    "as_spectrum",
    "validate_xis",
    "ratio_vector",
    "distortion",
    "rate",
    "dist_z",
    "dist_j",
    "compressed_variances",
]


def as_spectrum(values) -> np.ndarray:
    """Validate and return a variance vector (length >= 1, entries >= 0)."""
    lam = np.asarray(values, dtype=float)
    if lam.ndim != 1 or lam.size < 1:
        raise DimensionError(f"spectrum must be a 1-D vector, got shape {lam.shape}")
    if not np.all(np.isfinite(lam)):
        raise DomainError("spectrum entries must be finite")
    if np.any(lam < 0):
        raise DomainError("spectrum entries must be >= 0")
    return lam


@dataclass(frozen=True)
class WhiteAnomaly:
    """Anomalous source with covariance alpha * I (energy scale alpha > 0)."""

    alpha: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DomainError(f"white anomaly energy must be positive, got {self.alpha}")

    def variances(self, n: int) -> np.ndarray:
        return np.full(n, float(self.alpha))


@dataclass(frozen=True)
class DiagonalAnomaly:
    """Anomalous source with an explicit diagonal covariance."""

    lambdas: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lambdas", as_spectrum(self.lambdas))

    def variances(self, n: int) -> np.ndarray:
        if self.lambdas.size != n:
            raise DimensionError(
                f"anomaly spectrum has length {self.lambdas.size}, expected {n}"
            )
        return self.lambdas


def _check_lengths(lam_ok: np.ndarray, other: np.ndarray, what: str):
    if lam_ok.shape != other.shape:
        raise DimensionError(
            f"{what} has shape {other.shape}, spectrum has shape {lam_ok.shape}"
        )


def validate_xis(lam_ok, xis) -> tuple[np.ndarray, np.ndarray]:
    """Check encoder parameters against a spectrum.

    Returns (lam_ok, xis) as float arrays. Components with zero variance
    must carry xi = 0 (they hold no information and the encoding model
    degenerates there).
    """
    lam = as_spectrum(lam_ok)
    xi = np.asarray(xis, dtype=float)
    _check_lengths(lam, xi, "encoder parameter vector")
    if np.any(xi < 0) or np.any(xi > 1):
        raise DomainError("encoder parameters must lie in [0, 1]")
    if np.any((lam == 0) & (xi != 0)):
        raise DomainError("zero-variance components must have xi = 0")
    return lam, xi


def ratio_vector(lam_ok, anomaly) -> np.ndarray:
    """Per-component contrast r_j = 1 - lam_ko_j / lam_ok_j.

    Zero-variance components of the normal source have no defined ratio;
    they are reported as 0 (their encoder parameter is pinned to 0, so
    they never contribute to any distinguishability sum).
    """
    lam = as_spectrum(lam_ok)
    lam_ko = anomaly.variances(lam.size)
    r = np.zeros_like(lam)
    support = lam > 0
    r[support] = 1.0 - lam_ko[support] / lam[support]
    return r


def distortion(lam_ok, xis) -> float:
    """Expected squared reconstruction error sum_j lam_j * (1 - xi_j).

    Valid for spectra of any trace (reduces to trace - sum lam*xi when the
    trace equals n).
    """
    lam, xi = validate_xis(lam_ok, xis)
    return float(np.sum(lam * (1.0 - xi)))


def rate(lam_ok, xis) -> float:
    """Encoding rate in bits: -(1 / (2 ln 2)) * sum_j ln(1 - xi_j).

    Components with zero variance contribute nothing. Any component with
    positive variance kept losslessly (xi_j = 1) makes the rate infinite;
    math.inf is returned and callers must handle it.
    """
    lam, xi = validate_xis(lam_ok, xis)
    support = lam > 0
    if np.any(xi[support] >= 1.0):
        return math.inf
    # log1p keeps precision when xi is tiny (low-rate regime)
    return float(-np.sum(np.log1p(-xi[support])) / (2.0 * LN2))


def dist_z(r, xis) -> float:
    """Agnostic-detector distinguishability |sum_j r_j xi_j| / (2 ln 2), in bits."""
    rv = np.asarray(r, dtype=float)
    xi = np.asarray(xis, dtype=float)
    _check_lengths(rv, xi, "encoder parameter vector")
    return float(abs(np.sum(rv * xi)) / (2.0 * LN2))


def dist_j(r, xis) -> float:
    """Aware-detector distinguishability sum_j (r_j xi_j)^2 / (1 - r_j xi_j), in bits.

    Requires r_j xi_j < 1 for every j. The product reaches 1 only when a
    component with a vanished anomalous variance is kept losslessly; that
    boundary is outside the domain and raises DomainError.
    """
    rv = np.asarray(r, dtype=float)
    xi = np.asarray(xis, dtype=float)
    _check_lengths(rv, xi, "encoder parameter vector")
    prod = rv * xi
    if np.any(prod >= 1.0):
        j = int(np.argmax(prod >= 1.0))
        raise DomainError(
            f"r_j * xi_j = {prod[j]} >= 1 at component {j}; "
            "divergence is undefined on this boundary"
        )
    return float(np.sum(prod * prod / (1.0 - prod)) / (2.0 * LN2))


def dist_j_nats_parts(r, xis) -> tuple[float, np.ndarray]:
    """Value (nats, no 1/(2 ln 2)) and gradient of the J constraint function.

    Solver helper: g(xi) = sum (r xi)^2 / (1 - r xi) with
    dg/dxi_j = r_j^2 xi_j (2 - r_j xi_j) / (1 - r_j xi_j)^2.
    """
    rv = np.asarray(r, dtype=float)
    xi = np.asarray(xis, dtype=float)
    prod = rv * xi
    denom = 1.0 - prod
    value = float(np.sum(prod * prod / denom))
    grad = rv * rv * xi * (2.0 - prod) / (denom * denom)
    return value, grad


def compressed_variances(lam_ok, anomaly, xis) -> tuple[np.ndarray, np.ndarray]:
    """Per-component variances of the reconstructed normal and anomalous signals.

    Normal: lam_j * xi_j. Anomalous: xi_j * (lam_ko_j * xi_j + theta_j)
    with theta_j = lam_j * (1 - xi_j). Their ratio is 1 - r_j xi_j wherever
    the normal variance is positive.
    """
    lam, xi = validate_xis(lam_ok, xis)
    lam_ko = anomaly.variances(lam.size)
    var_ok = lam * xi
    theta = lam * (1.0 - xi)
    var_ko = xi * (lam_ko * xi + theta)
    return var_ok, var_ko
