"""Random component selection: keep m transform components, quantize finely.

A selection keeps an m-subset of the source components; everything else
is zeroed by the decoder. Quantization is modeled statistically as
additive Gaussian noise of total energy epsilon spread evenly over the
kept components (theta_eps = epsilon / m per component), which is the
rate-optimal behavior of a fine Gaussian quantizer. The scheme is a
suboptimal but fully analyzable encoder: every selection also reads as a
valid encoder parameter vector (xi = 1 - theta_eps / lam on kept
components, 0 elsewhere) so it can be compared against the optimal
trade-off frontier.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import core
from .detectors import DiagonalGaussian, auc, p_det, sample, score_ld, score_npd, ScoreSample
from .errors import DimensionError, DomainError
from .rng import substream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Selection:
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(idx) < 1:
            raise DomainError("a selection must keep at least one component")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise DomainError("selection indices must be strictly increasing")
        if idx[0] < 0:
            raise DomainError("selection indices must be >= 0")
        object.__setattr__(self, "indices", idx)

    @property
    def m_count(self) -> int:
        return len(self.indices)

    def label(self) -> str:
        return "-".join(str(i) for i in self.indices)

    def stable_hash(self) -> int:
        digest = hashlib.sha256(self.label().encode()).digest()
        return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class RcsEncoder:
    selection: Selection
    epsilon: float

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise DomainError(f"quantization energy must be positive, got {self.epsilon}")

    @property
    def theta_eps(self) -> float:
        return self.epsilon / self.selection.m_count

    def validate(self, lam_ok: np.ndarray):
        """Enforce the fine-quantization condition theta_eps < min positive
        variance, under which the rate and distortion formulas are exact."""
        lam = core.as_spectrum(lam_ok)
        if self.selection.indices[-1] >= lam.size:
            raise DimensionError("selection index out of range for this spectrum")
        lam_min = float(np.min(lam[lam > 0])) if np.any(lam > 0) else 0.0
        if self.theta_eps >= lam_min:
            raise DomainError(
                f"theta_eps = {self.theta_eps} must be below the smallest positive "
                f"variance {lam_min}; reduce epsilon"
            )


def default_epsilon(lam_ok) -> float:
    """Fine-quantization default: one hundredth of the smallest variance."""
    lam = core.as_spectrum(lam_ok)
    positive = lam[lam > 0]
    if positive.size == 0:
        raise DomainError("spectrum has no positive components")
    return float(np.min(positive)) / 100.0


def rcs_distortion(lam_ok, enc: RcsEncoder) -> float:
    """Discarded variance plus the quantization energy."""
    lam = core.as_spectrum(lam_ok)
    kept = np.zeros(lam.size, dtype=bool)
    kept[list(enc.selection.indices)] = True
    return float(lam[~kept].sum()) + enc.epsilon


def rcs_rate(lam_ok, enc: RcsEncoder) -> float:
    """Rate in bits: half the log variance-to-noise ratio over kept components.

    Components whose variance falls below theta_eps would contribute a
    negative term; they are clamped to zero bits and logged, since the
    fine-quantization model does not hold for them.
    """
    lam = core.as_spectrum(lam_ok)
    kept = np.array(enc.selection.indices)
    ratios = lam[kept] / enc.theta_eps
    bad = ratios < 1.0
    if np.any(bad):
        logger.warning(
            "rcs_rate: %d kept components have variance below theta_eps; clamped to 0 bits",
            int(np.sum(bad)),
        )
        ratios = np.maximum(ratios, 1.0)
    return float(0.5 * np.sum(np.log2(ratios)))


def rcs_xis(lam_ok, enc: RcsEncoder) -> np.ndarray:
    """Equivalent encoder parameters: 1 - theta_eps / lam on kept components."""
    lam = core.as_spectrum(lam_ok)
    xi = np.zeros(lam.size)
    kept = np.array(enc.selection.indices)
    with np.errstate(divide="ignore"):
        xi[kept] = np.clip(1.0 - enc.theta_eps / lam[kept], 0.0, 1.0)
    xi[lam == 0] = 0.0
    return xi


@dataclass(frozen=True)
class FullGaussian:
    """Zero-mean Gaussian with an explicit covariance (anomalous side only)."""

    means: np.ndarray
    covariance: np.ndarray


def rcs_compressed_models(lam_ok, anomaly_or_cov, enc: RcsEncoder):
    """Statistical models of the quantized kept components for both sources.

    Normal side: diagonal with variances lam_j + theta_eps. Anomalous side:
    the principal submatrix of the anomalous covariance plus theta_eps * I
    (diagonal fast path when the anomaly is diagonal or white).
    """
    lam = core.as_spectrum(lam_ok)
    kept = np.array(enc.selection.indices)
    if kept[-1] >= lam.size:
        raise DimensionError("selection index out of range for this spectrum")
    te = enc.theta_eps
    model_ok = DiagonalGaussian(np.zeros(kept.size), lam[kept] + te)
    if isinstance(anomaly_or_cov, (core.WhiteAnomaly, core.DiagonalAnomaly)):
        lam_ko = anomaly_or_cov.variances(lam.size)
        model_ko = DiagonalGaussian(np.zeros(kept.size), lam_ko[kept] + te)
    else:
        cov = np.asarray(anomaly_or_cov, dtype=float)
        if cov.shape != (lam.size, lam.size):
            raise DimensionError(f"anomalous covariance shape {cov.shape} must be ({lam.size}, {lam.size})")
        sub = cov[np.ix_(kept, kept)] + te * np.eye(kept.size)
        model_ko = FullGaussian(np.zeros(kept.size), sub)
    return model_ok, model_ko


def reconstruct(y: np.ndarray, enc: RcsEncoder, n: int) -> np.ndarray:
    """Zero-filled reconstruction: kept components pass through, the rest are 0."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    out = np.zeros((y.shape[0], n))
    out[:, list(enc.selection.indices)] = y
    return out


def sample_selections(n: int, m_count: int, cap: int, seed: int) -> list[Selection]:
    """Distinct selections of size m_count: exhaustive (lexicographic) when
    C(n, m) <= cap, otherwise `cap` uniform draws without replacement."""
    if not (1 <= m_count <= n):
        raise DomainError(f"m_count must be in [1, {n}], got {m_count}")
    total = math.comb(n, m_count)
    if total <= cap:
        return [Selection(tuple(t)) for t in itertools.combinations(range(n), m_count)]
    rng = substream(seed, "rcs-selections", m_count)
    seen = set()
    out = []
    while len(out) < cap:
        pick = tuple(sorted(rng.choice(n, size=m_count, replace=False).tolist()))
        if pick in seen:
            continue
        seen.add(pick)
        out.append(Selection(pick))
    return out


def evaluate_selection(lam_ok, anomaly, enc: RcsEncoder, n_samples: int, seed: int) -> dict:
    """Rate, distortion, and both detector benchmarks for one selection."""
    row = {
        "m_count": enc.selection.m_count,
        "selection_id": enc.selection.label(),
        "rate_bits": rcs_rate(lam_ok, enc),
        "distortion": rcs_distortion(lam_ok, enc),
    }
    model_ok, model_ko = rcs_compressed_models(lam_ok, anomaly, enc)
    sel_hash = enc.selection.stable_hash()
    x_ok = sample(model_ok, n_samples, substream(seed, "rcs", sel_hash, "ok"))
    x_ko = sample(model_ko, n_samples, substream(seed, "rcs", sel_hash, "ko"))
    s = ScoreSample(score_ld(model_ok, x_ok), score_ld(model_ok, x_ko), "ld", seed)
    row["pdet_ld"] = p_det(auc(s))
    s = ScoreSample(
        score_npd(model_ok, model_ko, x_ok), score_npd(model_ok, model_ko, x_ko), "npd", seed
    )
    row["pdet_npd"] = p_det(auc(s))
    return row


def _evaluate_task(args):
    lam, anomaly, enc, n_samples, seed = args
    return evaluate_selection(lam, anomaly, enc, n_samples, seed)


def rcs_experiment(
    lam_ok,
    anomaly,
    m_counts,
    cap: int = 10_000,
    epsilon: float | None = None,
    n_samples: int = 10_000,
    seed: int = 0,
    jobs: int = 1,
) -> list[dict]:
    """Sample selections for every requested subset size and benchmark each.

    Returns one row dict per selection with keys (m_count, selection_id,
    rate_bits, distortion, pdet_ld, pdet_npd). Selections are evaluated
    independently (parallelizable); per-selection random substreams keep
    the output identical for any worker count.
    """
    lam = core.as_spectrum(lam_ok)
    eps = default_epsilon(lam) if epsilon is None else float(epsilon)
    tasks = []
    for m_count in m_counts:
        for sel in sample_selections(lam.size, int(m_count), cap, seed):
            enc = RcsEncoder(sel, eps)
            enc.validate(lam)
            tasks.append((lam, anomaly, enc, n_samples, seed))
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_evaluate_task, tasks, chunksize=64))
    return [_evaluate_task(t) for t in tasks]
