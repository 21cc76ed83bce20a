"""Monte-Carlo detector benchmarks on diagonal Gaussian models.

Scores follow the three detectors used throughout the experiments: the
likelihood detector (normal model only), the likelihood-ratio detector
(both models), and the Mahalanobis distance (mean + covariance, possibly
estimated from data). Detection quality is summarized by the rank-based
AUC and pdet = max(AUC, 1 - AUC), which need no score threshold.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from . import core
from .errors import DimensionError, DomainError
from .rng import substream


@dataclass(frozen=True)
class DiagonalGaussian:
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.means, dtype=float)
        var = np.asarray(self.variances, dtype=float)
        if mu.shape != var.shape or mu.ndim != 1:
            raise DimensionError(
                f"means {mu.shape} and variances {var.shape} must be equal-length vectors"
            )
        if np.any(var < 0):
            raise DomainError("variances must be >= 0")
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    @property
    def dim(self) -> int:
        return self.means.size


def sample(model: DiagonalGaussian, count: int, rng) -> np.ndarray:
    """Draw `count` independent vectors. `rng` is a Generator or an int seed.

    Zero-variance components come out exactly equal to their means.
    """
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    if not isinstance(rng, np.random.Generator):
        rng = substream(int(rng), "sample")
    std = np.sqrt(model.variances)
    draws = rng.standard_normal((count, model.dim))
    return model.means + draws * std


def score_ld(model_ok: DiagonalGaussian, x: np.ndarray) -> np.ndarray:
    """Likelihood score sum_j (x_j - mu_j)^2 / (2 sigma_j^2).

    Monotone in the negative log-density (constants dropped), so AUC is
    unchanged. A zero-variance component scores +inf whenever the sample
    departs from its mean, 0 otherwise.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model_ok.dim:
        raise DimensionError(f"samples have {x.shape[1]} columns, model has {model_ok.dim}")
    var = model_ok.variances
    live = var > 0
    d = x - model_ok.means
    scores = np.sum(d[:, live] ** 2 / (2.0 * var[live]), axis=1)
    frozen = ~live
    if np.any(frozen):
        mismatch = np.any(d[:, frozen] != 0.0, axis=1)
        scores = np.where(mismatch, np.inf, scores)
    return scores


def score_npd(model_ok: DiagonalGaussian, model_ko: DiagonalGaussian, x: np.ndarray) -> np.ndarray:
    """Log-likelihood-ratio score log f_ko(x) - log f_ok(x).

    Per component: (x - mu_ok)^2 / (2 s_ok) - (x - mu_ko)^2 / (2 s_ko)
    + 0.5 ln(s_ok / s_ko). Components where both models have zero variance
    and the sample matches both means contribute nothing; a zero-variance
    mismatch drives the score to the corresponding infinity.
    """
    if model_ok.dim != model_ko.dim:
        raise DimensionError("models have different dimensions")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model_ok.dim:
        raise DimensionError(f"samples have {x.shape[1]} columns, model has {model_ok.dim}")
    v_ok, v_ko = model_ok.variances, model_ko.variances
    live = (v_ok > 0) & (v_ko > 0)
    d_ok = x - model_ok.means
    d_ko = x - model_ko.means
    scores = np.sum(
        d_ok[:, live] ** 2 / (2.0 * v_ok[live])
        - d_ko[:, live] ** 2 / (2.0 * v_ko[live]),
        axis=1,
    ) + 0.5 * float(np.sum(np.log(v_ok[live] / v_ko[live])))
    ok_frozen = v_ok == 0
    ko_frozen = v_ko == 0
    if np.any(ok_frozen):
        mismatch = np.any(d_ok[:, ok_frozen] != 0.0, axis=1)
        scores = np.where(mismatch, np.inf, scores)
    if np.any(ko_frozen):
        mismatch = np.any(d_ko[:, ko_frozen] != 0.0, axis=1)
        scores = np.where(mismatch & np.isfinite(scores), -np.inf, scores)
    return scores


class MahalanobisScorer:
    """Squared Mahalanobis distance under a fitted Gaussian.

    The covariance is factorized once (symmetric eigendecomposition);
    eigenvalues below 1e-10 * trace / n are clipped up to that floor so
    near-singular sample covariances stay scoreable. `n_clipped` records
    how many eigenvalues were lifted.
    """

    def __init__(self, mean: np.ndarray, covariance: np.ndarray):
        mean = np.asarray(mean, dtype=float)
        cov = np.asarray(covariance, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] != mean.size:
            raise DimensionError(f"covariance shape {cov.shape} does not match mean {mean.shape}")
        scale = float(np.max(np.abs(cov))) or 1.0
        if not np.allclose(cov, cov.T, atol=1e-8 * scale):
            raise DomainError("covariance must be symmetric")
        evals, evecs = np.linalg.eigh(cov)
        floor = 1e-10 * max(float(np.trace(cov)), 0.0) / cov.shape[0]
        floor = max(floor, np.finfo(float).tiny)
        self.n_clipped = int(np.sum(evals < floor))
        self.mean = mean
        self._evecs = evecs
        self._evals = np.maximum(evals, floor)

    @classmethod
    def fit(cls, rows: np.ndarray) -> "MahalanobisScorer":
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] < 2:
            raise DomainError("need a (samples x features) matrix with >= 2 rows")
        mean = rows.mean(axis=0)
        cov = np.cov(rows, rowvar=False, ddof=0)
        cov = np.atleast_2d(cov)
        return cls(mean, cov)

    def score(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = (x - self.mean) @ self._evecs
        return np.sum(y * y / self._evals, axis=1)


def score_mahalanobis(mean, covariance, x) -> np.ndarray:
    """One-shot (x - mu)' Sigma^+ (x - mu) via the factorized scorer."""
    return MahalanobisScorer(mean, covariance).score(x)


@dataclass
class ScoreSample:
    scores_ok: np.ndarray
    scores_ko: np.ndarray
    detector: str
    seed: int

    def __post_init__(self):
        self.scores_ok = np.asarray(self.scores_ok, dtype=float).reshape(-1)
        self.scores_ko = np.asarray(self.scores_ko, dtype=float).reshape(-1)
        if self.scores_ok.size == 0 or self.scores_ko.size == 0:
            raise DomainError("both score lists must be non-empty")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "score"])
            for s in self.scores_ok:
                w.writerow(["ok", repr(float(s))])
            for s in self.scores_ko:
                w.writerow(["ko", repr(float(s))])


def auc(scores: ScoreSample) -> float:
    """Prob{score(anomalous) > score(normal)} by the rank statistic.

    Tied pairs count one half each (exact average-rank method).
    """
    a, b = scores.scores_ok, scores.scores_ko
    ranks = rankdata(np.concatenate([a, b]), method="average")
    rank_sum_ko = float(np.sum(ranks[a.size:]))
    m = b.size
    u = rank_sum_ko - m * (m + 1) / 2.0
    return u / (a.size * m)


def p_det(auc_value: float) -> float:
    """max(AUC, 1 - AUC): detection quality regardless of score orientation."""
    return max(float(auc_value), 1.0 - float(auc_value))


def auc_stderr(auc_value: float, n_ok: int, n_ko: int) -> float:
    """Hanley-McNeil standard error of an AUC estimate."""
    a = float(auc_value)
    q1 = a / (2.0 - a)
    q2 = 2.0 * a * a / (1.0 + a)
    var = (a * (1.0 - a) + (n_ko - 1) * (q1 - a * a) + (n_ok - 1) * (q2 - a * a)) / (n_ok * n_ko)
    return math.sqrt(max(var, 0.0))


@dataclass
class DetectionResult:
    pdet: float
    auc: float
    stderr: float
    n_ok: int
    n_ko: int
    detector: str
    seed: int


def evaluate_detection(lam_ok, anomaly, xis, detector: str, n_samples: int, seed: int) -> DetectionResult:
    """End-to-end benchmark of an encoder: sample both compressed sources,
    score with the requested detector, and estimate pdet.

    Deterministic per (inputs, seed) regardless of thread schedule.
    """
    var_ok, var_ko = core.compressed_variances(lam_ok, anomaly, xis)
    n = var_ok.size
    model_ok = DiagonalGaussian(np.zeros(n), var_ok)
    model_ko = DiagonalGaussian(np.zeros(n), var_ko)
    x_ok = sample(model_ok, n_samples, substream(seed, "detect", detector, "ok"))
    x_ko = sample(model_ko, n_samples, substream(seed, "detect", detector, "ko"))
    if detector == "ld":
        s_ok = score_ld(model_ok, x_ok)
        s_ko = score_ld(model_ok, x_ko)
    elif detector == "npd":
        s_ok = score_npd(model_ok, model_ko, x_ok)
        s_ko = score_npd(model_ok, model_ko, x_ko)
    else:
        raise DomainError(f"unknown detector {detector!r}; expected 'ld' or 'npd'")
    sample_pair = ScoreSample(s_ok, s_ko, detector=detector, seed=seed)
    a = auc(sample_pair)
    return DetectionResult(
        pdet=p_det(a),
        auc=a,
        stderr=auc_stderr(a, n_samples, n_samples),
        n_ok=n_samples,
        n_ko=n_samples,
        detector=detector,
        seed=seed,
    )
