"""Rate-distortion-detectability laboratory for Gaussian sources.

Library layers:

* :mod:`rddlab.core` — closed-form distortion, rate, and detectability of
  Gaussian-additive encoders.
* :mod:`rddlab.solver` / :mod:`rddlab.sweep` — minimum-rate encoder design
  under distortion and detectability floors, and grid sweeps.
* :mod:`rddlab.detectors` — Monte-Carlo detector benchmarks (likelihood,
  likelihood-ratio, Mahalanobis) with rank-based AUC.
* :mod:`rddlab.rcs` — random-component-selection compression baseline.
* :mod:`rddlab.jpeg` — blockwise-DCT codec with solver-derived
  quantization tables.
* :mod:`rddlab.experiments` / :mod:`rddlab.cli` — reproducible experiment
  runs emitting CSV tables, JSON manifests, and optional figures.
"""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    DiagonalAnomaly,
    WhiteAnomaly,
    compressed_variances,
    dist_j,
    dist_z,
    distortion,
    rate,
    ratio_vector,
)
from .errors import ConfigError, DimensionError, DomainError, IdxFormatError  # noqa: F401
from .solver import (  # noqa: F401
    ConstraintKind,
    RddProblem,
    SolveResult,
    SolverConfig,
    Status,
    solve_rd,
    solve_rdd_j,
    solve_rdd_z,
)
from .sweep import ParetoPoint, ParetoSurface, sweep  # noqa: F401
from .detectors import (  # noqa: F401
    DiagonalGaussian,
    DetectionResult,
    MahalanobisScorer,
    ScoreSample,
    auc,
    evaluate_detection,
    p_det,
    score_ld,
    score_mahalanobis,
    score_npd,
)
