import numpy as np
import pytest

from rddlab.core import WhiteAnomaly
from rddlab.errors import DomainError
from rddlab.solver import ConstraintKind, SolverConfig, solve_rd, solve_rdd_z, RddProblem
from rddlab.sweep import sweep


def test_single_cell_equals_single_solve(canonical_profile):
    anomaly = WhiteAnomaly(1.0)
    surf = sweep(canonical_profile, anomaly, ConstraintKind.AGNOSTIC_Z, [6.0], [3.0])
    assert len(surf.points) == 1
    single = solve_rdd_z(RddProblem(canonical_profile, anomaly, 6.0, 3.0,
                                    ConstraintKind.AGNOSTIC_Z))
    assert surf.points[0].result.rate_bits == pytest.approx(single.rate_bits, abs=1e-9)


def test_omega_zero_row_is_rd_curve(canonical_profile):
    anomaly = WhiteAnomaly(1.0)
    deltas = [2.0, 6.0, 10.0, 14.0]
    surf = sweep(canonical_profile, anomaly, ConstraintKind.AGNOSTIC_Z, deltas, [0.0])
    for p in surf.points:
        rd = solve_rd(canonical_profile, p.delta)
        assert p.result.rate_bits == pytest.approx(rd.rate_bits, abs=1e-6)


def test_grid_validation():
    with pytest.raises(DomainError):
        sweep(np.ones(4), WhiteAnomaly(1.0), ConstraintKind.AGNOSTIC_Z, [], [0.0])
    with pytest.raises(DomainError):
        sweep(np.ones(4), WhiteAnomaly(1.0), ConstraintKind.AGNOSTIC_Z, [2.0, 1.0], [0.0])


def test_infeasible_cells_recorded_not_dropped():
    lam = np.ones(4)
    surf = sweep(lam, WhiteAnomaly(1.0), ConstraintKind.AGNOSTIC_Z, [2.0], [0.0, 5.0])
    assert len(surf.points) == 2
    statuses = [p.result.status.value for p in surf.points]
    assert statuses == ["optimal", "infeasible"]


def test_warm_start_independence(canonical_profile):
    anomaly = WhiteAnomaly(1.0)
    deltas = [6.0, 10.0]
    omegas = [0.0, 5.0, 15.0, 30.0]
    warm = sweep(canonical_profile, anomaly, ConstraintKind.AGNOSTIC_Z, deltas, omegas,
                 SolverConfig(warm_start=True))
    cold = sweep(canonical_profile, anomaly, ConstraintKind.AGNOSTIC_Z, deltas, omegas,
                 SolverConfig(warm_start=False))
    for a, b in zip(warm.points, cold.points):
        assert a.result.rate_bits == pytest.approx(b.result.rate_bits, abs=1e-6)


def test_parallel_rows_match_serial(canonical_profile):
    anomaly = WhiteAnomaly(1.0)
    deltas = [6.0, 10.0, 14.0]
    omegas = [0.0, 10.0]
    a = sweep(canonical_profile, anomaly, ConstraintKind.AGNOSTIC_Z, deltas, omegas, jobs=1)
    b = sweep(canonical_profile, anomaly, ConstraintKind.AGNOSTIC_Z, deltas, omegas, jobs=2)
    for pa, pb in zip(a.points, b.points):
        assert pa.result.rate_bits == pb.result.rate_bits  # bit-identical


def test_monotonicity_flags_empty_on_canonical(canonical_profile):
    anomaly = WhiteAnomaly(1.0)
    surf = sweep(canonical_profile, anomaly, ConstraintKind.AGNOSTIC_Z,
                 [2.0, 10.0], [0.0, 10.0, 25.0])
    assert surf.metadata["monotonicity_violations"] == []


def test_grid_accessor(canonical_profile):
    surf = sweep(canonical_profile, WhiteAnomaly(1.0), ConstraintKind.AGNOSTIC_Z,
                 [2.0, 10.0], [0.0, 10.0])
    rates = surf.grid("rate_bits")
    assert rates.shape == (2, 2)
    assert np.all(np.isfinite(rates))
    assert np.all(rates[0] >= rates[1])  # smaller distortion budget costs more rate
