"""Suspension-flow correlation machinery: exact segments, sweeps, window
averages, and the finite-depth limit check."""

from fractions import Fraction

import numpy as np
import pytest

from rankone.construction import catalog, heights, realize
from rankone.errors import SegmentBudgetExceeded, TimeOutOfRange
from rankone.flows import (
    FlowColumn,
    SlabAlgebra,
    flow_Pm_matrix,
    flow_corr,
    flow_heights,
    flow_limit_check,
    flow_segments,
    pm_identity_gap,
)

F = Fraction


def test_flow_heights_exact_fractions():
    rz = realize(catalog("staircase-flow"), 3)
    assert flow_heights(rz, 3) == [F(1), F(5, 2), F(17, 2)]


def test_segment_decomposition_depth2():
    # two unit copies, then the half-length spacer (the zero run is dropped)
    rz = realize(catalog("staircase-flow"), 2)
    seg = flow_segments(rz, 2)
    assert seg.kinds.tolist() == [0, 0, 1]
    durations = [F(int(n), int(d)) for n, d in zip(seg.nums, seg.dens)]
    assert durations == [F(1), F(1), F(1, 2)]
    assert seg.base_duration == F(1)
    assert sum(durations) == F(5, 2)


def test_segment_total_matches_height():
    rz = realize(catalog("staircase-flow"), 6)
    seg = flow_segments(rz, 6)
    total = sum(
        F(int(n), int(d)) for n, d in zip(seg.nums, seg.dens)
    )
    assert total == flow_heights(rz, 6)[5]


def test_segment_budget_guard():
    rz = realize(catalog("staircase-flow"), 40)
    with pytest.raises(SegmentBudgetExceeded):
        flow_segments(rz, 40)


def test_time_zero_is_diagonal_slab_measure():
    rz = realize(catalog("staircase-flow"), 2)
    cm = flow_corr(flow_segments(rz, 2), SlabAlgebra(4), F(0))
    assert np.allclose(cm.matrix, np.diag([0.2] * 5), atol=1e-15)
    assert cm.boundary_error == 0.0


def test_single_column_shift_is_superdiagonal():
    rz = realize(catalog("staircase-flow"), 1)
    cm = flow_corr(flow_segments(rz, 1), SlabAlgebra(4), F(1, 4))
    want = np.zeros((5, 5))
    want[0, 1] = want[1, 2] = want[2, 3] = 0.25
    assert np.allclose(cm.matrix, want, atol=1e-15)
    assert cm.boundary_error == pytest.approx(0.25)


def test_mass_conservation_inside_window():
    rz = realize(catalog("staircase-flow"), 5)
    seg = flow_segments(rz, 5)
    sl = SlabAlgebra(8)
    H = flow_heights(rz, 5)[4]
    col = FlowColumn(seg, sl)
    for t in (F(1, 3), F(2), F(7, 2)):
        cm = flow_corr(seg, sl, t, column=col)
        assert cm.matrix.sum() == pytest.approx(float((H - t) / H), abs=1e-12)
        assert cm.boundary_error == pytest.approx(float(t / H))


def test_negative_time_is_transpose():
    rz = realize(catalog("staircase-flow"), 5)
    seg = flow_segments(rz, 5)
    sl = SlabAlgebra(6)
    col = FlowColumn(seg, sl)
    for t in (F(1, 2), F(3), F(22, 7)):
        fwd = flow_corr(seg, sl, t, column=col).matrix
        bwd = flow_corr(seg, sl, -t, column=col).matrix
        assert np.array_equal(bwd, fwd.T)


def test_time_beyond_height_rejected():
    rz = realize(catalog("staircase-flow"), 3)
    seg = flow_segments(rz, 3)
    with pytest.raises(TimeOutOfRange):
        flow_corr(seg, SlabAlgebra(4), F(17, 2))


def test_exact_mode_agrees_with_float():
    rz = realize(catalog("staircase-flow"), 4)
    seg = flow_segments(rz, 4)
    sl = SlabAlgebra(5)
    t = F(5, 3)
    ex = flow_corr(seg, sl, t, exact=True)
    fl = flow_corr(seg, sl, t)
    H = flow_heights(rz, 4)[3]
    assert all(isinstance(v, F) for row in ex for v in row)
    assert sum(v for row in ex for v in row) == (H - t) / H
    exf = np.array([[float(v) for v in row] for row in ex])
    assert np.allclose(fl.matrix, exf, atol=1e-15)


def test_window_average_refines_monotonically():
    rz = realize(catalog("staircase-flow"), 5)
    seg = flow_segments(rz, 5)
    sl = SlabAlgebra(6)
    col = FlowColumn(seg, sl)
    coarse = flow_Pm_matrix(seg, sl, F(2), tol=1e-2, column=col)
    fine = flow_Pm_matrix(seg, sl, F(2), tol=1e-5, column=col)
    assert fine.quadrature_error <= coarse.quadrature_error
    assert fine.quadrature_error <= 1e-5
    assert fine.halvings >= coarse.halvings
    # refinement only sharpens the same average
    assert np.abs(fine.matrix - coarse.matrix).max() <= coarse.quadrature_error * 4


def test_window_average_row_mass():
    rz = realize(catalog("staircase-flow"), 5)
    seg = flow_segments(rz, 5)
    sl = SlabAlgebra(4)
    res = flow_Pm_matrix(seg, sl, F(1), tol=1e-4)
    # averaging unit-deficit sweeps keeps total mass near 1 - E[t]/H
    H = float(flow_heights(rz, 5)[4])
    assert res.matrix.sum() == pytest.approx(1.0 - 0.5 / H, abs=1e-3)


def test_pm_identity_gap_machine_small():
    rz = realize(catalog("staircase-flow"), 5)
    seg = flow_segments(rz, 5)
    gap = pm_identity_gap(seg, SlabAlgebra(6), F(2), tol=1e-4)
    assert gap <= 1e-12


def test_flow_limit_check_small_depth():
    rz = realize(catalog("staircase-flow"), 6)
    rep = flow_limit_check(rz, 6, 1, 1, 5, L=8, tol=1e-3)
    assert rep.q == 1 and rep.stage == 5
    assert rep.lag_time == flow_heights(rz, 6)[4]
    assert rep.residual < 0.2
    assert rep.quadrature_error <= 1e-3
    assert rep.residual_mirror == pytest.approx(rep.residual, abs=1e-9)
