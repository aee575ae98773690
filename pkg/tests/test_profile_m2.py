"""Stationary profiles of the averaged-speed model: continuous families,
the kink certificate at the speed jump and the unique digit-2 profile."""
import numpy as np
import pytest

from conftest import DX, tag_for
from roughwaves import (
    BlowupError,
    DomainError,
    RoadCondition,
    admissible_trace_range,
    build_profile_family_m2,
)
from roughwaves.profile_m1 import build_homogeneous_profile
from roughwaves.profile_m2 import build_unique_profile_m2, kink_certificate


def test_family_is_continuous_and_certified(c1_family, lset_drop):
    assert [round(p.trace_plus, 2) for p in c1_family] == [0.45, 0.6, 0.75]
    for p in c1_family:
        g = p.grid
        assert g.left_trace_at_zero is None  # no jump at x = 0
        assert p.trace_minus == p.trace_plus
        assert p.residual_sup < 1e-10
        assert np.all(np.diff(g.values) >= 0.0)
        assert abs(g.values[0] - lset_drop.rho1) < 1e-3


def test_family_members_never_cross(c1_family):
    for lower, upper in zip(c1_family, c1_family[1:]):
        assert np.all(lower.grid.values < upper.grid.values)


def test_family_increments_stay_bounded(c1_family):
    # the averaged speed keeps P Lipschitz: nodal increments scale with dx
    for p in c1_family:
        assert np.max(np.abs(np.diff(p.grid.values))) < 12.0 * p.grid.dx


def test_trace_ranges(cond_drop, lset_drop, cond_rise, lset_rise, v):
    tag = tag_for("C1", cond_drop, lset_drop, v)
    assert admissible_trace_range(tag, lset_drop, cond_drop) == (0.25, 0.75, False, True)
    tag = tag_for("D1", cond_rise, lset_rise, v)
    lo, hi, lo_closed, hi_closed = admissible_trace_range(tag, lset_rise, cond_rise)
    assert abs(lo - lset_rise.rho2) < 1e-15
    assert abs(hi - lset_rise.rho3) < 1e-15
    assert (lo_closed, hi_closed) == (True, False)


def test_kink_matches_the_flux_constraint(cond_drop, lset_drop, v, kern):
    tag = tag_for("C1", cond_drop, lset_drop, v)
    reports = []
    for dx in (kern.h / 100, kern.h / 200):
        fam = build_profile_family_m2(tag, lset_drop, cond_drop, v, kern, dx, -1.5, 1.5, [0.6])
        reports.append(kink_certificate(fam[0], cond_drop, v, kern))
    coarse, fine = reports
    assert coarse.relative_error < 5e-3
    assert coarse.relative_error / fine.relative_error > 3.0  # second order
    # the slope drops across a falling speed limit
    assert coarse.predicted_jump < 0.0
    assert coarse.right_slope < coarse.left_slope


def test_kink_rejects_degenerate_and_wrong_model(cond_drop, v, kern):
    smooth = build_homogeneous_profile(1.0, 0.75, v, kern, DX, 4.0, model="M2")
    with pytest.raises(DomainError, match="no kink"):
        kink_certificate(smooth, RoadCondition(1.0, 1.0), v, kern)
    jumpy = build_homogeneous_profile(1.0, 0.75, v, kern, DX, 4.0, model="M1")
    with pytest.raises(DomainError, match="M2"):
        kink_certificate(jumpy, cond_drop, v, kern)


def test_rise_family_envelope_and_capacity(cond_rise, lset_rise, v, kern):
    tag = tag_for("D1", cond_rise, lset_rise, v)
    fam = build_profile_family_m2(
        tag, lset_rise, cond_rise, v, kern, DX, -3.0, 3.0, [lset_rise.rho2, 0.75]
    )
    seed, high = fam
    left = seed.grid.values[: seed.grid.i0 + 1]
    assert np.all(np.diff(left) <= 0.0)  # falls from the left state to the trace
    assert np.all(left <= 0.25 + 1e-10)
    assert seed.rho_left == 0.25
    # closed lower endpoint degenerates to the constant low root on x > 0
    assert np.max(np.abs(seed.grid.values[seed.grid.i0:] - lset_rise.rho2)) == 0.0
    assert high.residual_sup < 1e-10
    assert np.all(seed.grid.values < high.grid.values)
    # traces near the open upper endpoint exhaust the carrying capacity
    with pytest.raises(BlowupError, match="cannot carry the flux"):
        build_profile_family_m2(tag, lset_rise, cond_rise, v, kern, DX, -3.0, 3.0, [0.80])


def test_unique_profile_is_continuous(cond_drop, lset_drop, v, kern):
    tag = tag_for("C2", cond_drop, lset_drop, v)
    p = build_unique_profile_m2(tag, lset_drop, cond_drop, v, kern, DX, -3.0, 3.0)
    assert p.trace_minus == p.trace_plus == 0.25
    assert p.grid.left_trace_at_zero is None
    assert np.max(np.abs(p.grid.values[p.grid.i0:] - 0.25)) == 0.0
    assert np.all(np.diff(p.grid.values[: p.grid.i0 + 1]) >= 0.0)
    assert abs(p.grid.values[0] - lset_drop.rho1) < 1e-3
    assert p.residual_sup < 1e-10


def test_no_profile_for_digit_three_and_four(cond_drop, lset_drop, v, kern):
    for label in ("C3", "C4"):
        tag = tag_for(label, cond_drop, lset_drop, v)
        with pytest.raises(DomainError, match="admits no stationary profile"):
            build_unique_profile_m2(tag, lset_drop, cond_drop, v, kern, DX, -3.0, 3.0)
        with pytest.raises(DomainError):
            build_profile_family_m2(tag, lset_drop, cond_drop, v, kern, DX, -3.0, 3.0, [0.5])
