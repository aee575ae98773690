"""Flux level sets and the sixteen-way case classifier."""
import time
from decimal import Decimal, getcontext

import numpy as np
import pytest

from roughwaves import (
    AmbiguousCaseError,
    AssumptionError,
    DomainError,
    FluxMismatchError,
    Kernel,
    RoadCondition,
    VelocityModel,
    case_states,
    classify,
    flux,
    homogeneous_states,
    make_kernel,
    make_velocity,
    solve_flux_level,
    stagnation_point,
    validate_kernel,
    validate_velocity,
)

from conftest import FBAR, RHO_HI_1, RHO_HI_2, RHO_LO_1, RHO_LO_2, tag_for

# expected (multiplicity, stable) for each digit
DIGIT_FACTS = {
    "1": ("infinite", True),
    "2": ("unique", False),
    "3": ("none", False),
    "4": ("none", False),
}
ALL_LABELS = [letter + digit for letter in "ABCD" for digit in "1234"]


def decimal_bisect(kappa, fbar, lo, hi, digits=40):
    """Independent high-precision root of kappa*rho*(1-rho) = fbar."""
    getcontext().prec = digits
    ka, fb = Decimal(kappa), Decimal(fbar)
    a, b = Decimal(lo), Decimal(hi)
    g = lambda r: ka * r * (1 - r) - fb
    sa = g(a)
    for _ in range(200):
        m = (a + b) / 2
        if g(m) == 0:
            return m
        if (g(m) > 0) == (sa > 0):
            a = m
        else:
            b = m
    return (a + b) / 2


def test_flux_arithmetic(v):
    assert flux(1.0, 0.0, v) == 0.0
    assert flux(2.0, 0.5, v) == 0.5
    assert flux(1.0, 0.75, v) == 0.1875


def test_flux_rejects_out_of_range_density(v):
    with pytest.raises(DomainError):
        flux(1.0, 1.2, v)
    with pytest.raises(DomainError):
        flux(1.0, -0.1, v)


def test_stagnation_point_lwr(v):
    rho_hat = stagnation_point(v)
    assert abs(rho_hat - 0.5) < 1e-12
    # flux slope changes sign across the stagnation density
    eps = 1e-6
    assert flux(1.0, 0.4 + eps, v) > flux(1.0, 0.4, v)
    assert flux(1.0, 0.6 + eps, v) < flux(1.0, 0.6, v)


def test_velocity_assumptions_enforced():
    ok = make_velocity("lwr")
    validate_velocity(ok)
    assert ok.eval(0.0) == 1.0 and ok.eval(1.0) == 0.0
    # convex square law violates the curvature assumption
    bad = VelocityModel(
        name="square",
        eval=lambda r: (1.0 - np.asarray(r)) ** 2,
        deriv=lambda r: -2.0 * (1.0 - np.asarray(r)),
        second_deriv=lambda r: np.full_like(np.asarray(r, float), 2.0),
    )
    with pytest.raises(AssumptionError):
        validate_velocity(bad)
    with pytest.raises(DomainError):
        make_velocity("nope")


def test_kernel_assumptions_enforced():
    for name in ("linear", "quadratic"):
        k = make_kernel(name, 0.2)
        validate_kernel(k)
        assert abs(float(np.asarray(k.eval(k.h)))) == 0.0
        for dx in (0.01, 0.004, 0.0025):
            om, _ = k.cell_moments(dx)
            assert abs(sum(om) - 1.0) < 1e-14
    flat = Kernel(name="flat", h=0.2, eval=lambda s: np.full_like(np.asarray(s, float), 5.0))
    with pytest.raises(AssumptionError):
        validate_kernel(flat)
    bump = Kernel(
        name="bump",
        h=0.2,
        eval=lambda s: 12.0 * np.asarray(s, float) * (0.2 - np.asarray(s, float)) ** 2 / 0.2**4,
    )
    with pytest.raises(AssumptionError):
        validate_kernel(bump)
    with pytest.raises(DomainError):
        make_kernel("nope", 0.2)


def test_flux_level_zero_and_maximum(v):
    z = solve_flux_level(0.0, RoadCondition(2.0, 1.0), v)
    assert (z.rho1, z.rho2, z.rho3, z.rho4) == (0.0, 0.0, 1.0, 1.0)
    m = solve_flux_level(0.25, RoadCondition(1.0, 1.0), v)
    assert abs(m.rho2 - 0.5) < 1e-12 and abs(m.rho3 - 0.5) < 1e-12


def test_flux_level_rejects_overdriven_level(v):
    with pytest.raises(DomainError):
        solve_flux_level(0.3, RoadCondition(2.0, 1.0), v)


def test_flux_level_canonical_roots(cond_drop, lset_drop, v):
    s = lset_drop
    assert abs(s.rho1 - RHO_LO_2) < 1e-12
    assert abs(s.rho4 - RHO_HI_2) < 1e-12
    assert abs(s.rho2 - RHO_LO_1) < 1e-12
    assert abs(s.rho3 - RHO_HI_1) < 1e-12
    # frozen values confirmed by the high-precision bisection below
    assert s.rho1 == pytest.approx(0.10471529247895257, abs=1e-15)
    assert s.rho4 == pytest.approx(0.8952847075210474, abs=1e-15)
    oracle_lo = float(decimal_bisect(2, "0.1875", 0, "0.5"))
    oracle_hi = float(decimal_bisect(2, "0.1875", "0.5", 1))
    assert abs(s.rho1 - oracle_lo) < 1e-13
    assert abs(s.rho4 - oracle_hi) < 1e-13
    # round trip through the flux
    for rho, kappa in ((s.rho1, 2.0), (s.rho4, 2.0), (s.rho2, 1.0), (s.rho3, 1.0)):
        assert abs(flux(kappa, rho, v) - FBAR) < 1e-12


def test_flux_level_runtime(cond_drop, v):
    best = min(
        _timed(lambda: solve_flux_level(FBAR, cond_drop, v)) for _ in range(5)
    )
    assert best < 1e-3


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def test_case_states_positions(lset_drop, lset_rise):
    rho_hat = 0.5
    for lset in (lset_drop, lset_rise):
        lo_minus = min(lset.rho1, lset.rho4)
        for digit, (want_m, want_p) in {
            "1": ("lo-", "hi+"),
            "2": ("lo-", "lo+"),
            "3": ("hi-", "hi+"),
            "4": ("hi-", "lo+"),
        }.items():
            label = ("A" if lset is lset_drop else "B") + digit
            rm, rp = case_states(label, lset)
            assert (rm < rho_hat) == (want_m == "lo-")
            assert (rp < rho_hat) == (want_p == "lo+")
    # canonical A1 pairing
    rm, rp = case_states("A1", lset_drop)
    assert rm == lset_drop.rho1 and rp == lset_drop.rho3


def test_classify_all_sixteen(cond_drop, cond_rise, lset_drop, lset_rise, v):
    for label in ALL_LABELS:
        cond = cond_drop if label[0] in "AC" else cond_rise
        lset = lset_drop if label[0] in "AC" else lset_rise
        tag = tag_for(label, cond, lset, v)
        mult, stable = DIGIT_FACTS[label[1]]
        assert tag.label == label
        assert tag.multiplicity == mult
        assert tag.stable is stable
        assert tag.model == ("M1" if label[0] in "AB" else "M2")


def test_classify_canonical_examples(cond_drop, cond_rise, v):
    t = classify(cond_drop, 0.10471529247895257, 0.75, v, model="M1")
    assert (t.label, t.multiplicity, t.stable) == ("A1", "infinite", True)
    t = classify(cond_rise, 0.25, 0.8952847075210474, v, model="M1")
    assert (t.label, t.multiplicity, t.stable) == ("B1", "infinite", True)
    t = classify(cond_drop, 0.8952847075210474, 0.25, v, model="M1")
    assert (t.label, t.multiplicity) == ("A4", "none")


def test_classify_enforces_flux_constraint(cond_drop, v):
    with pytest.raises(FluxMismatchError):
        classify(cond_drop, 0.3, 0.3, v)


def test_classify_boundary_is_ambiguous(cond_drop, v):
    # rho+ exactly at the stagnation density
    rho_minus = (1.0 - np.sqrt(0.5)) / 2.0
    with pytest.raises(AmbiguousCaseError):
        classify(cond_drop, rho_minus, 0.5, v)


def test_classify_trivial_levels(cond_drop, v):
    for states, label in (((0.0, 0.0), "trivial-zero"),
                          ((1.0, 1.0), "trivial-one"),
                          ((0.0, 1.0), "trivial-step")):
        tag = classify(cond_drop, *states, v)
        assert tag.label == label
        assert tag.multiplicity == "unique"
        assert tag.stable is True
    # both fluxes vanish but the positions are a jam-to-vacuum drop
    assert classify(cond_drop, 1.0, 0.0, v).label == "A4"


def test_classify_scale_invariance(cond_drop, lset_drop, v):
    rm, rp = case_states("A1", lset_drop)
    for c in (0.5, 3.0):
        scaled = RoadCondition(c * 2.0, c * 1.0)
        tag = classify(scaled, rm, rp, v, model="M1")
        assert tag.label == "A1"


def test_classify_mirror_symmetry(cond_drop, cond_rise, lset_drop, lset_rise, v):
    """Swapping the speed factors swaps the letter, digit facts intact."""
    for digit in "1234":
        ta = tag_for("A" + digit, cond_drop, lset_drop, v)
        tb = tag_for("B" + digit, cond_rise, lset_rise, v)
        assert (ta.multiplicity, ta.stable) == (tb.multiplicity, tb.stable)
        tc = tag_for("C" + digit, cond_drop, lset_drop, v)
        td = tag_for("D" + digit, cond_rise, lset_rise, v)
        assert (tc.multiplicity, tc.stable) == (td.multiplicity, td.stable)


def test_homogeneous_states_conjugate(lset_drop):
    lo, hi = homogeneous_states("A1", lset_drop)
    assert (lo, hi) == (lset_drop.rho2, lset_drop.rho3)
