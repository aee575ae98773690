"""Finite-volume stepping: conservation, bounds, the supply limiter at the
jump, snapshot capture and the convergence diagnostics."""
import numpy as np
import pytest

from conftest import DX, tag_for
from roughwaves import (
    DomainError,
    RoadCondition,
    SchemeError,
    case_states,
)
from roughwaves.simulator import (
    SimState,
    cfl_dt,
    interface_fluxes,
    persistence_metric,
    phi_map,
    phi_values,
    profile_initial,
    riemann_initial,
    run,
    step,
)


def mass_balance_error(before, after, flux, dt):
    """Interior mass change against the boundary fluxes, exact in the scheme."""
    return abs(after.mass() - before.mass() + dt * (flux[-1] - flux[0]))


# ---------------------------------------------------------------------------
# construction

def test_riemann_initial_geometry():
    s = riemann_initial(0.25, 0.75, DX)
    assert (s.n, s.interface_index) == (2040, 1000)
    assert (s.x_min, s.x_max) == (-5.0, 5.2)
    c = s.centers()
    assert np.all(s.cells[c < 0] == 0.25) and np.all(s.cells[c > 0] == 0.75)
    assert 0.0 not in c
    assert abs(s.mass() - np.sum(s.cells) * DX) == 0.0


def test_riemann_initial_rejects_bad_input():
    with pytest.raises(DomainError, match="outside"):
        riemann_initial(1.2, 0.5, DX)
    with pytest.raises(DomainError, match="integer multiple"):
        riemann_initial(0.2, 0.5, DX, x_min=-5.001)
    with pytest.raises(DomainError, match="scheme"):
        riemann_initial(0.2, 0.5, DX, scheme="godunov")
    with pytest.raises(DomainError):
        riemann_initial(0.2, 0.5, DX, x_min=0.5)


def test_state_validation():
    with pytest.raises(DomainError):
        SimState(np.array([0.2, 1.2]), DX, 0.0, 1, 0.2, 0.2)
    with pytest.raises(DomainError):
        SimState(np.array([[0.2, 0.3]]), DX, 0.0, 1, 0.2, 0.2)
    with pytest.raises(DomainError):
        SimState(np.array([0.2, 0.3]), DX, 0.0, 5, 0.2, 0.2)
    with pytest.raises(DomainError):
        SimState(np.array([0.2, 0.3]), -DX, 0.0, 1, 0.2, 0.2)
    with pytest.raises(DomainError):
        SimState(np.array([0.2, 0.3]), DX, 0.0, 1, 0.2, 1.5)


def test_cfl_step_size(cond_drop, v):
    s = riemann_initial(0.25, 0.75, DX)
    assert cfl_dt(s, cond_drop, v) == 0.4 * DX / 2.0
    loose = riemann_initial(0.25, 0.75, DX, cfl=0.6)  # stored, checked on use
    with pytest.raises(SchemeError, match="0.5 stability bound"):
        cfl_dt(loose, cond_drop, v)


# ---------------------------------------------------------------------------
# stepping

def test_constant_state_is_a_fixed_point(v, kern):
    cond = RoadCondition(1.5, 1.5)
    for model in ("M1", "M2"):
        s = riemann_initial(0.3, 0.3, DX, -1.0, 1.0)
        assert np.array_equal(step(s, model, cond, v, kern).cells, s.cells)


def test_step_rejects_bad_discretization(cond_drop, v, kern):
    s = riemann_initial(0.25, 0.75, 0.03, -0.9, 0.9)
    with pytest.raises(DomainError, match="integer multiple"):
        step(s, "M1", cond_drop, v, kern)
    s = riemann_initial(0.25, 0.75, DX)
    with pytest.raises(DomainError, match="unknown model"):
        step(s, "M9", cond_drop, v, kern)


@pytest.mark.parametrize("model,label", [("M1", "A1"), ("M2", "C1")])
def test_mass_balance_and_bounds(model, label, cond_drop, lset_drop, v, kern):
    rm, rp = case_states(label, lset_drop)
    s = riemann_initial(rm, rp, DX)
    for _ in range(50):
        dt = cfl_dt(s, cond_drop, v)
        flux = interface_fluxes(s, model, cond_drop, v, kern)
        s2 = step(s, model, cond_drop, v, kern)
        assert mass_balance_error(s, s2, flux, dt) < 1e-12
        assert 0.0 <= s2.cells.min() and s2.cells.max() <= 1.0
        s = s2


def test_supply_limiter_engages_without_leaking_mass(cond_drop, lset_drop, v, kern):
    rm, rp = case_states("A3", lset_drop)
    s = riemann_initial(rm, rp, DX)
    engaged = 0
    for _ in range(50):
        dt = cfl_dt(s, cond_drop, v)
        flux = interface_fluxes(s, "M1", cond_drop, v, kern)
        raw = s.cells - (dt / s.dx) * np.diff(flux)
        s2 = step(s, "M1", cond_drop, v, kern)
        if raw.max() > 1.0:
            engaged += 1
            assert s2.cells.max() <= 1.0
        assert mass_balance_error(s, s2, interface_fluxes(s, "M1", cond_drop, v, kern), dt) < 1e-12
        s = s2
    assert engaged > 10  # the jam at the jump keeps demanding more than supply


def test_limiter_is_inert_when_raw_update_is_admissible(cond_rise, lset_rise, v, kern):
    rm, rp = case_states("B3", lset_rise)
    s = riemann_initial(rm, rp, DX)
    dt = cfl_dt(s, cond_rise, v)
    raw = s.cells - (dt / s.dx) * np.diff(interface_fluxes(s, "M1", cond_rise, v, kern))
    assert raw.max() <= 1.0
    assert np.array_equal(step(s, "M1", cond_rise, v, kern).cells, raw)


def test_dissipative_scheme_smears_the_step(cond_drop, v, kern):
    su = riemann_initial(0.25, 0.75, DX, -1.0, 1.0)
    sl = riemann_initial(0.25, 0.75, DX, -1.0, 1.0, scheme="lax-friedrichs")
    for _ in range(40):
        su = step(su, "M1", cond_drop, v, kern)
        sl = step(sl, "M1", cond_drop, v, kern)
    gap = float(np.sum(np.abs(su.cells - sl.cells)) * DX)
    assert gap > 1e-5
    var_u = float(np.sum(np.abs(np.diff(su.cells))))
    var_l = float(np.sum(np.abs(np.diff(sl.cells))))
    assert var_l <= var_u + 1e-12


# ---------------------------------------------------------------------------
# run and snapshots

def test_run_time_handling(cond_drop, v, kern):
    s = riemann_initial(0.25, 0.75, DX)
    out = run(s, "M1", cond_drop, v, kern, 0.0)
    assert len(out) == 1 and out[0] is s
    with pytest.raises(DomainError, match="nonnegative"):
        run(s, "M1", cond_drop, v, kern, -1.0)
    with pytest.raises(DomainError, match="nonnegative"):
        run(s, "M1", cond_drop, v, kern, 1.0, (-0.5,))


def test_snapshots_capture_first_state_at_or_past_each_time(cond_drop, v, kern):
    s = riemann_initial(0.25, 0.75, DX)  # dt = 0.001
    out = run(s, "M1", cond_drop, v, kern, 0.003, (0.0, 0.0015, 0.003))
    assert [o.t for o in out] == [0.0, 0.002, 0.003]
    # snapshot times extend the run past t_final
    out = run(s, "M1", cond_drop, v, kern, 0.0, (0.005,))
    assert len(out) == 1 and out[0].t == 0.005


# ---------------------------------------------------------------------------
# convergence diagnostics

def test_phi_map_recognizes_an_exact_member(a1_family):
    m = a1_family[1]
    s = profile_initial(m, DX, x_min=-3.0, x_max=3.0)
    d = phi_map(s, a1_family)
    assert d.phi_spread == 0.0
    assert d.l1_distance_to_nearest == 0.0
    assert d.inside_envelope


def test_phi_values_stay_between_bracketing_members(a1_family):
    lo, hi = a1_family[0], a1_family[1]
    s = profile_initial(lo, DX, x_min=-3.0, x_max=3.0)
    blend = 0.5 * (lo.eval(s.centers()) + hi.eval(s.centers()))
    sb = SimState(np.clip(blend, 0.0, 1.0), DX, 0.0, s.interface_index,
                  float(blend[0]), float(blend[-1]))
    phi, mask = phi_values(sb, a1_family)
    assert mask.any()
    assert np.all(phi[mask] >= lo.trace_plus - 1e-12)
    assert np.all(phi[mask] <= hi.trace_plus + 1e-12)


def test_phi_map_flags_states_outside_the_envelope(a1_family):
    bottom = a1_family[0]
    s = profile_initial(bottom, DX, x_min=-3.0, x_max=3.0)
    below = np.clip(bottom.eval(s.centers()) - 0.01, 0.0, 1.0)
    sb = SimState(below, DX, 0.0, s.interface_index, float(below[0]), float(below[-1]))
    d = phi_map(sb, a1_family)
    assert not d.inside_envelope
    assert d.l1_distance_to_nearest > 0.01


def test_phi_rejects_unordered_or_empty_families(a1_family):
    s = profile_initial(a1_family[0], DX, x_min=-3.0, x_max=3.0)
    with pytest.raises(DomainError):
        phi_values(s, [])
    with pytest.raises(DomainError, match="sorted"):
        phi_values(s, list(reversed(a1_family)))


def test_persistence_metric_trivial_cases(a1_family):
    assert len(persistence_metric([], (0.2, 0.6))) == 0
    s = riemann_initial(0.25, 0.75, DX)
    assert persistence_metric([s], (0.25, 0.75))[0] == 0.0
    m = a1_family[1]
    sm = profile_initial(m, DX, x_min=-3.0, x_max=3.0)
    assert persistence_metric([sm], m)[0] == 0.0
