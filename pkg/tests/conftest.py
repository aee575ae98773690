"""Shared fixtures: the canonical velocity, kernel, road conditions and
flux level used throughout the suite.

Most tests run at the working resolution dx = h/40 on short domains to
keep the suite fast; the acceptance tests own the expensive runs.
"""
import numpy as np
import pytest

from roughwaves import (
    RoadCondition,
    build_profile_family,
    build_profile_family_m2,
    case_states,
    classify,
    make_kernel,
    make_velocity,
    solve_flux_level,
)

H = 0.2
FBAR = 0.1875
DX = H / 40

# closed-form roots of kappa*rho*(1-rho) = fbar for the two speed factors
RHO_LO_2 = (1.0 - np.sqrt(1.0 - 2.0 * FBAR)) / 2.0   # 2rho(1-rho)=fbar, lower
RHO_HI_2 = (1.0 + np.sqrt(1.0 - 2.0 * FBAR)) / 2.0
RHO_LO_1 = 0.25                                       # rho(1-rho)=0.1875, exact
RHO_HI_1 = 0.75


@pytest.fixture(scope="session")
def v():
    return make_velocity("lwr")


@pytest.fixture(scope="session")
def kern():
    return make_kernel("linear", H)


@pytest.fixture(scope="session")
def cond_drop():
    """Speed limit drops across x=0."""
    return RoadCondition(2.0, 1.0)


@pytest.fixture(scope="session")
def cond_rise():
    return RoadCondition(1.0, 2.0)


@pytest.fixture(scope="session")
def lset_drop(cond_drop, v):
    return solve_flux_level(FBAR, cond_drop, v)


@pytest.fixture(scope="session")
def lset_rise(cond_rise, v):
    return solve_flux_level(FBAR, cond_rise, v)


def tag_for(label, cond, lset, v):
    model = "M1" if label[0] in "AB" else "M2"
    rm, rp = case_states(label, lset)
    return classify(cond, rm, rp, v, model=model)


@pytest.fixture(scope="session")
def a1_family(cond_drop, lset_drop, v, kern):
    """Five ordered members on [-3, 3] at the working resolution."""
    tag = tag_for("A1", cond_drop, lset_drop, v)
    traces = [0.35, 0.45, 0.55, 0.65, 0.75]
    return build_profile_family(tag, lset_drop, cond_drop, v, kern, DX, -3.0, 3.0, traces)


@pytest.fixture(scope="session")
def c1_family(cond_drop, lset_drop, v, kern):
    tag = tag_for("C1", cond_drop, lset_drop, v)
    return build_profile_family_m2(
        tag, lset_drop, cond_drop, v, kern, DX, -3.0, 3.0, [0.45, 0.6, 0.75]
    )
