"""Stationary profiles for the averaged-speed-limit model (M2).

Here the speed factor sits inside the window average,

    P(x) * V(x) = fbar,   V(x) = integral of kappa(x+s) v(P(x+s)) w(s) ds,

so stationary profiles are continuous across x = 0 but their derivative
jumps there by a computable amount (the kernel weight w(0) times the flux
drop across the speed-limit step).  Marching is again backward; each nodal
solve integrates the window with a 4-point Gauss rule per cell, splitting
no cell because the jump lands on a node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowupError, DomainError, RootSolveError, TraceError
from .model import (
    CaseTag,
    FluxLevelSet,
    Kernel,
    RoadCondition,
    VelocityModel,
    case_states,
    homogeneous_states,
)
from .nonlocal_ops import GridFunction, average_velocity_m2
from .profile_m1 import (
    MarchReport,
    Profile,
    _apply_monotone,
    _check_trace,
    _FTOL,
    enforce_family_order,
    homogeneous_front_values,
)

_GL4_NODES, _GL4_WEIGHTS = np.polynomial.legendre.leggauss(4)
# in-cell fractions and quadrature weights on (0,1)
_LAM = 0.5 * (_GL4_NODES + 1.0)
_GLW = 0.5 * _GL4_WEIGHTS


class _M2NodeSolver:
    """Solves q * V(q) = fbar for one new node, where V(q) carries the
    first window cell's dependence on q and the rest is frozen."""

    def __init__(
        self,
        v: VelocityModel,
        kernel: Kernel,
        dx: float,
        fbar: float,
        cond: RoadCondition,
        i0: int | None = None,
    ):
        m = int(round(kernel.h / dx))
        if abs(m * dx - kernel.h) > 1e-9 * kernel.h:
            raise DomainError("window length must be an integer multiple of dx")
        self.m = m
        self.dx = dx
        self.fbar = float(fbar)
        self.cond = cond
        self.i0 = i0
        self.vf = v.eval
        self.dvf = v.deriv
        # quadrature abscissae per window cell and the kernel weights there
        s = (np.arange(m)[:, None] + _LAM[None, :]) * dx
        self.wq = np.asarray(kernel.eval(s), dtype=float) * (_GLW[None, :] * dx)
        self.lam = _LAM
        self.split = cond.kappa_minus != cond.kappa_plus

    def _kappas(self, i: int) -> np.ndarray:
        """Speed factor per window cell of node i (cell k ends at node i+k+1)."""
        if not self.split or self.i0 is None:
            return np.full(self.m, self.cond.kappa_plus)
        k = np.arange(self.m)
        return np.where(i + k + 1 <= self.i0, self.cond.kappa_minus, self.cond.kappa_plus)

    def parts(self, arr: np.ndarray, i: int) -> tuple[float, float, np.ndarray]:
        """(rest, kappa0, wq0): frozen window part and the first-cell data."""
        m = self.m
        kap = self._kappas(i)
        a = arr[i + 1 : i + m]
        b = arr[i + 2 : i + m + 1]
        dens = a[:, None] + (b - a)[:, None] * self.lam[None, :]
        rest = float(np.sum(kap[1:] * np.sum(self.wq[1:] * np.asarray(self.vf(dens)), axis=1)))
        return rest, float(kap[0]), self.wq[0]

    def solve(self, arr: np.ndarray, i: int, q_init: float, report: MarchReport | None) -> float:
        fbar = self.fbar
        if fbar == 0.0:
            return 0.0
        rest, kap0, wq0 = self.parts(arr, i)
        b = arr[i + 1]
        lam = self.lam
        vf, dvf = self.vf, self.dvf

        def speed(q: float) -> float:
            dens0 = q + (b - q) * lam
            return rest + kap0 * float(np.dot(wq0, np.asarray(vf(dens0))))

        g_hi = speed(1.0) - fbar
        if g_hi < 0.0:
            raise BlowupError(
                f"no admissible density at node {i}: even q=1 cannot carry the flux",
                x=None,
            )
        lo, hi = 0.0, 1.0
        q = min(max(q_init, 1e-12), 1.0)
        slope = math.inf
        for _ in range(60):
            dens0 = q + (b - q) * lam
            vel = rest + kap0 * float(np.dot(wq0, np.asarray(vf(dens0))))
            g = q * vel - fbar
            if abs(g) <= _FTOL:
                break
            if g > 0.0:
                hi = q
            else:
                lo = q
            dvel = kap0 * float(np.dot(wq0 * (1.0 - lam), np.asarray(dvf(dens0))))
            slope = vel + q * dvel
            if slope > 0.0:
                q_new = q - g / slope
                if lo < q_new < hi:
                    q = q_new
                    continue
            if report is not None:
                report.fallback_nodes.append(i)
            q = 0.5 * (lo + hi)
        else:
            raise RootSolveError(f"nodal solve did not converge at node {i}")
        if report is not None:
            report.min_slope = min(report.min_slope, slope)
        return q


def march_backward_m2(
    plus_branch: GridFunction,
    cond: RoadCondition,
    v: VelocityModel,
    kernel: Kernel,
    fbar: float,
    x_min: float,
    monotone: str | None = None,
    report: MarchReport | None = None,
) -> GridFunction:
    """Extend a continuous branch on [0, x_max] down to x_min.

    Each new node solves q * V(x; q) = fbar to |residual| <= 1e-14, with
    the speed factor applied per window cell (kappa_minus left of the
    step, kappa_plus from it on).
    """
    if plus_branch.i0 != 0:
        raise DomainError("seed branch must start at x = 0")
    if plus_branch.left_trace_at_zero is not None:
        raise DomainError("M2 profiles are continuous; the seed must carry no trace")
    dx = plus_branch.dx
    m = int(round(kernel.h / dx))
    if plus_branch.n < m + 1:
        raise DomainError("seed branch must cover at least one window")
    n_new = int(round(-x_min / dx))
    if n_new < 1 or abs(x_min + n_new * dx) > 1e-9 * dx:
        raise DomainError(f"x_min={x_min!r} must be a negative whole number of cells")
    vals = np.concatenate([np.empty(n_new), plus_branch.values])
    i0 = n_new
    solver = _M2NodeSolver(v, kernel, dx, fbar, cond, i0=i0)
    for i in range(i0 - 1, -1, -1):
        try:
            q = solver.solve(vals, i, vals[i + 1], report)
        except BlowupError as e:
            raise BlowupError(str(e), x=(i - i0) * dx) from None
        vals[i] = _apply_monotone(q, vals[i + 1], monotone, report)
    return GridFunction(x0=x_min, dx=dx, values=vals)


def build_profile_family_m2(
    case: CaseTag,
    lset: FluxLevelSet,
    cond: RoadCondition,
    v: VelocityModel,
    kernel: Kernel,
    dx: float,
    x_min: float,
    x_max: float,
    traces: list[float],
    report: MarchReport | None = None,
) -> list[Profile]:
    """Distinct continuous profiles through the requested values at x = 0
    (cases C1 and D1), sorted by trace and strictly ordered nodewise."""
    if case.model != "M2" or case.label not in ("C1", "D1"):
        raise DomainError(f"case {case.label} is not an M2 one-parameter family")
    if not traces:
        raise DomainError("need at least one trace")
    for t in traces:
        _check_trace(t, case, lset, cond)
    members = []
    for t in sorted(traces):
        members.append(_m2_member(t, case, lset, cond, v, kernel, dx, x_min, x_max, report))
    return enforce_family_order(members, cond, v, kernel)


def _m2_member(
    trace: float,
    case: CaseTag,
    lset: FluxLevelSet,
    cond: RoadCondition,
    v: VelocityModel,
    kernel: Kernel,
    dx: float,
    x_min: float,
    x_max: float,
    report: MarchReport | None,
) -> Profile:
    fbar = lset.fbar
    rho_minus, rho_plus = case_states(case.label, lset)
    w_left, w_right = homogeneous_states(case.label, lset)
    n_right = int(round(x_max / dx))
    if n_right * dx < kernel.h:
        raise DomainError("x_max must cover at least one window")
    near = 1e-12
    if trace >= w_right - near:
        branch_vals = np.full(n_right + 1, w_right)
        rho_right = w_right
        monotone = "increasing" if case.label == "C1" else None
    elif trace <= w_left + near:
        branch_vals = np.full(n_right + 1, w_left)
        rho_right = w_left
        monotone = "decreasing"
    else:
        branch_vals = homogeneous_front_values(
            cond.kappa_plus, w_right, trace, v, kernel, dx, n_right, model="M2"
        )
        rho_right = w_right
        monotone = "increasing" if case.label == "C1" else None
    branch = GridFunction(x0=0.0, dx=dx, values=branch_vals)
    grid = march_backward_m2(branch, cond, v, kernel, fbar, x_min, monotone=monotone, report=report)
    res = residual_m2(None, cond, v, kernel, grid=grid, fbar=fbar, rho_right=rho_right)
    t0 = float(grid.values[grid.i0])
    return Profile(
        grid=grid,
        model="M2",
        fbar=fbar,
        case=case,
        trace_minus=t0,
        trace_plus=t0,
        rho_left=rho_minus,
        rho_right=rho_right,
        residual_sup=res,
    )


def build_unique_profile_m2(
    case: CaseTag,
    lset: FluxLevelSet,
    cond: RoadCondition,
    v: VelocityModel,
    kernel: Kernel,
    dx: float,
    x_min: float,
    x_max: float,
    report: MarchReport | None = None,
) -> Profile:
    """The single profile of C2 or D2: constant rho_plus on x >= 0 and a
    monotone continuation.  Digit-3/4 cases are refused."""
    if case.model != "M2":
        raise DomainError("use the M1 builder for A/B cases")
    if case.multiplicity == "none":
        raise DomainError(f"case {case.label} admits no stationary profile")
    if case.label not in ("C2", "D2"):
        raise DomainError(f"case {case.label} is a family; use build_profile_family_m2")
    rho_minus, rho_plus = case_states(case.label, lset)
    fbar = lset.fbar
    n_right = int(round(x_max / dx))
    branch = GridFunction(x0=0.0, dx=dx, values=np.full(n_right + 1, rho_plus))
    monotone = "increasing" if rho_minus < rho_plus else "decreasing"
    grid = march_backward_m2(branch, cond, v, kernel, fbar, x_min, monotone=monotone, report=report)
    res = residual_m2(None, cond, v, kernel, grid=grid, fbar=fbar, rho_right=rho_plus)
    return Profile(
        grid=grid,
        model="M2",
        fbar=fbar,
        case=case,
        trace_minus=rho_plus,
        trace_plus=rho_plus,
        rho_left=rho_minus,
        rho_right=rho_plus,
        residual_sup=res,
    )


def residual_m2(
    profile: Profile | None,
    cond: RoadCondition,
    v: VelocityModel,
    kernel: Kernel,
    grid: GridFunction | None = None,
    fbar: float | None = None,
    rho_right: float | None = None,
) -> float:
    """Sup over nodes of |P V(P; x) - fbar|, the window average taken with
    the speed factor split exactly at x = 0."""
    if profile is not None:
        grid, fbar, rho_right = profile.grid, profile.fbar, profile.rho_right
    worst = 0.0
    for i in range(grid.n):
        vel = average_velocity_m2(grid, i, kernel, cond, v, pad=rho_right)
        worst = max(worst, abs(float(grid.values[i]) * vel - fbar))
    return worst


@dataclass(frozen=True)
class KinkReport:
    """One-sided slopes at x = 0 and the derivative jump they exhibit,
    against the jump the flux constraint dictates:

        [P'] = (kappa_plus - kappa_minus) * P(0) v(P(0)) w(0) / V(0).
    """

    left_slope: float
    right_slope: float
    observed_jump: float
    predicted_jump: float
    relative_error: float


def kink_certificate(
    profile: Profile,
    cond: RoadCondition,
    v: VelocityModel,
    kernel: Kernel,
) -> KinkReport:
    """Measure the derivative jump of an M2 profile at x = 0 with one-sided
    3-point stencils and compare it with the predicted kink."""
    if profile.model != "M2":
        raise DomainError("kink certificates only apply to M2 profiles")
    g = profile.grid
    i0, dx = g.i0, g.dx
    if i0 < 2 or i0 > g.n - 3:
        raise DomainError("need two nodes on each side of x = 0")
    p = g.values
    right = (-3.0 * p[i0] + 4.0 * p[i0 + 1] - p[i0 + 2]) / (2.0 * dx)
    left = (3.0 * p[i0] - 4.0 * p[i0 - 1] + p[i0 - 2]) / (2.0 * dx)
    p0 = float(p[i0])
    v0 = average_velocity_m2(g, i0, kernel, cond, v, pad=profile.rho_right)
    w0 = float(np.asarray(kernel.eval(0.0)))
    predicted = (cond.kappa_plus - cond.kappa_minus) * p0 * float(np.asarray(v.eval(p0))) * w0 / v0
    if abs(predicted) < 1e-14:
        raise DomainError("predicted slope jump is zero; no kink to certify")
    observed = right - left
    rel = abs(observed - predicted) / max(abs(predicted), 1e-300)
    return KinkReport(
        left_slope=left,
        right_slope=right,
        observed_jump=observed,
        predicted_jump=predicted,
        relative_error=rel,
    )
