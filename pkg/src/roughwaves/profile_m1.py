"""Stationary profiles for the jump-speed model (M1).

A stationary profile Q satisfies, at every node,

    Q(x) * v(A(Q; x)) = fbar / kappa(x)

with a single multiplicative jump at x = 0:
kappa_minus * Q(0-) = kappa_plus * Q(0+).  The downstream window makes
backward marching (decreasing x) the well-posed direction: each new nodal
value solves a scalar equation whose window is already known.

The x > 0 part of a profile is a translate of the homogeneous front W
(constant speed factor kappa_plus) connecting the conjugate pair of its
right asymptote.  W is produced by seeding the far-right window with a
tiny linear deviation below rho_plus and marching backward; the deviation
amplitude is then tuned (a scalar shoot) so the stored front passes through
the requested value exactly at the node x = 0.  This keeps every stored
node an exact solution of the nodal equation, which a sampled translate
would not be.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import (
    AssumptionError,
    BlowupError,
    DomainError,
    RootSolveError,
    SeedError,
    TraceError,
)
from .model import CaseTag, FluxLevelSet, Kernel, RoadCondition, VelocityModel, case_states, flux, homogeneous_states, stagnation_point
from .nonlocal_ops import GridFunction, average_density

# Deviations this small against a marched neighbour are treated as rounding
# noise from the nodal solves and tied off; anything larger is a genuine
# shape feature and is left alone (and reported).
_REPAIR_CAP = 1e-12
_ORDER_TOL = 1e-11
_FTOL = 1e-14


@dataclass
class MarchReport:
    """Per-march diagnostics: which nodes needed the bisection fallback,
    the smallest equation slope seen at a root, and how much rounding-level
    monotonicity repair was applied."""

    fallback_nodes: list = field(default_factory=list)
    min_slope: float = math.inf
    repaired_nodes: int = 0
    max_repair: float = 0.0
    genuine_violations: int = 0

    def merge(self, other: "MarchReport") -> None:
        self.fallback_nodes.extend(other.fallback_nodes)
        self.min_slope = min(self.min_slope, other.min_slope)
        self.repaired_nodes += other.repaired_nodes
        self.max_repair = max(self.max_repair, other.max_repair)
        self.genuine_violations += other.genuine_violations


@dataclass(frozen=True)
class Profile:
    """A stationary profile with its metadata.

    trace_minus / trace_plus are the limits at x = 0 (equal for profiles
    without a jump).  rho_left / rho_right are the asymptotic constants and
    double as padding values when an averaging window leaves the grid.
    residual_sup is the certified sup-norm of the nodal equation residual.
    """

    grid: GridFunction
    model: str
    fbar: float
    case: CaseTag | None
    trace_minus: float
    trace_plus: float
    rho_left: float
    rho_right: float
    residual_sup: float

    def eval(self, x):
        return self.grid.eval(x, pad_right=self.rho_right, pad_left=self.rho_left)

    @property
    def xs(self) -> np.ndarray:
        return self.grid.xs()


def _combined_weights(omega: np.ndarray, mu: np.ndarray, dx: float) -> np.ndarray:
    """Nodal weights u so that A = sum_k u_k * Q_{i+k} for trace-free data:
    collects each cell's a*omega + (b-a)*mu/dx contributions per node."""
    m = omega.size
    u = np.empty(m + 1)
    mud = mu / dx
    u[0] = omega[0] - mud[0]
    if m > 1:
        u[1:m] = omega[1:] - mud[1:] + mud[:-1]
    u[m] = mud[m - 1]
    return u


class _M1NodeSolver:
    """Solves the nodal equation q * v(A(q)) = target for one new node,
    where A(q) = c0*q + (window contribution of the already-known nodes)."""

    def __init__(
        self,
        v: VelocityModel,
        kernel: Kernel,
        dx: float,
        target: float,
        i0: int | None = None,
        trace: float | None = None,
    ):
        omega, mu = kernel.cell_moments(dx)
        self.m = omega.size
        self.dx = dx
        self.mu = mu
        self.u = _combined_weights(omega, mu, dx)
        self.u1 = self.u[1:]
        self.c0 = self.u[0]
        self.target = float(target)
        self.i0 = i0
        self.trace = trace
        self.vf = v.eval
        self.dvf = v.deriv

    def window_rest(self, arr: np.ndarray, i: int) -> float:
        rest = float(np.dot(arr[i + 1 : i + self.m + 1], self.u1))
        if self.trace is not None:
            k = self.i0 - i - 1
            if 0 <= k < self.m:
                rest += (self.trace - arr[self.i0]) * self.mu[k] / self.dx
        return rest

    def solve(self, arr: np.ndarray, i: int, q_init: float, report: MarchReport | None) -> float:
        target = self.target
        if target == 0.0:
            return 0.0
        rest = self.window_rest(arr, i)
        c0 = self.c0
        vf, dvf = self.vf, self.dvf
        g_hi = float(vf(c0 + rest)) - target
        if g_hi < 0.0:
            raise BlowupError(
                f"no admissible density at node {i}: even q=1 cannot carry the flux",
                x=None,
            )
        lo, hi = 0.0, 1.0
        q = min(max(q_init, 1e-12), 1.0)
        slope = math.inf
        for _ in range(60):
            a = c0 * q + rest
            ve = float(vf(a))
            g = q * ve - target
            if abs(g) <= _FTOL:
                break
            if g > 0.0:
                hi = q
            else:
                lo = q
            slope = ve + q * float(dvf(a)) * c0
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


def _apply_monotone(q: float, neighbor: float, mode: str | None, report: MarchReport | None) -> float:
    """Tie off rounding-level violations of the expected monotonicity."""
    if mode is None:
        return q
    if mode == "increasing":
        excess = q - neighbor
    elif mode == "decreasing":
        excess = neighbor - q
    else:
        raise DomainError(f"unknown monotonicity mode {mode!r}")
    if excess <= 0.0:
        return q
    if excess <= _REPAIR_CAP:
        if report is not None:
            report.repaired_nodes += 1
            report.max_repair = max(report.max_repair, excess)
        return neighbor
    if report is not None:
        report.genuine_violations += 1
    return q


def march_backward(
    plus_branch: GridFunction,
    cond: RoadCondition,
    v: VelocityModel,
    kernel: Kernel,
    fbar: float,
    x_min: float,
    monotone: str | None = None,
    report: MarchReport | None = None,
) -> GridFunction:
    """Extend a branch stored on [0, x_max] down to x_min by backward marching.

    The seed must start at x = 0 (its left trace, if any, is the value the
    first marched cell connects to).  Each new node solves the x < 0 nodal
    equation with target fbar / kappa_minus to |residual| <= 1e-14; a node
    where even q = 1 cannot reach the target raises BlowupError.
    """
    if plus_branch.i0 != 0:
        raise DomainError("seed branch must start at x = 0")
    if plus_branch.n < int(round(kernel.h / plus_branch.dx)) + 1:
        raise DomainError("seed branch must cover at least one window")
    dx = plus_branch.dx
    n_new = int(round(-x_min / dx))
    if n_new < 1 or abs(x_min + n_new * dx) > 1e-9 * dx:
        raise DomainError(f"x_min={x_min!r} must be a negative whole number of cells")
    trace = plus_branch.left_trace_at_zero
    vals = np.concatenate([np.empty(n_new), plus_branch.values])
    i0 = n_new
    solver = _M1NodeSolver(v, kernel, dx, fbar / cond.kappa_minus, i0=i0, trace=trace)
    for i in range(i0 - 1, -1, -1):
        neighbor = trace if (trace is not None and i == i0 - 1) else vals[i + 1]
        try:
            q = solver.solve(vals, i, neighbor, report)
        except BlowupError as e:
            raise BlowupError(str(e), x=(i - i0) * dx) from None
        vals[i] = _apply_monotone(q, neighbor, monotone, report)
    return GridFunction(x0=x_min, dx=dx, values=vals, left_trace_at_zero=trace)


# ---------------------------------------------------------------------------
# homogeneous front and the amplitude shoot

def _march_column(solver, rho_plus: float, eps: float, count: int, m: int) -> np.ndarray:
    """March `count` nodes below a seeded far-right window.

    The seed occupies the top m+1 entries: rho_plus minus a linear ramp of
    amplitude eps (zero at the very end).  Entry 0 is the deepest node."""
    arr = np.empty(count + m + 1)
    ramp = (np.arange(m + 1)[::-1]) / m
    arr[count:] = rho_plus - eps * ramp
    for j in range(count - 1, -1, -1):
        arr[j] = solver.solve(arr, j, arr[j + 1], None)
    return arr


def _shoot_branch(
    solver,
    rho_plus: float,
    rho_left: float,
    target: float,
    dx: float,
    m: int,
    n_right: int,
    h: float,
) -> np.ndarray:
    """Values on [0, n_right*dx] of the homogeneous front passing through
    `target` at node 0, found by tuning the seed amplitude."""
    gap = rho_plus - rho_left
    eps0 = max(1e-12 * gap, 64.0 * np.spacing(rho_plus))
    budget = max(int(round(60.0 * h / dx)), n_right + m + 1)

    # reference march: how many nodes until the front first dips below target
    arr = np.empty(budget + m + 1)
    ramp = (np.arange(m + 1)[::-1]) / m
    arr[budget:] = rho_plus - eps0 * ramp
    k_cross = None
    for j in range(budget - 1, -1, -1):
        arr[j] = solver.solve(arr, j, arr[j + 1], None)
        if arr[j] < target:
            k_cross = budget - j
            break
    if k_cross is None:
        raise SeedError(
            f"front never reached {target!r} within {budget} nodes; "
            "seed perturbation may be below rounding"
        )

    def g(log_eps: float) -> float:
        col = _march_column(solver, rho_plus, math.exp(log_eps), k_cross, m)
        return col[0] - target

    t_hi = math.log(eps0)
    g_hi = arr[budget - k_cross] - target  # == g(t_hi), already marched
    if g_hi == 0.0:
        eps_star = eps0
    else:
        t_lo = t_hi
        g_lo = g_hi
        for _ in range(60):
            t_lo -= math.log(2.0)
            if math.exp(t_lo) < 4.0 * np.spacing(rho_plus):
                raise SeedError("seed amplitude collapsed while shooting the trace")
            g_lo = g(t_lo)
            if g_lo > 0.0:
                break
        else:
            raise SeedError("could not bracket the trace while tuning the seed")
        eps_star = math.exp(brentq(g, t_lo, t_hi, xtol=1e-13, rtol=8.9e-16))

    col = _march_column(solver, rho_plus, eps_star, k_cross, m)
    branch = np.empty(n_right + 1)
    take = min(n_right + 1, col.size)
    branch[:take] = col[:take]
    if take < n_right + 1:
        branch[take:] = rho_plus
    return branch


def _homog_solver(model: str, kappa: float, rho_plus: float, v, kernel, dx):
    fbar = kappa * rho_plus * float(np.asarray(v.eval(rho_plus)))
    if model == "M1":
        return _M1NodeSolver(v, kernel, dx, fbar / kappa), fbar
    from .profile_m2 import _M2NodeSolver

    return _M2NodeSolver(v, kernel, dx, fbar, RoadCondition(kappa, kappa)), fbar


def homogeneous_front_values(
    kappa: float,
    rho_plus: float,
    trace: float,
    v: VelocityModel,
    kernel: Kernel,
    dx: float,
    n_right: int,
    model: str = "M1",
) -> np.ndarray:
    """x >= 0 values of the constant-speed-factor front through (0, trace)."""
    rhohat = stagnation_point(v)
    if not rho_plus > rhohat:
        raise DomainError("the right asymptote of a front must exceed the stagnation density")
    solver, fbar = _homog_solver(model, kappa, rho_plus, v, kernel, dx)
    from .model import solve_flux_level  # local import: avoids cycle at module load

    lset = solve_flux_level(fbar, RoadCondition(kappa, kappa), v)
    rho_left = lset.rho1
    if not (rho_left < trace < rho_plus):
        raise TraceError(
            f"front value {trace!r} outside the open range ({rho_left!r}, {rho_plus!r})"
        )
    m = int(round(kernel.h / dx))
    return _shoot_branch(solver, rho_plus, rho_left, trace, dx, m, n_right, kernel.h)


def build_homogeneous_profile(
    kappa: float,
    rho_plus: float,
    v: VelocityModel,
    kernel: Kernel,
    dx: float,
    domain_len: float,
    model: str = "M1",
    report: MarchReport | None = None,
) -> Profile:
    """Full monotone front for a constant speed factor on [-L, L] with
    L = domain_len / 2, normalized to pass through the midpoint of its
    asymptote pair at x = 0.  A non-monotone march is a failed build."""
    solver, fbar = _homog_solver(model, kappa, rho_plus, v, kernel, dx)
    from .model import solve_flux_level

    cond = RoadCondition(kappa, kappa)
    lset = solve_flux_level(fbar, cond, v)
    rho_left = lset.rho1
    midpoint = 0.5 * (rho_left + rho_plus)
    n_right = int(round(0.5 * domain_len / dx))
    if n_right * dx < kernel.h:
        raise DomainError("domain_len must cover at least one window each side")
    x_min = -n_right * dx
    branch_vals = homogeneous_front_values(kappa, rho_plus, midpoint, v, kernel, dx, n_right, model)
    branch = GridFunction(x0=0.0, dx=dx, values=branch_vals)
    rep = report if report is not None else MarchReport()
    if model == "M1":
        grid = march_backward(branch, cond, v, kernel, fbar, x_min, monotone="increasing", report=rep)
        res = residual(None, cond, v, kernel, grid=grid, fbar=fbar, rho_right=rho_plus)
    else:
        from .profile_m2 import march_backward_m2, residual_m2

        grid = march_backward_m2(branch, cond, v, kernel, fbar, x_min, monotone="increasing", report=rep)
        res = residual_m2(None, cond, v, kernel, grid=grid, fbar=fbar, rho_right=rho_plus)
    if rep.genuine_violations:
        raise AssumptionError(
            f"front march lost monotonicity at {rep.genuine_violations} node(s)"
        )
    t0 = float(grid.values[grid.i0])
    return Profile(
        grid=grid,
        model=model,
        fbar=fbar,
        case=None,
        trace_minus=t0,
        trace_plus=t0,
        rho_left=rho_left,
        rho_right=rho_plus,
        residual_sup=res,
    )


# ---------------------------------------------------------------------------
# case profiles

def admissible_trace_range(case: CaseTag, lset: FluxLevelSet, cond: RoadCondition) -> tuple[float, float, bool, bool]:
    """(lo, hi, lo_closed, hi_closed) for the x = 0+ trace of a digit-1 case.

    The bounds are the kappa_plus-branch roots (the front's asymptote
    pair).  A1/C1 families reach up to the constant right branch but not
    down to the conjugate; B1/D1 include the lower envelope instead, and
    B1 additionally caps the trace at kappa_minus/kappa_plus so the jump
    stays inside [0,1].
    """
    lo, hi = lset.rho2, lset.rho3
    if case.label in ("A1", "C1"):
        return lo, hi, False, True
    if case.label == "B1":
        cap = cond.kappa_minus / cond.kappa_plus
        return lo, min(hi, cap), True, cap < hi
    if case.label == "D1":
        return lo, hi, True, False
    raise DomainError(f"case {case.label} has no one-parameter family")


def _check_trace(trace: float, case: CaseTag, lset: FluxLevelSet, cond: RoadCondition) -> None:
    lo, hi, lo_closed, hi_closed = admissible_trace_range(case, lset, cond)
    ok_lo = trace >= lo if lo_closed else trace > lo
    ok_hi = trace <= hi if hi_closed else trace < hi
    if not (ok_lo and ok_hi):
        kind = "[" if lo_closed else "("
        kind2 = "]" if hi_closed else ")"
        raise TraceError(
            f"trace {trace!r} outside the admissible range {kind}{lo!r}, {hi!r}{kind2} for {case.label}"
        )


def _constant_branch(value: float, dx: float, n_right: int) -> GridFunction:
    return GridFunction(x0=0.0, dx=dx, values=np.full(n_right + 1, float(value)))


def _m1_member(
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
    """One family member: front (or constant) on x > 0, jump, left march."""
    fbar = lset.fbar
    rho_minus, rho_plus = case_states(case.label, lset)
    w_left, w_right = homogeneous_states(case.label, lset)
    n_right = int(round(x_max / dx))
    near = 1e-12
    if trace >= rho_plus - near:
        branch_vals = np.full(n_right + 1, rho_plus)
        rho_right = rho_plus
        monotone = "increasing" if case.label == "A1" else None
    elif trace <= w_left + near:
        # lower envelope: the x > 0 side sits identically at the front's
        # left asymptote, which carries the same flux level
        branch_vals = np.full(n_right + 1, w_left)
        rho_right = w_left
        monotone = "decreasing"
    else:
        branch_vals = homogeneous_front_values(
            cond.kappa_plus, rho_plus, trace, v, kernel, dx, n_right, model="M1"
        )
        rho_right = rho_plus
        monotone = "increasing" if case.label == "A1" else None
    trace_plus = float(branch_vals[0])
    trace_minus = cond.kappa_plus * trace_plus / cond.kappa_minus
    if trace_minus > 1.0:
        raise TraceError(
            f"left trace {trace_minus!r} exceeds 1; trace {trace!r} inadmissible for {case.label}"
        )
    branch = GridFunction(x0=0.0, dx=dx, values=branch_vals, left_trace_at_zero=trace_minus)
    grid = march_backward(branch, cond, v, kernel, fbar, x_min, monotone=monotone, report=report)
    res = residual(None, cond, v, kernel, grid=grid, fbar=fbar, rho_right=rho_right)
    return Profile(
        grid=grid,
        model="M1",
        fbar=fbar,
        case=case,
        trace_minus=trace_minus,
        trace_plus=trace_plus,
        rho_left=rho_minus,
        rho_right=rho_right,
        residual_sup=res,
    )


def build_profile_family(
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
    """Distinct profiles through the requested x = 0+ traces (digit-1 cases).

    Members are returned sorted by trace and strictly ordered nodewise;
    rounding-level ties in the merged tails are broken by one-ulp nudges.
    """
    if case.model != "M1" or case.label not in ("A1", "B1"):
        raise DomainError(f"case {case.label} is not an M1 one-parameter family")
    if not traces:
        raise DomainError("need at least one trace")
    for t in traces:
        _check_trace(t, case, lset, cond)
    members = []
    for t in sorted(traces):
        members.append(_m1_member(t, case, lset, cond, v, kernel, dx, x_min, x_max, report))
    members = enforce_family_order(members, cond, v, kernel)
    return members


def build_unique_profile(
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
    """The single profile of a digit-2 case: constant rho_plus on x > 0,
    jump, monotone left branch.  Digit-3/4 cases have no profile at all
    and are refused."""
    if case.model != "M1":
        raise DomainError("use the M2 builder for C/D cases")
    if case.multiplicity == "none":
        raise DomainError(f"case {case.label} admits no stationary profile")
    if case.label not in ("A2", "B2"):
        raise DomainError(f"case {case.label} is a family; use build_profile_family")
    rho_minus, rho_plus = case_states(case.label, lset)
    fbar = lset.fbar
    n_right = int(round(x_max / dx))
    trace_minus = cond.kappa_plus * rho_plus / cond.kappa_minus
    if trace_minus > 1.0:
        raise TraceError(f"left trace {trace_minus!r} exceeds 1; no admissible profile")
    branch = GridFunction(
        x0=0.0, dx=dx, values=np.full(n_right + 1, rho_plus), left_trace_at_zero=trace_minus
    )
    monotone = "increasing" if trace_minus > rho_minus else "decreasing"
    grid = march_backward(branch, cond, v, kernel, fbar, x_min, monotone=monotone, report=report)
    res = residual(None, cond, v, kernel, grid=grid, fbar=fbar, rho_right=rho_plus)
    return Profile(
        grid=grid,
        model="M1",
        fbar=fbar,
        case=case,
        trace_minus=trace_minus,
        trace_plus=rho_plus,
        rho_left=rho_minus,
        rho_right=rho_plus,
        residual_sup=res,
    )


# The unique-profile builder dispatches on the case tag, so the A2-named
# entry point is the same callable.
build_unique_profile_a2 = build_unique_profile


def enforce_family_order(
    members: list[Profile],
    cond: RoadCondition,
    v: VelocityModel,
    kernel: Kernel,
) -> list[Profile]:
    """Make a trace-sorted family strictly ordered at every node.

    Exponential tails of distinct members merge below double precision, so
    ties (and sub-rounding inversions) are broken by pulling the lower
    member one ulp under the upper one.  Inversions larger than rounding
    noise mean the members genuinely cross and are an error.
    """
    members = sorted(members, key=lambda p: p.trace_plus)
    out = [members[-1]]
    for lower in reversed(members[:-1]):
        upper = out[0]
        viol = float(np.max(lower.grid.values - upper.grid.values))
        if viol > _ORDER_TOL:
            raise TraceError(
                f"family members with traces {lower.trace_plus!r} and {upper.trace_plus!r} "
                f"cross by {viol!r}"
            )
        capped = np.minimum(lower.grid.values, np.nextafter(upper.grid.values, -np.inf))
        tm = lower.trace_minus
        if upper.trace_minus is not None and tm >= upper.trace_minus:
            tm = float(np.nextafter(upper.trace_minus, -np.inf))
        if np.array_equal(capped, lower.grid.values) and tm == lower.trace_minus:
            out.insert(0, lower)
            continue
        grid = GridFunction(
            x0=lower.grid.x0,
            dx=lower.grid.dx,
            values=capped,
            left_trace_at_zero=tm if lower.grid.left_trace_at_zero is not None else None,
        )
        if lower.model == "M1":
            res = residual(None, cond, v, kernel, grid=grid, fbar=lower.fbar, rho_right=lower.rho_right)
        else:
            from .profile_m2 import residual_m2

            res = residual_m2(None, cond, v, kernel, grid=grid, fbar=lower.fbar, rho_right=lower.rho_right)
        out.insert(
            0,
            replace(
                lower,
                grid=grid,
                trace_minus=tm,
                trace_plus=float(capped[grid.i0]),
                residual_sup=res,
            ),
        )
    return out


def residual(
    profile: Profile | None,
    cond: RoadCondition,
    v: VelocityModel,
    kernel: Kernel,
    grid: GridFunction | None = None,
    fbar: float | None = None,
    rho_right: float | None = None,
) -> float:
    """Sup over nodes of |kappa(x) Q v(A(Q; x)) - fbar|.

    At the node x = 0 the left trace and kappa_minus are used (the right
    trace is tied to it exactly by the jump relation).  Windows past the
    right end pad with the declared asymptote.
    """
    if profile is not None:
        grid, fbar, rho_right = profile.grid, profile.fbar, profile.rho_right
    worst = 0.0
    i0 = grid.i0
    has_trace = grid.left_trace_at_zero is not None
    for i in range(grid.n):
        a = average_density(grid, i, kernel, pad=rho_right)
        if i == i0 and has_trace:
            val, kap = grid.left_trace_at_zero, cond.kappa_minus
        elif i < i0:
            val, kap = float(grid.values[i]), cond.kappa_minus
        else:
            val, kap = float(grid.values[i]), cond.kappa_plus
        worst = max(worst, abs(kap * val * float(np.asarray(v.eval(a))) - fbar))
    return worst
