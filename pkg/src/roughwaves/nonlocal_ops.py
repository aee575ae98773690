"""Nodal grid functions and the downstream averaging operators.

Profiles are stored as nodal values with piecewise-linear reconstruction.
A density may be double-valued at x = 0 (models with a jump store the left
limit separately), so the reconstruction on the cell ending at 0 uses the
left trace while the cell starting at 0 uses the nodal value.

The averaging operator

    A(Q; x_i) = integral over [0,h] of Q(x_i + s) w(s) ds

is evaluated exactly for the reconstruction by per-cell kernel moments:
cell k of the window contributes a*omega_k + (b-a)*mu_k/dx where a, b are
the endpoint values.  Windows that run past the stored range are padded
with a caller-supplied asymptotic constant.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import DomainError, WindowError

if TYPE_CHECKING:
    from .model import Kernel, RoadCondition, VelocityModel

_GL4_NODES, _GL4_WEIGHTS = np.polynomial.legendre.leggauss(4)


@dataclass(frozen=True)
class GridFunction:
    """Nodal values on a uniform grid x_i = x0 + i*dx.

    The grid must be aligned so that x = 0 falls on a node position (the
    node itself may lie outside the stored range).  left_trace_at_zero, if
    set, is the left limit at the node x = 0; values[i0] then holds the
    right limit.
    """

    x0: float
    dx: float
    values: np.ndarray
    left_trace_at_zero: float | None = None
    i0: int = field(init=False, repr=False)

    def __post_init__(self):
        if self.dx <= 0.0:
            raise DomainError("dx must be positive")
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 2:
            raise DomainError("values must be a 1-D array with at least two nodes")
        object.__setattr__(self, "values", vals)
        i0 = int(round(-self.x0 / self.dx))
        if abs(self.x0 + i0 * self.dx) > 1e-9 * self.dx:
            raise DomainError(
                f"grid origin {self.x0!r} does not align x=0 with a node at spacing {self.dx!r}"
            )
        object.__setattr__(self, "i0", i0)
        if self.left_trace_at_zero is not None and not (0 <= i0 < vals.size):
            raise DomainError("left trace given but x=0 is outside the stored grid")

    @property
    def n(self) -> int:
        return self.values.size

    def x(self, i: int) -> float:
        return (i - self.i0) * self.dx

    def xs(self) -> np.ndarray:
        return (np.arange(self.n) - self.i0) * self.dx

    def node_right(self, i: int, pad: float | None = None) -> float:
        """Value at node i as seen from the right (start of a cell)."""
        if i >= self.n:
            if pad is None:
                raise WindowError(f"node {i} beyond stored range and no padding value")
            return pad
        return float(self.values[i])

    def node_left(self, i: int, pad: float | None = None) -> float:
        """Value at node i as seen from the left (end of a cell)."""
        if i == self.i0 and self.left_trace_at_zero is not None:
            return self.left_trace_at_zero
        return self.node_right(i, pad)

    def eval(self, x, pad_right: float | None = None, pad_left: float | None = None):
        """Reconstruct Q(x) (vectorized).  Points left/right of the stored
        range take the corresponding padding constants.  At x = 0 the right
        limit is returned; the left branch applies for x < 0."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        t = x / self.dx + self.i0
        j = np.clip(np.floor(t).astype(int), 0, self.n - 2)
        lam = t - j
        a = self.values[j].copy()
        b = self.values[j + 1].copy()
        if self.left_trace_at_zero is not None:
            ends_at_zero = (j + 1 == self.i0) & (x < 0.0)
            b[ends_at_zero] = self.left_trace_at_zero
        out = a + (b - a) * lam
        if pad_left is not None:
            out = np.where(t < 0.0, pad_left, out)
        elif np.any(t < -1e-9):
            raise WindowError("evaluation left of the stored range without padding")
        if pad_right is not None:
            out = np.where(t > self.n - 1, pad_right, out)
        elif np.any(t > self.n - 1 + 1e-9):
            raise WindowError("evaluation right of the stored range without padding")
        return out if out.size > 1 else float(out[0])


def _cell_endpoints(q: GridFunction, i: int, m: int, pad: float | None):
    """Endpoint value arrays (a_k, b_k) for the m window cells at node i."""
    if not (0 <= i < q.n):
        raise DomainError(f"node index {i} outside grid")
    if i + m > q.n - 1 and pad is None:
        raise WindowError(
            f"window at node {i} ends at node {i + m} beyond the stored grid; "
            "supply the asymptotic padding value"
        )
    a = np.empty(m)
    b = np.empty(m)
    for k in range(m):
        a[k] = q.node_right(i + k, pad)
        b[k] = q.node_left(i + k + 1, pad)
    return a, b


def average_density(q: GridFunction, i: int, kernel: Kernel, pad: float | None = None) -> float:
    """A(Q; x_i): exact kernel average of the reconstruction at node i."""
    omega, mu = kernel.cell_moments(q.dx)
    a, b = _cell_endpoints(q, i, omega.size, pad)
    return float(np.dot(a, omega) + np.dot(b - a, mu) / q.dx)


def average_derivative(q: GridFunction, i: int, kernel: Kernel, pad: float | None = None) -> float:
    """d/dx of x -> A(Q; x) at node i, by parts:

        A_x = -Q(x) w(0) - integral of Q(x+s) w'(s) ds

    (the boundary term at s = h drops since w(h) = 0)."""
    domega, dmu = kernel.derivative_moments(q.dx)
    a, b = _cell_endpoints(q, i, domega.size, pad)
    w0 = float(np.asarray(kernel.eval(0.0)))
    inner = float(np.dot(a, domega) + np.dot(b - a, dmu) / q.dx)
    return -q.node_right(i) * w0 - inner


def average_velocity_m2(
    p: GridFunction,
    i: int,
    kernel: Kernel,
    cond: RoadCondition,
    v: VelocityModel,
    pad: float | None = None,
) -> float:
    """V(x_i): kernel average of kappa(y) v(P(y)) over [x_i, x_i + h].

    Cells straddling y = 0 are split there so each piece carries a single
    speed factor; v over the linear reconstruction is integrated with
    4-point Gauss-Legendre per piece (exact for the built-in laws).
    """
    omega, _ = kernel.cell_moments(p.dx)
    m = omega.size
    a, b = _cell_endpoints(p, i, m, pad)
    xi = p.x(i)
    total = 0.0
    for k in range(m):
        xl = xi + k * p.dx
        xr = xl + p.dx
        if xl < 0.0 < xr:
            pieces = [(xl, 0.0, cond.kappa_minus), (0.0, xr, cond.kappa_plus)]
        elif xr <= 0.0:
            pieces = [(xl, xr, cond.kappa_minus)]
        else:
            pieces = [(xl, xr, cond.kappa_plus)]
        for (pl, pr, kap) in pieces:
            half = 0.5 * (pr - pl)
            if half == 0.0:
                continue
            y = pl + half * (_GL4_NODES + 1.0)
            lam = (y - xl) / p.dx
            dens = a[k] + (b[k] - a[k]) * lam
            w = np.asarray(kernel.eval(y - xi), dtype=float)
            vd = np.asarray(v.eval(dens), dtype=float)
            total += kap * half * float(np.dot(_GL4_WEIGHTS, w * vd))
    return total


def average_velocity_m2_dq(
    p: GridFunction,
    i: int,
    kernel: Kernel,
    cond: RoadCondition,
    v: VelocityModel,
    q_first: float,
) -> float:
    """Sensitivity of V(x_i) to the value at node i itself.

    Only the first window cell depends on it:
        dV/dq = kappa * integral over the first cell of
                v'(reconstruction) * (1 - s/dx) * w(s) ds
    with the first-cell reconstruction running from q_first to P(x_{i+1}).
    Used as the analytic Jacobian inside the backward march.
    """
    kap = cond.kappa_minus if p.x(i) < 0.0 else cond.kappa_plus
    b = p.node_left(i + 1)
    half = 0.5 * p.dx
    s = half * (_GL4_NODES + 1.0)
    lam = s / p.dx
    dens = q_first + (b - q_first) * lam
    w = np.asarray(kernel.eval(s), dtype=float)
    dv = np.asarray(v.deriv(dens), dtype=float)
    return kap * half * float(np.dot(_GL4_WEIGHTS, w * dv * (1.0 - lam)))
