"""Model ingredients and the case classifier.

A road is a conservation law for vehicle density rho in [0,1] with a speed
limit factor kappa(x) that jumps once at x = 0:

    kappa(x) = kappa_minus for x < 0,   kappa_plus for x > 0.

Two nonlocal flux forms share these ingredients.  Model "M1" transports at
kappa(x) * v(mean downstream density); model "M2" transports at the mean of
kappa(y) * v(rho(y)) over the downstream window.  The velocity v and the
averaging kernel w are validated here once so the solvers can assume their
structural properties.

Asymptotic state pairs (rho_minus, rho_plus) with matching fluxes are
classified into sixteen cases (A1..D4): the letter records the model and
the sign of the speed-limit jump, the digit records where the two states
sit relative to the stagnation density.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    AmbiguousCaseError,
    AssumptionError,
    DomainError,
    FluxMismatchError,
)
from .rootfind import newton_bisect

# Gauss-Legendre nodes/weights on [-1,1], order 10: exact for polynomial
# integrands up to degree 19, so the built-in kernels integrate exactly.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True)
class VelocityModel:
    """Velocity law v: [0,1] -> [0,1], decreasing and concave.

    eval/deriv/second_deriv are vectorized callables.  Construction via
    make_velocity validates v(0)=1, v(1)=0, v' < 0 and v'' <= 0 on a
    1000-point sample including both endpoints.
    """

    name: str
    eval: Callable = field(repr=False)
    deriv: Callable = field(repr=False)
    second_deriv: Callable = field(repr=False)


@dataclass(frozen=True)
class Kernel:
    """Averaging weight w on the look-ahead window [0, h].

    Required structure: w >= 0, strictly decreasing on (0,h), w(h) = 0
    and unit mass.  Validated by make_kernel.
    """

    name: str
    h: float
    eval: Callable = field(repr=False)
    # per-dx moment cache; mutating dict contents is fine on a frozen instance
    _moments: dict = field(default_factory=dict, repr=False, compare=False)

    def cell_moments(self, dx: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-cell kernel moments for exact averaging of piecewise-linear data.

        Splits [0,h] into m = h/dx cells and returns (omega, mu) with

            omega_k = integral of w over cell k,
            mu_k    = integral of (s - k*dx) * w(s) over cell k.

        The window must end on a node: h/dx has to be an integer.
        """
        cached = self._moments.get(dx)
        if cached is not None:
            return cached
        m = _window_cells(self.h, dx)
        edges = np.arange(m + 1) * dx
        half = 0.5 * dx
        # 10-point Gauss-Legendre per cell; exact for polynomial kernels.
        s = edges[:-1, None] + half * (_GL_NODES[None, :] + 1.0)
        w = np.asarray(self.eval(s), dtype=float)
        omega = half * (w @ _GL_WEIGHTS)
        mu = half * (((s - edges[:-1, None]) * w) @ _GL_WEIGHTS)
        self._moments[dx] = (omega, mu)
        return omega, mu

    def derivative_moments(self, dx: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-cell moments of w' obtained from w values by parts:

            omega'_k = w(edge_{k+1}) - w(edge_k),
            mu'_k    = dx * w(edge_{k+1}) - omega_k.

        No derivative callable is needed.
        """
        cached = self._moments.get(("d", dx))
        if cached is not None:
            return cached
        m = _window_cells(self.h, dx)
        edges = np.arange(m + 1) * dx
        wv = np.asarray(self.eval(edges), dtype=float)
        omega, _ = self.cell_moments(dx)
        out = (np.diff(wv), dx * wv[1:] - omega)
        self._moments[("d", dx)] = out
        return out


def _window_cells(h: float, dx: float) -> int:
    m = int(round(h / dx))
    if m < 1 or abs(m * dx - h) > 1e-9 * h:
        raise DomainError(f"window length h={h!r} is not an integer multiple of dx={dx!r}")
    return m


@dataclass(frozen=True)
class RoadCondition:
    """Speed limit factors on either side of the jump at x = 0."""

    kappa_minus: float
    kappa_plus: float

    def __post_init__(self):
        if not (self.kappa_minus > 0.0 and self.kappa_plus > 0.0):
            raise DomainError("speed factors must be positive")

    def kappa(self, x):
        """kappa(x); the value at exactly 0 is the right limit."""
        return np.where(np.asarray(x) < 0.0, self.kappa_minus, self.kappa_plus)

    @property
    def kappa_max(self) -> float:
        return max(self.kappa_minus, self.kappa_plus)


@dataclass(frozen=True)
class FluxLevelSet:
    """The four densities cut from the two flux branches at a common level.

    Naming follows the side of the road: rho1 and rho4 solve
    kappa_minus*rho*v(rho) = fbar, rho2 and rho3 solve the kappa_plus
    branch, each pair straddling the stagnation density.  When
    kappa_minus > kappa_plus the ordering is
    rho1 <= rho2 <= rhohat <= rho3 <= rho4; smaller kappa_minus mirrors
    it to rho2 <= rho1 <= rhohat <= rho4 <= rho3.
    """

    fbar: float
    rho1: float
    rho2: float
    rho3: float
    rho4: float


@dataclass(frozen=True)
class CaseTag:
    """Classifier verdict: case label plus what it implies for profiles."""

    label: str
    model: str
    multiplicity: str  # "infinite" | "unique" | "none"
    stable: bool


# ---------------------------------------------------------------------------
# registries

def make_velocity(name: str = "lwr") -> VelocityModel:
    """Build a named velocity law.  Only "lwr" (v = 1 - rho) ships; custom
    laws go through validate_velocity directly."""
    if name == "lwr":
        v = VelocityModel(
            name="lwr",
            eval=lambda r: 1.0 - np.asarray(r, dtype=float),
            deriv=lambda r: np.full_like(np.asarray(r, dtype=float), -1.0),
            second_deriv=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        )
        validate_velocity(v)
        return v
    raise DomainError(f"unknown velocity law {name!r}")


def validate_velocity(v: VelocityModel, samples: int = 1000) -> None:
    """Check v(0)=1, v(1)=0, v' < 0 and v'' <= 0 on a full-range sample."""
    r = np.linspace(0.0, 1.0, samples)
    v0 = float(np.asarray(v.eval(0.0)))
    v1 = float(np.asarray(v.eval(1.0)))
    if abs(v0 - 1.0) > 1e-12 or abs(v1) > 1e-12:
        raise AssumptionError(f"velocity endpoints v(0)={v0!r}, v(1)={v1!r} must be 1 and 0")
    dv = np.asarray(v.deriv(r), dtype=float)
    if not np.all(dv < 0.0):
        raise AssumptionError("velocity must be strictly decreasing on [0,1]")
    d2v = np.asarray(v.second_deriv(r), dtype=float)
    if not np.all(d2v <= 1e-12):
        raise AssumptionError("velocity must be concave on [0,1]")


def make_kernel(name: str = "linear", h: float = 0.2) -> Kernel:
    """Build a named averaging kernel on [0, h].

    "linear":    w(s) = 2(h-s)/h^2
    "quadratic": w(s) = 3(h-s)^2/h^3
    """
    if h <= 0.0:
        raise DomainError("window length h must be positive")
    if name == "linear":
        k = Kernel(name="linear", h=h, eval=lambda s: 2.0 * (h - np.asarray(s, dtype=float)) / h**2)
    elif name == "quadratic":
        k = Kernel(name="quadratic", h=h, eval=lambda s: 3.0 * (h - np.asarray(s, dtype=float)) ** 2 / h**3)
    else:
        raise DomainError(f"unknown kernel {name!r}")
    validate_kernel(k)
    return k


def validate_kernel(k: Kernel, samples: int = 1000) -> None:
    """Check w >= 0, w(h) = 0, strict decrease, and unit mass."""
    s = np.linspace(0.0, k.h, samples)
    w = np.asarray(k.eval(s), dtype=float)
    if abs(w[-1]) > 1e-12 / k.h:
        raise AssumptionError(f"kernel must vanish at the window end, got w(h)={w[-1]!r}")
    if np.any(w < -1e-14):
        raise AssumptionError("kernel must be nonnegative")
    if not np.all(np.diff(w) < 0.0):
        raise AssumptionError("kernel must be strictly decreasing on (0,h)")
    omega, _ = k.cell_moments(k.h / 64.0)
    mass = float(np.sum(omega))
    if abs(mass - 1.0) > 1e-12:
        raise AssumptionError(f"kernel mass {mass!r} must be 1")


# ---------------------------------------------------------------------------
# flux geometry

def flux(kappa: float, rho: float, v: VelocityModel) -> float:
    """Single-branch flux kappa * rho * v(rho)."""
    rho = float(rho)
    if not (-1e-12 <= rho <= 1.0 + 1e-12):
        raise DomainError(f"density {rho!r} outside [0,1]")
    return kappa * rho * float(np.asarray(v.eval(rho)))


def stagnation_point(v: VelocityModel) -> float:
    """Density maximizing rho * v(rho); unique because the flux is strictly
    concave.  Solved to 1e-13 residual."""
    g = lambda r: float(np.asarray(v.eval(r))) + r * float(np.asarray(v.deriv(r)))
    gp = lambda r: 2.0 * float(np.asarray(v.deriv(r))) + r * float(np.asarray(v.second_deriv(r)))
    rhohat, _, _ = newton_bisect(g, gp, 0.0, 1.0, x0=0.5, ftol=1e-14)
    return rhohat


def _branch_root(kappa: float, fbar: float, v: VelocityModel, lo: float, hi: float) -> float:
    g = lambda r: kappa * r * float(np.asarray(v.eval(r))) - fbar
    gp = lambda r: kappa * (float(np.asarray(v.eval(r))) + r * float(np.asarray(v.deriv(r))))
    root, _, _ = newton_bisect(g, gp, lo, hi, ftol=1e-13)
    return root


def solve_flux_level(fbar: float, cond: RoadCondition, v: VelocityModel) -> FluxLevelSet:
    """Cut both flux branches at the level fbar.

    Requires 0 <= fbar <= min of the two branch maxima.  (rho1, rho4)
    solve the kappa_minus branch, (rho2, rho3) the kappa_plus branch,
    each root on its monotone sub-branch to residual 1e-13.
    """
    rhohat = stagnation_point(v)
    vmax = float(np.asarray(v.eval(rhohat)))
    cap = min(cond.kappa_minus, cond.kappa_plus) * rhohat * vmax
    if not (0.0 <= fbar <= cap + 1e-14):
        raise DomainError(f"flux level {fbar!r} outside [0, {cap!r}]")
    rho1 = _branch_root(cond.kappa_minus, fbar, v, 0.0, rhohat)
    rho4 = _branch_root(cond.kappa_minus, fbar, v, rhohat, 1.0)
    if cond.kappa_plus == cond.kappa_minus:
        rho2, rho3 = rho1, rho4
    else:
        rho2 = _branch_root(cond.kappa_plus, fbar, v, 0.0, rhohat)
        rho3 = _branch_root(cond.kappa_plus, fbar, v, rhohat, 1.0)
    return FluxLevelSet(fbar=fbar, rho1=rho1, rho2=rho2, rho3=rho3, rho4=rho4)


# ---------------------------------------------------------------------------
# classification

_DIGIT_FACTS = {
    "1": ("infinite", True),
    "2": ("unique", False),
    "3": ("none", False),
    "4": ("none", False),
}


def classify(
    cond: RoadCondition,
    rho_minus: float,
    rho_plus: float,
    v: VelocityModel,
    model: str = "M1",
    tol: float = 1e-9,
) -> CaseTag:
    """Classify an asymptotic state pair into its case.

    The pair must satisfy the flux constraint
    kappa_minus*rho_minus*v(rho_minus) = kappa_plus*rho_plus*v(rho_plus)
    to within tol.  The letter comes from the model and the sign of
    (kappa_minus - kappa_plus); the digit from where the pair sits
    relative to the stagnation density.  States within tol of the
    stagnation density (or equal speed factors) are rejected as ambiguous.
    """
    if model not in ("M1", "M2"):
        raise DomainError(f"unknown model {model!r}")
    f_minus = flux(cond.kappa_minus, rho_minus, v)
    f_plus = flux(cond.kappa_plus, rho_plus, v)
    if abs(f_minus - f_plus) > tol:
        raise FluxMismatchError(
            f"asymptotic fluxes disagree: {f_minus!r} (left) vs {f_plus!r} (right)"
        )
    fbar = 0.5 * (f_minus + f_plus)

    if fbar <= tol:
        near0 = lambda r: abs(r) <= tol
        near1 = lambda r: abs(r - 1.0) <= tol
        if near0(rho_minus) and near0(rho_plus):
            return CaseTag("trivial-zero", model, "unique", True)
        if near1(rho_minus) and near1(rho_plus):
            return CaseTag("trivial-one", model, "unique", True)
        if near0(rho_minus) and near1(rho_plus):
            return CaseTag("trivial-step", model, "unique", True)
        # the (1, 0) pair falls through: it is the zero-flux edge of digit 4

    if abs(cond.kappa_minus - cond.kappa_plus) <= tol * cond.kappa_max:
        raise AmbiguousCaseError("speed factors are equal; no case letter applies")
    letter_pair = ("A", "B") if model == "M1" else ("C", "D")
    letter = letter_pair[0] if cond.kappa_minus > cond.kappa_plus else letter_pair[1]

    rhohat = stagnation_point(v)
    if abs(rho_minus - rhohat) <= tol or abs(rho_plus - rhohat) <= tol:
        raise AmbiguousCaseError(
            f"state at the stagnation density {rhohat!r}; digit undefined"
        )
    below_m, below_p = rho_minus < rhohat, rho_plus < rhohat
    if below_m and not below_p:
        digit = "1"
    elif below_m and below_p:
        digit = "2"
    elif not below_m and not below_p:
        digit = "3"
    else:
        digit = "4"

    multiplicity, stable = _DIGIT_FACTS[digit]
    return CaseTag(letter + digit, model, multiplicity, stable)


def case_states(label: str, lset: FluxLevelSet) -> tuple[float, float]:
    """Canonical (rho_minus, rho_plus) pair realizing a case at a level set.

    rho_minus always comes from the kappa_minus branch roots (rho1, rho4)
    and rho_plus from the kappa_plus branch (rho2, rho3); the digit picks
    the side of the stagnation density for each.
    """
    if len(label) != 2 or label[0] not in "ABCD" or label[1] not in "1234":
        raise DomainError(f"unknown case label {label!r}")
    digit = label[1]
    if digit == "1":
        return lset.rho1, lset.rho3
    if digit == "2":
        return lset.rho1, lset.rho2
    if digit == "3":
        return lset.rho4, lset.rho3
    return lset.rho4, lset.rho2


def homogeneous_states(label: str, lset: FluxLevelSet) -> tuple[float, float]:
    """Asymptote pair of the x > 0 homogeneous front for a digit-1 case:
    the two roots of the kappa_plus branch at the level fbar."""
    if label not in ("A1", "B1", "C1", "D1"):
        raise DomainError(f"case {label!r} has no homogeneous front")
    return lset.rho2, lset.rho3
