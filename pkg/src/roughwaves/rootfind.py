"""Safeguarded scalar root finding.

Newton iteration constrained to a bracket, falling back to bisection
whenever a Newton step leaves the bracket or stalls.  All solvers in this
package funnel through this routine so convergence behaviour is uniform.
"""
from __future__ import annotations

from typing import Callable

from .errors import RootSolveError


def newton_bisect(
    f: Callable[[float], float],
    fprime: Callable[[float], float],
    lo: float,
    hi: float,
    x0: float | None = None,
    ftol: float = 1e-13,
    xtol: float = 1e-15,
    max_iter: int = 100,
) -> tuple[float, float, bool]:
    """Solve f(x) = 0 on a bracket [lo, hi] with sign change.

    Parameters
    ----------
    f, fprime : callables
        Function and its derivative.
    lo, hi : float
        Bracket endpoints; f must change sign between them.
    x0 : float, optional
        Initial guess (clipped into the bracket).  Defaults to the midpoint.
    ftol : float
        Convergence threshold on |f(x)|.
    xtol : float
        Convergence threshold on the bracket width / Newton step.
    max_iter : int
        Iteration budget before RootSolveError.

    Returns
    -------
    (x, fx, used_bisection) : root, residual there, and whether any step
    had to fall back to bisection.
    """
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo, 0.0, False
    if fhi == 0.0:
        return hi, 0.0, False
    if (flo > 0.0) == (fhi > 0.0):
        raise RootSolveError(
            f"no sign change on bracket [{lo!r}, {hi!r}]: f(lo)={flo!r}, f(hi)={fhi!r}"
        )

    x = 0.5 * (lo + hi) if x0 is None else min(max(x0, lo), hi)
    fell_back = False
    for _ in range(max_iter):
        fx = f(x)
        if abs(fx) <= ftol:
            return x, fx, fell_back
        # maintain the bracket
        if (fx > 0.0) == (fhi > 0.0):
            hi, fhi = x, fx
        else:
            lo, flo = x, fx
        dfx = fprime(x)
        step_ok = dfx != 0.0
        if step_ok:
            x_new = x - fx / dfx
            step_ok = lo < x_new < hi
        if step_ok:
            if abs(x_new - x) <= xtol * max(1.0, abs(x)):
                return x_new, f(x_new), fell_back
            x = x_new
        else:
            fell_back = True
            x = 0.5 * (lo + hi)
        if hi - lo <= xtol * max(1.0, abs(x)):
            return x, f(x), fell_back
    raise RootSolveError(
        f"no convergence in {max_iter} iterations; bracket [{lo!r}, {hi!r}]"
    )
