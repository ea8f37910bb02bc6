"""Adaptive Simpson quadrature with a global subdivision budget.

Kept deliberately small: the model formulas have closed antiderivatives
everywhere except the steady-state hit-ratio integral, which is smooth on
[1, n] and well suited to Simpson refinement.
"""

from __future__ import annotations

from typing import Callable


class QuadratureError(ArithmeticError):
    """Raised when the subdivision budget runs out before the tolerance is met.

    Carries ``achieved`` (the relative error estimate at abort) so callers
    can report how far the integration got.
    """

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    rel_tol: float = 1e-8,
    max_subdivisions: int = 1_000_000,
) -> float:
    """Integrate ``f`` over [a, b] to a relative tolerance.

    Classic adaptive Simpson: each interval is accepted when the two-panel
    refinement agrees with the one-panel estimate to within its share of the
    error budget, and the accepted value includes the Richardson correction
    term.  The tolerance is relative to a first whole-interval estimate
    (floored at 1e-300 so an exactly-zero integrand still terminates).

    Raises QuadratureError when more than ``max_subdivisions`` interval
    splits are needed.
    """
    if b < a:
        return -adaptive_simpson(f, b, a, rel_tol, max_subdivisions)
    if a == b:
        return 0.0

    def simpson(x0: float, x2: float, f0: float, f1: float, f2: float) -> float:
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = simpson(a, b, fa, fm, fb)
    scale = max(abs(whole), 1e-300)
    budget = rel_tol * scale

    # Stack entries: (x0, x2, f0, f1, f2, coarse estimate, error budget).
    stack = [(a, b, fa, fm, fb, whole, budget)]
    total = 0.0
    splits = 0
    worst = 0.0
    while stack:
        x0, x2, f0, f1, f2, coarse, eps = stack.pop()
        xm = 0.5 * (x0 + x2)
        xl = 0.5 * (x0 + xm)
        xr = 0.5 * (xm + x2)
        fl, fr = f(xl), f(xr)
        left = simpson(x0, xm, f0, fl, f1)
        right = simpson(xm, x2, f1, fr, f2)
        err = (left + right - coarse) / 15.0
        if abs(err) <= eps:
            total += left + right + err
            continue
        splits += 1
        worst = max(worst, abs(err))
        if splits > max_subdivisions:
            raise QuadratureError(
                f"no convergence after {max_subdivisions} subdivisions "
                f"(worst pending interval error ~{worst / scale:.3e} relative)",
                achieved=worst / scale,
            )
        half = 0.5 * eps
        stack.append((x0, xm, f0, fl, f1, left, half))
        stack.append((xm, x2, f1, fr, f2, right, half))
    return total
