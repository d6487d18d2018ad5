"""Utility functions for the thermo_run framework.

The utilities in this file include:
    - Bracket expansion for monotone scalar equations (expand_bracket)
    - Bracketed root finding with Brent's method and residual checks (find_root)
    - Significant-digit rounding used by every serializer (round_sig)

Typical usage:
    from thermo_run.core.utils import find_root

    root = find_root(lambda x: x**3 - 2.0, 0.0, 1.0, increasing=True)
"""

import logging
import math

import numpy as np
from scipy.optimize import brentq

from thermo_run.core.exceptions import ConvergenceError

logger = logging.getLogger('dev')


def expand_bracket(func, lo, hi, increasing=True, max_doublings=60):
    """Grow ``[lo, hi]`` until a monotone function changes sign on it.

    Each failing end is pushed outward by a width that doubles on every step.

    Args:
        func (callable): Monotone scalar function.
        lo (float): Initial lower end.
        hi (float): Initial upper end.
        increasing (bool): Whether ``func`` is increasing.
        max_doublings (int): Maximum number of outward steps.

    Returns:
        tuple: ``(lo, hi, f_lo, f_hi)`` with ``f_lo`` and ``f_hi`` of opposite sign (or zero).

    Raises:
        ConvergenceError: If no sign change is found.
    """
    sign = 1.0 if increasing else -1.0
    f_lo, f_hi = sign * func(lo), sign * func(hi)
    width = max(hi - lo, 1.0)
    for step in range(max_doublings):
        if f_lo <= 0.0 <= f_hi:
            logger.debug(f"Bracket [{lo:.6g}, {hi:.6g}] found after {step} expansions")
            return lo, hi, sign * f_lo, sign * f_hi
        if f_lo > 0.0:
            hi, f_hi = lo, f_lo
            lo -= width
            f_lo = sign * func(lo)
        else:
            lo, f_lo = hi, f_hi
            hi += width
            f_hi = sign * func(hi)
        width *= 2.0
    if f_lo <= 0.0 <= f_hi:
        return lo, hi, sign * f_lo, sign * f_hi
    raise ConvergenceError(
        f"No sign change after {max_doublings} bracket doublings",
        diagnostics={'lo': lo, 'hi': hi, 'f_lo': sign * f_lo, 'f_hi': sign * f_hi},
    )


def find_root(func, lo, hi, increasing=True, xtol=1e-14, max_doublings=60):
    """Root of a monotone function: bracket expansion followed by Brent's method.

    Brent's method combines bisection with secant and inverse quadratic steps;
    no derivatives are used.

    Args:
        func (callable): Monotone scalar function.
        lo (float): Initial lower end of the bracket.
        hi (float): Initial upper end of the bracket.
        increasing (bool): Whether ``func`` is increasing.
        xtol (float): Absolute tolerance on the root.
        max_doublings (int): Bracket expansion budget.

    Returns:
        float: The root.
    """
    lo, hi, f_lo, f_hi = expand_bracket(func, lo, hi, increasing, max_doublings)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    return brentq(func, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)


def round_sig(value, digits=15):
    """Round a float to ``digits`` significant digits; non-floats pass through."""
    if isinstance(value, (bool, int, np.integer)) or value is None:
        return value
    value = float(value)
    if value == 0.0 or not math.isfinite(value):
        return value
    return float(f"{value:.{digits}g}")
