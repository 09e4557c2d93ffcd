"""Two-sided log barrier phi(x) = -log(x - l) - log(u - x)."""

from __future__ import annotations

import numpy as np

from ..errors import OutOfDomain


def _gaps(x, lower, upper):
    x, lower, upper = (np.asarray(v, dtype=float) for v in (x, lower, upper))
    d, e = x - lower, upper - x
    if np.any(~(d > 0)) or np.any(~(e > 0)):
        raise OutOfDomain("x must lie strictly between the bounds")
    return x, lower, upper, d, e


def barrier_derivs(x, lower, upper):
    """Return (phi, phi', phi'', phi''', phi'''') elementwise."""
    x, lower, upper, d, e = _gaps(x, lower, upper)
    phi = -np.log(d) - np.log(e)
    d1 = 1.0 / e - 1.0 / d
    # exact zero at the representable midpoint
    d1 = np.where(x == (lower + upper) / 2, 0.0, d1)
    d2 = d**-2 + e**-2
    d3 = 2.0 / e**3 - 2.0 / d**3
    d4 = 6.0 / d**4 + 6.0 / e**4
    return phi, d1, d2, d3, d4


def derivs_from_gaps(d, e):
    """(phi', phi'') from the distances d = x - l and e = u - x."""
    if np.any(~(d > 0)) or np.any(~(e > 0)):
        raise OutOfDomain("iterate left the barrier domain")
    d1 = np.where(d == e, 0.0, 1.0 / e - 1.0 / d)
    d2 = d**-2 + e**-2
    return d1, d2
