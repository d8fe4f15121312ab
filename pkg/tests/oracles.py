"""Independent reference values used by the tests.

Bessel zeros come from a plain 1D sign-scan + Brent root-finder on
scipy.special.jv (independent of the FEM path).  The half-plane profile has
a closed form via the conformal map of the slit half-plane,
g = Re sqrt(z^2 - 1): it gives beta = pi/2 exactly and the expansion
coefficients as binomial numbers, used to cross-check the quarter-plane
solver without ever feeding it numbers from the solver itself.
"""

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv

_CACHE = {}


def bessel_zero(order: float, n: int) -> float:
    """n-th positive zero of J_order by sign scanning and Brent."""
    key = (float(order), int(n))
    if key in _CACHE:
        return _CACHE[key]
    xs = np.linspace(1e-9, 40.0 + 8.0 * order, 60000)
    vals = jv(order, xs)
    found = []
    for i in range(len(xs) - 1):
        if vals[i] == 0.0:
            continue
        if vals[i] * vals[i + 1] < 0:
            found.append(brentq(lambda x: jv(order, x), xs[i], xs[i + 1],
                                xtol=1e-14))
            if len(found) >= n:
                break
    _CACHE[key] = found[n - 1]
    return _CACHE[key]


# exact profile data: g = Re sqrt(z^2 - 1) on {x1 > 0}
BETA_EXACT = np.pi / 2
B_EXACT = {1: -1 / 2, 3: -1 / 8, 5: -1 / 16, 7: -5 / 128, 9: -7 / 256}


def profile_field_exact(pts: np.ndarray) -> np.ndarray:
    """Covering value of the exact limit profile at given points."""
    pts = np.atleast_2d(pts)
    z = pts[:, 0] + 1j * pts[:, 1]
    return np.real(np.sqrt(z * z - 1.0))
