"""The stationary bubble family and the kernel modes of its linearization.

U_{mu,xi}(x) = alpha * (mu / (mu^2 + |x-xi|^2))^((n-2s)/2) solves
(-Delta)^s U = U^p on R^n.  The bounded kernel of the linearized operator
L0 = -(-Delta)^s + p U^{p-1} is spanned by the translation modes
Z_i = dU/dy_i (i <= n) and the dilation mode
Z_{n+1} = ((n-2s)/2) U + y . grad U.
"""

from __future__ import annotations

import numpy as np

from .params import ProblemParams, SpikePoint
from .quadrature import radial_integral


def profile(params: ProblemParams, r):
    """U(y) at radius r = |y| for the unit bubble (mu=1, xi=0)."""
    r = np.asarray(r, dtype=float)
    return params.alpha * (1.0 + r * r) ** (-params.m / 2.0)


def profile_deriv(params: ProblemParams, r):
    """dU/dr for the unit bubble."""
    r = np.asarray(r, dtype=float)
    return -params.alpha * params.m * r * (1.0 + r * r) ** (-params.m / 2.0 - 1.0)


def bubble_value(params: ProblemParams, spike: SpikePoint, x) -> np.ndarray:
    """U_{mu,xi}(x); x may be a point or an array of points (last axis = dim)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or (x.ndim >= 1 and x.shape[-1] != params.n):
        # scalar / 1-d coordinate arrays in dimension 1
        d2 = (x - spike.xi[0]) ** 2
    else:
        d2 = np.sum((x - spike.xi) ** 2, axis=-1)
    return params.alpha * (spike.mu / (spike.mu**2 + d2)) ** (params.m / 2.0)


def dilation_mode(params: ProblemParams, r):
    """Z_{n+1}(y) = ((n-2s)/2) U + y.grad U at radius r, in closed form.

    Equals ((n-2s)/2) * alpha * (1-r^2) / (1+r^2)^((n-2s)/2+1).
    """
    r = np.asarray(r, dtype=float)
    m = params.m
    return 0.5 * m * params.alpha * (1.0 - r * r) * (1.0 + r * r) ** (-m / 2.0 - 1.0)


def kernel_mode(params: ProblemParams, i: int, y) -> np.ndarray:
    """Kernel mode Z_i evaluated at y (point or array of points).

    i in 1..n gives the translation mode dU/dy_i; i = n+1 gives the dilation
    mode.  Index outside 1..n+1 raises.
    """
    n = params.n
    if not 1 <= i <= n + 1:
        raise ValueError(f"kernel mode index {i} outside 1..{n + 1}")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if n == 1:
        # any shape, elementwise coordinates
        r = np.abs(y)
        comp = y if i <= n else None
    else:
        if y.shape[-1] != n:
            raise ValueError(f"points must have last axis {n}")
        r = np.sqrt(np.sum(y * y, axis=-1))
        comp = y[..., i - 1] if i <= n else None
    if i == n + 1:
        return dilation_mode(params, r)
    # dU/dy_i = U'(r) * y_i / r, finite at r=0 with value 0
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(r > 0, profile_deriv(params, r) * comp / np.where(r > 0, r, 1.0), 0.0)
    return out


def dilation_mode_direct(params: ProblemParams, r):
    """((n-2s)/2) U(r) + r U'(r), assembled from the profile (cross-check form)."""
    r = np.asarray(r, dtype=float)
    return 0.5 * params.m * profile(params, r) + r * profile_deriv(params, r)


def bubble_mass(params: ProblemParams) -> float:
    """integral U^p over R^n (decays like r^{-(n+2s)})."""
    f = lambda r: profile(params, r) ** params.p
    return radial_integral(f, params.n, params.n + 2 * params.s)


def c1_constant(params: ProblemParams) -> float:
    """c1 = -p * integral U^{p-1} Z_{n+1}; positive, equals ((n-2s)/2) integral U^p."""
    f = lambda r: profile(params, r) ** (params.p - 1.0) * dilation_mode(params, r)
    val = radial_integral(f, params.n, params.n + 2 * params.s, r_cut=1e7, n_panels=200)
    return -params.p * val
