"""Quadrature helpers for integrals of radially symmetric functions on R^n.

All bubble-related moments are integrals of smooth profiles with power-law
decay.  The half-line integral uses the substitution r = tan(theta) with a
composite Gauss rule on [0, theta_R], and the tail beyond R is added in
closed form from the (known or fitted) power decay.
"""

from __future__ import annotations

from math import atan, cos, tan

import numpy as np

from .params import sphere_area

_GAUSS_N = 32
_GNODES, _GWEIGHTS = np.polynomial.legendre.leggauss(_GAUSS_N)


def gauss_panels(a: float, b: float, n_panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on n_panels equal subintervals of [a,b]."""
    edges = np.linspace(a, b, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    nodes = (mid + half * _GNODES[None, :]).ravel()
    weights = (half * _GWEIGHTS[None, :]).ravel()
    return nodes, weights


def log_panels(a: float, b: float, panels_per_decade: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on geometrically spaced panels of [a,b]."""
    if not (0 < a < b):
        raise ValueError("need 0 < a < b")
    n_dec = np.log10(b / a)
    n_panels = max(1, int(np.ceil(n_dec * panels_per_decade)))
    edges = a * (b / a) ** (np.arange(n_panels + 1) / n_panels)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        nodes.append(mid + half * _GNODES)
        weights.append(half * _GWEIGHTS)
    return np.concatenate(nodes), np.concatenate(weights)


def half_line_integral(f, decay: float, r_cut: float = 1e6, n_panels: int = 160) -> float:
    """integral_0^inf f(r) dr for f bounded at 0 with f(r) ~ C r^{-decay}.

    Geometrically graded Gauss panels on [r_lo, r_cut] (the grading handles
    both the origin and the slow power tail), a bounded-head scrap below
    r_lo, and the analytic tail f(r_cut) * r_cut / (decay - 1) beyond the
    cut.  Requires decay > 1.
    """
    if decay <= 1:
        raise ValueError(f"tail exponent {decay} not integrable on the half line")
    r_lo = 1e-12
    per_decade = max(4, n_panels // max(1, int(np.log10(r_cut / r_lo))))
    r, wts = log_panels(r_lo, r_cut, panels_per_decade=per_decade)
    core = float(np.sum(f(r) * wts))
    head = float(f(np.array([r_lo]))[0]) * r_lo
    tail = float(f(np.array([r_cut]))[0]) * r_cut / (decay - 1.0)
    return core + head + tail


def radial_integral(f, n: int, decay: float, r_cut: float = 1e6, n_panels: int = 160) -> float:
    """integral_{R^n} f(|x|) dx for radial f with f(r) ~ C r^{-decay}.

    Reduces to sphere_area(n) * integral_0^inf f(r) r^{n-1} dr; needs
    decay > n for convergence.
    """
    if decay <= n:
        raise ValueError(f"decay {decay} too slow for an integrable radial profile in R^{n}")
    g = lambda r: f(r) * r ** (n - 1)
    return sphere_area(n) * half_line_integral(g, decay - (n - 1), r_cut=r_cut, n_panels=n_panels)


def fit_tail_exponent(r: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least-squares slope/prefactor of |values| ~ C r^{slope} in log-log.

    Returns (slope, C).  Requires positive radii and nonzero values.
    """
    r = np.asarray(r, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    if np.any(v <= 0) or np.any(r <= 0):
        raise ValueError("tail fit needs positive radii and nonzero values")
    slope, logc = np.polyfit(np.log(r), np.log(v), 1)
    return float(slope), float(np.exp(logc))
