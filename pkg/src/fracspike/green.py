"""Green function, regular part, and the spike capacity matrix.

G(.,y) solves (-Delta)^s G = c(n,s) delta_y in Omega with zero exterior
data, normalized so that G = Gamma(.-y) - H(.,y) with
Gamma(x) = alpha_{n,s} |x|^{2s-n}.  The regular part H is s-harmonic in
Omega with exterior data Gamma(.-y) and is obtained by one dense
restricted-Dirichlet solve per source point (H is smooth at y, so its
diagonal value is read by interpolation).

Supported domains: intervals (n = 1) and balls with a central source in
n = 3 via the radial reduction.  The unit-ball closed form

    G(x,y) = kappa |x-y|^{2s-n} int_0^{r0} t^{s-1} (1+t)^{-n/2} dt,
    r0 = (1-|x|^2)(1-|y|^2)/|x-y|^2,  kappa = alpha_{n,s}/B(s, n/2-s)

serves as the independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .fracops import (Exterior, FracOperator, LineGrid, RadialGrid,
                      frac_laplacian_dirichlet, line_grid)
from .params import ProblemParams


@dataclass(frozen=True)
class IntervalDomain:
    a: float
    b: float

    def contains(self, x: float) -> bool:
        return self.a < x < self.b

    def boundary_distance(self, x: float) -> float:
        return min(x - self.a, self.b - x)


@dataclass(frozen=True)
class BallDomain:
    radius: float = 1.0

    def contains(self, r: float) -> bool:
        return abs(r) < self.radius

    def boundary_distance(self, r: float) -> float:
        return self.radius - abs(r)


def fundamental_solution(params: ProblemParams, d) -> np.ndarray:
    """Gamma(d) = alpha |d|^{2s-n}, the free-space kernel of (-Delta)^s."""
    d = np.asarray(d, dtype=float)
    return params.alpha * np.abs(d) ** (-params.m)


@dataclass
class RegularPartField:
    """H(., y): s-harmonic in Omega, equal to Gamma(.-y) outside."""

    params: ProblemParams
    source: float           # y (coordinate for intervals, 0 for radial balls)
    grid: object
    values: np.ndarray
    op: FracOperator
    residual: float

    def __post_init__(self):
        coords = self.grid.nodes
        self._spline = CubicSpline(coords, self.values)

    def __call__(self, x) -> np.ndarray:
        return self._spline(np.asarray(x, dtype=float))

    def gradient(self, x, eps: float = 1e-5) -> float:
        return float((self._spline(x + eps) - self._spline(x - eps)) / (2 * eps))

    def green(self, x) -> np.ndarray:
        """G(x, y) = Gamma(x - y) - H(x, y) inside Omega (0 outside)."""
        x = np.asarray(x, dtype=float)
        return fundamental_solution(self.params, x - self.source) - self(x)


def regular_part(domain, params: ProblemParams, y: float, h: float = 1e-3,
                 op: FracOperator | None = None) -> RegularPartField:
    """Solve the exterior-Dirichlet problem for the regular part H(., y).

    y must be interior, more than two grid cells from the boundary.  Pass a
    prebuilt operator to amortize assembly across source points.
    """
    if isinstance(domain, IntervalDomain):
        if params.n != 1:
            raise ValueError("interval domains require n = 1")
        if domain.boundary_distance(y) <= 2 * h:
            raise ValueError(f"source {y} too close to the boundary for spacing {h}")
        if op is None:
            grid = line_grid(domain.a, domain.b, h)
            op = frac_laplacian_dirichlet(grid, params.s)
        grid = op.grid
        ext = Exterior(kind="callable",
                       fn=lambda x, yy=y: fundamental_solution(params, x - yy))
        rhs = -op.exterior_source(ext)
        vals = np.linalg.solve(op.matrix, rhs)
        res = float(np.max(np.abs(op.matrix @ vals - rhs)))
        return RegularPartField(params=params, source=y, grid=grid,
                                values=vals, op=op, residual=res)

    if isinstance(domain, BallDomain):
        if params.n not in (1, 3):
            raise ValueError("ball domains are supported for n in {1, 3}")
        if y != 0.0:
            raise ValueError("radial reduction requires the source at the center")
        if params.n == 1:
            return regular_part(IntervalDomain(-domain.radius, domain.radius),
                                params, y, h=h, op=op)
        if op is None:
            n_cells = int(round(domain.radius / h))
            grid = RadialGrid(n=3, r_max=domain.radius, n_cells=n_cells, sector=0)
            op = frac_laplacian_dirichlet(grid, params.s)
        grid = op.grid
        ext = Exterior(kind="power", exponent=params.m,
                       coef_left=params.alpha, coef_right=params.alpha)
        rhs = -op.exterior_source(ext)
        vals = np.linalg.solve(op.matrix, rhs)
        res = float(np.max(np.abs(op.matrix @ vals - rhs)))
        return RegularPartField(params=params, source=0.0, grid=grid,
                                values=vals, op=op, residual=res)

    raise TypeError(f"unsupported domain {type(domain)!r}")


def green_function(domain, params: ProblemParams, y: float, h: float = 1e-3,
                   op: FracOperator | None = None) -> RegularPartField:
    """Regular-part field; use .green(x) for G(x,y) = Gamma(x-y) - H(x,y)."""
    return regular_part(domain, params, y, h=h, op=op)


# ---------------------------------------------------------------------------
# capacity matrix


@dataclass
class GreenMatrix:
    """k x k matrix with H(q_j,q_j) on the diagonal and -G(q_j,q_i) off it."""

    points: np.ndarray
    entries: np.ndarray
    min_eigenvalue: float
    asymmetry: float
    fields: list

    @property
    def k(self) -> int:
        return len(self.points)


def green_matrix(domain, params: ProblemParams, q, h: float = 1e-3) -> GreenMatrix:
    """Capacity matrix over the spike points q (pairwise distinct, interior)."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    k = len(q)
    if k != len(set(np.round(q, 14))):
        raise ValueError("spike points must be pairwise distinct")
    if isinstance(domain, BallDomain) and params.n == 3 and (k > 1 or q[0] != 0.0):
        raise ValueError("n=3 balls support a single central spike only (radial reduction)")

    op = None
    fields = []
    for yj in q:
        fld = regular_part(domain, params, float(yj), h=h, op=op)
        op = fld.op
        fields.append(fld)

    ent = np.empty((k, k))
    for j in range(k):
        for i in range(k):
            if i == j:
                ent[j, j] = fields[j](q[j])
            else:
                ent[j, i] = -(fundamental_solution(params, q[j] - q[i]) - fields[i](q[j]))
    asym = float(np.max(np.abs(ent - ent.T))) if k > 1 else 0.0
    ent = 0.5 * (ent + ent.T)
    min_eig = float(np.linalg.eigvalsh(ent)[0])
    return GreenMatrix(points=q, entries=ent, min_eigenvalue=min_eig,
                       asymmetry=asym, fields=fields)


def is_admissible(gmatrix: GreenMatrix, tol: float = 1e-12) -> tuple[bool, float]:
    """Positive definiteness of the capacity matrix (the existence condition)."""
    if not np.all(np.isfinite(gmatrix.entries)):
        raise ValueError("capacity matrix has non-finite entries")
    return bool(gmatrix.min_eigenvalue > tol), gmatrix.min_eigenvalue


# ---------------------------------------------------------------------------
# unit-ball closed form (independent oracle)


def ball_green_exact(params: ProblemParams, x: float, y: float,
                     radius: float = 1.0) -> float:
    """Closed-form Green function of the unit-radius ball, via quadrature.

    Valid for |x|, |y| < radius, x != y; the normalization matches
    G ~ Gamma(x-y) on the diagonal.
    """
    n, s = params.n, params.s
    xs, ys = x / radius, y / radius
    d = abs(xs - ys)
    if d == 0:
        raise ValueError("x and y must be distinct")
    r0 = (1 - xs * xs) * (1 - ys * ys) / (d * d)
    kappa = params.alpha / (gamma(s) * gamma(n / 2.0 - s) / gamma(n / 2.0))
    val, _ = integrate.quad(lambda t: t ** (s - 1.0) * (1 + t) ** (-n / 2.0),
                            0.0, r0, points=[min(r0, 1.0)] if r0 > 1 else None,
                            limit=200)
    g_unit = kappa * d ** (-params.m) * val
    # scaling from the unit ball to radius R: G_R(x,y) = R^{2s-n} G_1(x/R, y/R)
    return g_unit * radius ** (-params.m)
