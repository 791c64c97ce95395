"""Spectral checks on the linearization around the bubble.

L0 = -(-Delta)^s + p U^{p-1}.  Its bounded kernel is spanned by the
translation modes Z_1..Z_n and the dilation mode Z_{n+1}; it has exactly
one positive eigenvalue, whose ground state Z_0 is radial, sign-definite
and decays like |y|^{-n-2s}.  With the sign convention L0 phi + lambda phi
= 0 this is the unique negative eigenvalue lambda_0 < 0 of the symmetric
discrete operator K = (-Delta)^s_h - p U^{p-1}.

Discretely: kernel modes are checked by applying the tail-aware free-space
operator to their closed forms; the eigenpair comes from a dense symmetric
eigensolve on a truncated domain (|y| <= radius), whole-line for n = 1 and
per angular sector for n = 3 (Z_0, Z_{n+1} in ell = 0; Z_i in ell = 1 with
multiplicity n).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from . import bubble
from .fracops import (Exterior, GridField, LineGrid, RadialGrid,
                      frac_laplacian_dirichlet, frac_laplacian_free)
from .params import ProblemParams
from .quadrature import fit_tail_exponent


@dataclass
class SectorSpectrum:
    """Eigen decomposition of K = (-Delta)^s - pU^{p-1} on one sector."""

    label: str
    multiplicity: int
    nodes: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, in the nodal basis


@dataclass
class LinearizedOperator:
    """Dense symmetric discretization of the linearized operator.

    For n = 1 a single whole-line sector; for n = 3 the ell = 0 and
    ell = 1 radial sectors (multiplicities 1 and n).
    """

    params: ProblemParams
    radius: float
    spacing: float
    sectors: list = field(default_factory=list)

    def all_eigenvalues(self) -> np.ndarray:
        """Eigenvalues over all sectors, with multiplicity, ascending."""
        vals = []
        for sec in self.sectors:
            vals.extend(list(sec.eigenvalues) * sec.multiplicity)
        return np.sort(np.asarray(vals))


def _potential(params: ProblemParams, r: np.ndarray) -> np.ndarray:
    return params.p * bubble.profile(params, r) ** (params.p - 1.0)


def build_linearized(params: ProblemParams, radius: float = 40.0,
                     spacing: float = 0.04) -> LinearizedOperator:
    """Assemble K per sector and diagonalize (dense, truncated at |y|=radius)."""
    op = LinearizedOperator(params=params, radius=radius, spacing=spacing)
    if params.n == 1:
        nn = int(round(2 * radius / spacing))
        nodes = -radius + 2 * radius * np.arange(1, nn) / nn
        grid = LineGrid(nodes)
        frac = frac_laplacian_dirichlet(grid, params.s)
        K = frac.matrix - np.diag(_potential(params, np.abs(nodes)))
        vals, vecs = eigh(K)
        op.sectors.append(SectorSpectrum("line", 1, nodes, vals, vecs))
        return op
    if params.n == 3:
        n_cells = int(round(radius / spacing))
        for ell, mult in ((0, 1), (1, params.n)):
            grid = RadialGrid(n=3, r_max=radius, n_cells=n_cells, sector=ell)
            frac = frac_laplacian_dirichlet(grid, params.s)
            K = frac.sym_matrix - np.diag(frac.weights * _potential(params, grid.nodes))
            vals, vecs = eigh(K, np.diag(frac.weights))
            op.sectors.append(SectorSpectrum(f"ell{ell}", mult, grid.nodes, vals, vecs))
        return op
    raise NotImplementedError(f"spectrum supports n in {{1, 3}}, got n={params.n}")


# ---------------------------------------------------------------------------
# kernel-mode residuals (free-space, tail-aware)


def _mode_field_1d(params: ProblemParams, i: int, radius: float, spacing: float) -> GridField:
    nn = int(round(2 * radius / spacing))
    nodes = -radius + 2 * radius * np.arange(0, nn + 1) / nn
    grid = LineGrid(nodes)
    vals = bubble.kernel_mode(params, i, nodes)
    ext = Exterior(kind="callable", fn=lambda y, ii=i: bubble.kernel_mode(params, ii, y))
    return GridField(grid, vals, ext)


def kernel_residuals(params: ProblemParams, radius: float = 40.0,
                     spacing: float = 0.01, core: float = 20.0) -> np.ndarray:
    """|L0 Z_i|_inf / |Z_i|_inf for i = 1..n+1 on |y| <= core.

    Uses the free-space operator with the modes' exact closed forms as
    exterior data, so only quadrature error remains.
    """
    out = np.empty(params.n + 1)
    if params.n == 1:
        for i in (1, 2):
            fld = _mode_field_1d(params, i, radius, spacing)
            lap = frac_laplacian_free(fld, params.s)
            resid = -lap.values + _potential(params, np.abs(fld.grid.nodes)) * fld.values
            sel = np.abs(fld.grid.nodes) <= core
            out[i - 1] = np.max(np.abs(resid[sel])) / np.max(np.abs(fld.values))
        return out
    if params.n == 3:
        n_cells = int(round(radius / spacing))
        # the collocation rows within a few cells of the origin are first
        # order with large constants (1/r^2 Jacobian); measure away from them
        r_lo = 0.5
        # Z_i (i <= n): radial profile U'(r) in the ell = 1 sector
        grid1 = RadialGrid(n=3, r_max=radius, n_cells=n_cells, sector=1)
        prof = bubble.profile_deriv(params, grid1.nodes)
        ext1 = Exterior(kind="callable", fn=lambda r: bubble.profile_deriv(params, r))
        lap1 = frac_laplacian_free(GridField(grid1, prof, ext1), params.s)
        resid1 = -lap1.values + _potential(params, grid1.nodes) * prof
        sel = (grid1.nodes <= core) & (grid1.nodes >= r_lo)
        r_trans = np.max(np.abs(resid1[sel])) / np.max(np.abs(prof))
        out[:params.n] = r_trans
        # Z_{n+1}: radial (ell = 0)
        grid0 = RadialGrid(n=3, r_max=radius, n_cells=n_cells, sector=0)
        prof0 = bubble.dilation_mode(params, grid0.nodes)
        ext0 = Exterior(kind="callable", fn=lambda r: bubble.dilation_mode(params, r))
        lap0 = frac_laplacian_free(GridField(grid0, prof0, ext0), params.s)
        resid0 = -lap0.values + _potential(params, grid0.nodes) * prof0
        sel = (grid0.nodes <= core) & (grid0.nodes >= r_lo)
        out[params.n] = np.max(np.abs(resid0[sel])) / np.max(np.abs(prof0))
        return out
    raise NotImplementedError(f"spectrum supports n in {{1, 3}}, got n={params.n}")


# ---------------------------------------------------------------------------
# the negative eigenpair


@dataclass
class NegativeEigenpair:
    lambda0: float
    gap: float              # distance to the next eigenvalue (all sectors)
    nodes: np.ndarray
    z0: np.ndarray          # radial profile, normalized sup = 1
    tail_slope: float
    sign_changes: int


def negative_eigenpair(op: LinearizedOperator, fit_range=(6.0, 20.0)) -> NegativeEigenpair:
    """Smallest eigenvalue of K with its radial eigenfunction diagnostics.

    The eigenfunction lives in the radial sector (whole line for n = 1,
    ell = 0 for n = 3); the tail slope is fitted on fit_range.
    """
    sec = op.sectors[0]  # line (n=1) or ell=0 (n=3): contains the ground state
    vals = op.all_eigenvalues()
    lam0 = vals[0]
    if not np.isclose(sec.eigenvalues[0], lam0):
        raise RuntimeError("ground state not in the radial sector")
    gap = float(vals[1] - vals[0])
    vec = sec.eigenvectors[:, 0]
    vec = vec / vec[np.argmax(np.abs(vec))]
    r = np.abs(sec.nodes)
    sel = (r >= fit_range[0]) & (r <= fit_range[1]) & (np.abs(vec) > 0)
    slope, _ = fit_tail_exponent(r[sel], vec[sel])
    # count strict sign changes above the truncation noise floor
    sig = vec[np.abs(vec) > 1e-8]
    sign_changes = int(np.sum(np.sign(sig[:-1]) * np.sign(sig[1:]) < 0))
    return NegativeEigenpair(lambda0=float(lam0), gap=gap, nodes=sec.nodes,
                             z0=vec, tail_slope=slope, sign_changes=sign_changes)


def eigenvalue_counts(op: LinearizedOperator, eps: float) -> dict:
    """Counts below -eps and inside (-eps, eps), total and per sector."""
    per_sector = {}
    for sec in op.sectors:
        neg = int(np.sum(sec.eigenvalues < -eps))
        near = int(np.sum(np.abs(sec.eigenvalues) < eps))
        per_sector[sec.label] = {"negative": neg, "near_zero": near,
                                 "multiplicity": sec.multiplicity}
    vals = op.all_eigenvalues()
    return {"negative_total": int(np.sum(vals < -eps)),
            "near_zero_total": int(np.sum(np.abs(vals) < eps)),
            "per_sector": per_sector}
