"""Geometric multigrid for the weighted diffusion operator ``L^T D^2 L``.

Full coarsening by 2 per side (coarse points at even grid indices),
operator-dependent prolongation built from the level's own stencil, Galerkin
coarse operators ``P^T A P`` and lexicographic Gauss-Seidel smoothing. A
plain cell-centered bilinear prolongation is available for comparison; it
loses robustness once the weights jump by several orders of magnitude.

Vectors are column-major flattened images, matching the ordering of
:func:`epp.operators.apply_gradient`.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numba as nb
import numpy as np
import scipy.sparse as sp

from .operators import (apply_gradient, apply_gradient_adjoint, gradient_length,
                        gradient_matrix, as_image, DimensionError)

__all__ = [
    "WeightedDiffusion",
    "MgLevel",
    "MgHierarchy",
    "prolongation_1d",
    "bilinear_prolongation",
    "operator_prolongation",
    "mg_setup",
    "mg_vcycle",
    "WEIGHT_FLOOR",
]

WEIGHT_FLOOR = 1e-8
COARSEST_SIDE = 4  # coarsen while the grid side is at least this


@nb.njit(cache=True, nogil=True)
def _gauss_seidel(indptr, indices, data, x, b, sweeps):
    n = x.size
    for _ in range(sweeps):
        for i in range(n):
            acc = b[i]
            diag = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j == i:
                    diag = data[p]
                else:
                    acc -= data[p] * x[j]
            x[i] = acc / diag
    return x


@lru_cache(maxsize=8)
def _cached_gradient(m):
    L = gradient_matrix(m)
    return L, L.T.tocsr()


class WeightedDiffusion:
    """``L^T diag(d^2) L`` on an ``m x m`` grid.

    Weights below ``WEIGHT_FLOOR * max(d^2)`` are raised to that floor.
    """

    def __init__(self, m, d_squared):
        d_squared = np.asarray(d_squared, dtype=np.float64).ravel()
        if d_squared.size != gradient_length(m):
            raise DimensionError(f"need {gradient_length(m)} weights for m={m}, got {d_squared.size}")
        if np.any(~np.isfinite(d_squared)) or np.any(d_squared < 0):
            raise ValueError("weights must be finite and nonnegative")
        top = d_squared.max()
        if top <= 0:
            d_squared = np.ones_like(d_squared)
        else:
            d_squared = np.maximum(d_squared, WEIGHT_FLOOR * top)
        self.m = m
        self.d_squared = d_squared
        self._matrix = None

    @property
    def matrix(self):
        if self._matrix is None:
            L, Lt = _cached_gradient(self.m)
            self._matrix = (Lt @ sp.diags(self.d_squared) @ L).tocsr()
        return self._matrix

    def apply(self, x):
        """Matrix-free ``L^T D^2 L x`` on an image."""
        return apply_gradient_adjoint(self.d_squared * apply_gradient(x), self.m)


def prolongation_1d(m_fine):
    """Cell-centered linear interpolation from ``ceil(m/2)`` coarse cells.

    Rows sum to one, so constants are reproduced exactly.
    """
    m_coarse = (m_fine + 1) // 2
    rows, cols, vals = [], [], []
    for f in range(m_fine):
        t = (f + 0.5 - 1.0) / 2.0  # fine cell center in coarse index units
        i0 = int(np.floor(t))
        w = t - i0
        for i, wt in ((i0, 1.0 - w), (i0 + 1, w)):
            i = min(max(i, 0), m_coarse - 1)
            if wt:
                rows.append(f)
                cols.append(i)
                vals.append(wt)
    return sp.csr_matrix((vals, (rows, cols)), shape=(m_fine, m_coarse))


def bilinear_prolongation(A, m):
    P1 = prolongation_1d(m)
    return sp.kron(P1, P1).tocsr()


def _stencil(A, m):
    """Nine-point stencil arrays ``S[di + 1, dj + 1, i, j]`` of a sparse operator."""
    A = A.tocoo()
    ri, rj = A.row % m, A.row // m
    di = A.col % m - ri
    dj = A.col // m - rj
    if np.any(np.abs(di) > 1) or np.any(np.abs(dj) > 1):
        raise ValueError("operator is not a nine-point stencil")
    S = np.zeros((3, 3, m, m))
    np.add.at(S, (di + 1, dj + 1, ri, rj), A.data)
    return S


def operator_prolongation(A, m):
    """Black-box style interpolation from the even-indexed coarse points.

    Points between two coarse points along a grid line use the stencil
    collapsed onto that line; cell-center points use their full stencil
    applied to the already interpolated neighbours. Weights follow the
    coefficients, so interpolation does not smear across large jumps.
    """
    S = _stencil(A, m)
    mc = (m + 1) // 2
    ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    rows, cols, vals = [], [], []

    def put(i, j, ci, cj, w):
        rows.append(i + m * j)
        cols.append(ci + mc * cj)
        vals.append(w)

    c = (ii % 2 == 0) & (jj % 2 == 0)
    put(ii[c], jj[c], ii[c] // 2, jj[c] // 2, np.ones(np.count_nonzero(c)))

    # between horizontal neighbours: collapse the stencil over di
    e = (ii % 2 == 0) & (jj % 2 == 1)
    line = S.sum(axis=0)
    i, j = ii[e], jj[e]
    a_w, a_c, a_e = line[0][e], line[1][e], line[2][e]
    put(i, j, i // 2, (j - 1) // 2, -a_w / a_c)
    has = j + 1 < m
    put(i[has], j[has], i[has] // 2, (j[has] + 1) // 2, (-a_e / a_c)[has])

    # between vertical neighbours: collapse over dj
    e = (ii % 2 == 1) & (jj % 2 == 0)
    line = S.sum(axis=1)
    i, j = ii[e], jj[e]
    a_n, a_c, a_s = line[0][e], line[1][e], line[2][e]
    put(i, j, (i - 1) // 2, j // 2, -a_n / a_c)
    has = i + 1 < m
    put(i[has], j[has], (i[has] + 1) // 2, j[has] // 2, (-a_s / a_c)[has])

    P = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(m * m, mc * mc))
    center = ((ii % 2 == 1) & (jj % 2 == 1)).ravel(order="F")
    A = A.tocsr()
    diag = A.diagonal()
    scale = sp.diags(np.where(center, -1.0 / diag, 0.0))
    return (P + scale @ (A - sp.diags(diag)) @ P).tocsr()


_PROLONGATIONS = {"operator": operator_prolongation, "bilinear": bilinear_prolongation}


@dataclass
class MgLevel:
    m: int
    A: sp.csr_matrix
    P: sp.csr_matrix = None
    R: sp.csr_matrix = None


@dataclass
class MgHierarchy:
    levels: list
    coarse_inverse: np.ndarray
    presmooth: int = 1
    postsmooth: int = 1
    cycles: int = 1
    info: dict = field(default_factory=dict)

    @property
    def m(self):
        return self.levels[0].m


def mg_setup(weights, presmooth=1, postsmooth=1, cycles=1, interpolation="operator"):
    """Build the hierarchy for a :class:`WeightedDiffusion` operator."""
    prolong = _PROLONGATIONS[interpolation]
    A = weights.matrix
    m = weights.m
    levels = []
    while m >= COARSEST_SIDE:
        P = prolong(A, m)
        R = P.T.tocsr()
        levels.append(MgLevel(m, A, P, R))
        A = (R @ A @ P).tocsr()
        A.sort_indices()
        m = (m + 1) // 2
    levels.append(MgLevel(m, A))
    # constants span the null space at every level; pinv deflates it
    coarse_inverse = np.linalg.pinv(A.toarray(), hermitian=True)
    return MgHierarchy(levels, coarse_inverse, presmooth, postsmooth, cycles,
                       info={"n_levels": len(levels), "coarsest_side": m})


def _cycle(hier, lvl, b):
    level = hier.levels[lvl]
    if lvl == len(hier.levels) - 1:
        return hier.coarse_inverse @ b
    A = level.A
    x = np.zeros_like(b)
    _gauss_seidel(A.indptr, A.indices, A.data, x, b, hier.presmooth)
    r = b - A @ x
    x += level.P @ _cycle(hier, lvl + 1, level.R @ r)
    _gauss_seidel(A.indptr, A.indices, A.data, x, b, hier.postsmooth)
    return x


def mg_vcycle(hier, rhs):
    """Approximate ``(L^T D^2 L)^+ rhs`` by V-cycles from a zero guess.

    Input and output are projected off the constant null space.
    """
    rhs = as_image(rhs, hier.m)
    b = rhs.ravel(order="F")
    b = b - b.mean()
    A = hier.levels[0].A
    x = _cycle(hier, 0, b)
    for _ in range(hier.cycles - 1):
        x += _cycle(hier, 0, b - A @ x)
    x -= x.mean()
    return x.reshape((hier.m, hier.m), order="F")
