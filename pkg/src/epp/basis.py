"""Orthonormal spectral bases (2D DCT and Kronecker SVD) with matrix-free
synthesis and analysis for the signal subspace and its complement.

A basis maps an image to a length-``n`` coefficient vector in *ordered*
position: position 0 is the first basis vector, and the first ``k`` positions
span the signal subspace. Neither ``W_k`` nor ``W_0`` is ever materialized.
"""

from dataclasses import dataclass

import numpy as np
from scipy import fft

from .operators import apply_model, as_image, DimensionError

__all__ = [
    "UnsupportedOperatorError",
    "SpectralBasis",
    "CoeffSplit",
    "dct2",
    "dct_matrix",
    "build_dct_basis",
    "build_svd_basis",
    "synthesize",
    "analyze",
]

DIAGONALIZATION_RTOL = 1e-8


class UnsupportedOperatorError(ValueError):
    """The blur operator is not compatible with the requested basis."""


def dct2(x, inverse=False):
    """Orthonormal 2D DCT-II ``C X C^T`` (or its transpose)."""
    x = np.asarray(x, dtype=np.float64)
    if inverse:
        return fft.idctn(x, type=2, norm="ortho")
    return fft.dctn(x, type=2, norm="ortho")


def dct_matrix(m):
    """Dense orthogonal DCT matrix; rows are the basis vectors."""
    i = np.arange(m)[:, None]
    j = np.arange(m)[None, :]
    C = np.sqrt(2.0 / m) * np.cos((2 * j + 1) * i * np.pi / (2 * m))
    C[0, :] = np.sqrt(1.0 / m)
    return C


def _order(values):
    # stable sort keeps ascending (row-frequency, col-frequency) among ties
    return np.argsort(-values.ravel(), kind="stable")


@dataclass(frozen=True)
class CoeffSplit:
    """Ordered coefficients split at ``k`` into head (signal) and tail."""

    k: int
    head: np.ndarray
    tail: np.ndarray

    def __post_init__(self):
        n = self.head.size + self.tail.size
        if not 1 <= self.k < n:
            raise DimensionError(f"split index k={self.k} outside [1, {n - 1}]")
        if self.head.size != self.k:
            raise DimensionError(f"head has {self.head.size} entries, expected {self.k}")


@dataclass(frozen=True)
class SpectralBasis:
    """Ordered orthonormal basis of ``m x m`` images.

    ``spectral_values`` and ``eigenvalues`` are stored in ordered position.
    For the DCT kind ``eigenvalues`` are the signed eigenvalues of the blur;
    for the SVD kind they equal the singular values. ``ordering[i]`` is the
    row-major index ``r * m + c`` of the i-th basis vector in the natural
    coefficient grid.
    """

    kind: str
    m: int
    ordering: np.ndarray
    spectral_values: np.ndarray
    eigenvalues: np.ndarray
    exact: bool = True
    U_col: np.ndarray = None
    U_row: np.ndarray = None
    V_col: np.ndarray = None
    V_row: np.ndarray = None
    sigma_col: np.ndarray = None
    sigma_row: np.ndarray = None

    @property
    def n(self):
        return self.m * self.m

    @property
    def diagonalizes(self):
        """True when ``A W`` is diagonal in this basis for the true model."""
        return self.kind == "dct" or self.exact

    # natural coefficient grids
    def transform(self, x):
        if self.kind == "dct":
            return dct2(x)
        return self.V_col.T @ x @ self.V_row

    def inverse_transform(self, grid):
        if self.kind == "dct":
            return dct2(grid, inverse=True)
        return self.V_col @ grid @ self.V_row.T

    # ordered coefficient vectors
    def forward(self, x):
        """``W^T vec(x)`` in ordered position."""
        x = as_image(x, self.m)
        return self.transform(x).ravel()[self.ordering]

    def inverse(self, coeffs):
        """Image ``W c`` from ordered coefficients."""
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.shape != (self.n,):
            raise DimensionError(f"expected {self.n} coefficients, got {coeffs.shape}")
        grid = np.empty(self.n)
        grid[self.ordering] = coeffs
        return self.inverse_transform(grid.reshape(self.m, self.m))

    def left_coefficients(self, b):
        """Data coefficients ``beta_i = w_i^T b`` (left singular vectors for SVD)."""
        b = as_image(b, self.m)
        if self.kind == "dct":
            return self.forward(b)
        return (self.U_col.T @ b @ self.U_row).ravel()[self.ordering]

    def head_image(self, y_k):
        y_k = np.asarray(y_k, dtype=np.float64)
        c = np.zeros(self.n)
        c[: y_k.size] = y_k
        return self.inverse(c)

    def tail_image(self, y_0):
        y_0 = np.asarray(y_0, dtype=np.float64)
        c = np.zeros(self.n)
        c[self.n - y_0.size:] = y_0
        return self.inverse(c)

    def tail_coeffs(self, x, k):
        return self.forward(x)[k:]


def build_dct_basis(blur):
    """DCT basis ordered by decreasing ``|eigenvalue|`` of the blur, DC first.

    Eigenvalues come from transforming the blurred DC-normalized impulse.
    Raises :class:`UnsupportedOperatorError` if the DCT does not diagonalize
    the operator (kernel not doubly symmetric).
    """
    m = blur.m
    impulse = np.zeros((m, m))
    impulse[0, 0] = 1.0
    lam = dct2(apply_model(blur, impulse)) / dct2(impulse)

    probe = np.random.default_rng(0).standard_normal((m, m))
    lhs = dct2(apply_model(blur, probe))
    rhs = lam * dct2(probe)
    if np.linalg.norm(lhs - rhs) > DIAGONALIZATION_RTOL * max(np.linalg.norm(lhs), 1e-300):
        raise UnsupportedOperatorError(
            "blur is not diagonalized by the DCT (reflexive BC needs a doubly symmetric PSF)")

    ordering = _order(np.abs(lam))
    if ordering[0] != 0:
        ordering = np.concatenate([[0], ordering[ordering != 0]])
    eig = lam.ravel()[ordering]
    return SpectralBasis(
        kind="dct", m=m, ordering=ordering, spectral_values=np.abs(eig),
        eigenvalues=eig, exact=blur.exact)


def _fix_signs(U, V):
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, V * signs


def build_svd_basis(blur):
    """Right singular vectors ``Pi (V_row (x) V_col)`` of the Kronecker blur."""
    Uc, sc, Vct = np.linalg.svd(blur.factor_col)
    Ur, sr, Vrt = np.linalg.svd(blur.factor_row)
    Uc, Vc = _fix_signs(Uc, Vct.T)
    Ur, Vr = _fix_signs(Ur, Vrt.T)
    products = np.outer(sc, sr)
    ordering = _order(products)
    values = products.ravel()[ordering]
    return SpectralBasis(
        kind="svd", m=blur.m, ordering=ordering, spectral_values=values,
        eigenvalues=values, exact=blur.exact,
        U_col=Uc, U_row=Ur, V_col=Vc, V_row=Vr, sigma_col=sc, sigma_row=sr)


def synthesize(basis, split, part="both"):
    """``W_k y_k``, ``W_0 y_0`` or their sum, as an image."""
    n = basis.n
    if split.head.size + split.tail.size != n:
        raise DimensionError(f"split has {split.head.size + split.tail.size} coefficients, basis has {n}")
    c = np.zeros(n)
    if part in ("head", "both"):
        c[: split.k] = split.head
    if part in ("tail", "both"):
        c[split.k:] = split.tail
    if part not in ("head", "tail", "both"):
        raise ValueError(f"unknown part {part!r}")
    return basis.inverse(c)


def analyze(basis, x, k):
    """Ordered coefficients of ``x`` split at ``k``."""
    c = basis.forward(x)
    return CoeffSplit(k, c[:k].copy(), c[k:].copy())
