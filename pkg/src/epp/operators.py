"""Matrix-free forward operators: point-spread functions, the Kronecker blur
operator with reflexive boundary conditions, and the discrete gradient.

Images are square ``m x m`` arrays. Whenever an image has to be flattened into
a vector (gradient output, sparse assemblies) column-major order is used, so
that ``vec(X) = X.ravel(order="F")`` and the blur ``A = A_row (x) A_col`` acts
as ``A_col @ X @ A_row.T``.
"""

from dataclasses import dataclass
import math

import numpy as np
import scipy.sparse as sp
from scipy import ndimage

__all__ = [
    "InvalidParameterError",
    "DimensionError",
    "Psf",
    "BlurOperator",
    "make_gaussian_psf",
    "make_out_of_focus_psf",
    "make_custom_psf",
    "reflexive_matrix",
    "blur_from_psf",
    "apply_blur",
    "apply_model",
    "apply_gradient",
    "apply_gradient_adjoint",
    "gradient_matrix",
    "gradient_length",
    "as_image",
]

#: kernel counts as separable when sigma_2 < SEPARABLE_RTOL * sigma_1
SEPARABLE_RTOL = 1e-10


class InvalidParameterError(ValueError):
    """A constructor argument is outside its admissible range."""


class DimensionError(ValueError):
    """Operand shape does not match the operator."""


def as_image(x, m=None):
    """Return ``x`` as a finite, square float64 array (side >= 2)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionError(f"expected a square image, got shape {x.shape}")
    if x.shape[0] < 2:
        raise DimensionError("image side must be at least 2")
    if m is not None and x.shape[0] != m:
        raise DimensionError(f"image side {x.shape[0]} does not match operator side {m}")
    if not np.all(np.isfinite(x)):
        raise ValueError("image contains non-finite entries")
    return x


@dataclass(frozen=True)
class Psf:
    """Normalized 2D point-spread function on an odd ``s x s`` grid."""

    kernel: np.ndarray
    center: tuple
    kind: str = "custom"

    @property
    def size(self):
        return self.kernel.shape[0]

    def describe(self):
        return {"kind": self.kind, "size": int(self.size)}


def _check_size(size):
    if int(size) != size or size < 1 or size % 2 == 0:
        raise InvalidParameterError(f"PSF size must be a positive odd integer, got {size}")
    return int(size)


def _offsets(size):
    c = (size - 1) // 2
    i = np.arange(size) - c
    return i[:, None], i[None, :]


def make_gaussian_psf(sigma, size=None, verbatim=False):
    """Gaussian PSF ``exp(-d^2 / (2 sigma^2))`` normalized to unit sum.

    Parameters
    ----------
    sigma : float
        Width of the blur, in pixels.
    size : int, optional
        Odd side length; defaults to ``4 * ceil(sigma) + 1``.
    verbatim : bool
        Use ``exp(-sigma^2 / 2 * d^2)`` instead. Larger sigma then gives a
        *narrower* kernel; only useful for reproducing that exact formula.
    """
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    if size is None:
        size = 4 * math.ceil(sigma) + 1
    size = _check_size(size)
    di, dj = _offsets(size)
    d2 = (di**2 + dj**2).astype(np.float64)
    if verbatim:
        kernel = np.exp(-0.5 * sigma**2 * d2)
    else:
        kernel = np.exp(-d2 / (2.0 * sigma**2))
    kernel /= kernel.sum()
    c = (size - 1) // 2
    return Psf(kernel, (c, c), "gaussian")


def make_out_of_focus_psf(r, size=None):
    """Uniform disk of radius ``r`` (lattice points with ``d^2 <= r^2``)."""
    if not r > 0:
        raise InvalidParameterError(f"radius must be positive, got {r}")
    if size is None:
        size = 2 * math.ceil(r) + 1
    size = _check_size(size)
    if size < 2 * r + 1:
        raise InvalidParameterError(f"disk of radius {r} is clipped by a {size}x{size} kernel")
    di, dj = _offsets(size)
    kernel = ((di**2 + dj**2) <= r * r).astype(np.float64)
    kernel /= kernel.sum()
    c = (size - 1) // 2
    return Psf(kernel, (c, c), "out_of_focus")


def make_custom_psf(kernel):
    """Wrap a user kernel: must be odd-sized, square and nonnegative."""
    kernel = np.array(kernel, dtype=np.float64)
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise InvalidParameterError("PSF kernel must be a square 2D array")
    size = _check_size(kernel.shape[0])
    if np.any(kernel < 0) or not kernel.sum() > 0:
        raise InvalidParameterError("PSF kernel must be nonnegative with positive sum")
    kernel /= kernel.sum()
    c = (size - 1) // 2
    return Psf(kernel, (c, c), "custom")


def reflexive_matrix(h, m):
    """Dense ``m x m`` matrix of 1D convolution with ``h`` under reflexive
    (half-sample symmetric) boundary conditions.

    The result is the Toeplitz part plus the two Hankel corner corrections,
    assembled by folding out-of-range taps back into the domain.
    """
    h = np.asarray(h, dtype=np.float64)
    s = h.size
    if s % 2 == 0:
        raise InvalidParameterError("1D kernel length must be odd")
    c = (s - 1) // 2
    rows = np.arange(m)
    A = np.zeros((m, m))
    for t in range(s):
        j = rows - (t - c)
        j = np.mod(j, 2 * m)
        j = np.where(j >= m, 2 * m - 1 - j, j)
        np.add.at(A, (rows, j), h[t])
    return A


@dataclass(frozen=True)
class BlurOperator:
    """Blur ``A = A_row (x) A_col`` acting as ``X -> A_col X A_row^T``.

    ``exact`` is False when the factors come from a nearest-Kronecker
    approximation of a non-separable PSF; ``psf`` then still holds the true
    kernel, and :func:`apply_model` uses it directly.
    """

    factor_col: np.ndarray
    factor_row: np.ndarray
    exact: bool = True
    psf: Psf = None
    kernel_col: np.ndarray = None
    kernel_row: np.ndarray = None

    @property
    def m(self):
        return self.factor_col.shape[0]

    @property
    def n(self):
        return self.m * self.m

    @property
    def boundary(self):
        return "reflexive"


def _rank_one_factors(kernel):
    U, s, Vt = np.linalg.svd(kernel)
    exact = kernel.shape[0] == 1 or s[1] < SEPARABLE_RTOL * s[0]
    hc = U[:, 0] * np.sqrt(s[0])
    hr = Vt[0] * np.sqrt(s[0])
    if hc.sum() < 0:
        hc, hr = -hc, -hr
    # balance so each factor has unit sum; the product is unchanged when exact
    sc = hc.sum()
    hc = hc / sc
    hr = hr * sc
    if not exact:
        hr = hr / hr.sum()
    return hc, hr, exact


def blur_from_psf(psf, m):
    """Build the Kronecker blur operator for ``psf`` on an ``m x m`` image."""
    if m < psf.size:
        raise InvalidParameterError(f"image side {m} smaller than PSF size {psf.size}")
    hc, hr, exact = _rank_one_factors(psf.kernel)
    return BlurOperator(
        factor_col=reflexive_matrix(hc, m),
        factor_row=reflexive_matrix(hr, m),
        exact=exact,
        psf=psf,
        kernel_col=hc,
        kernel_row=hr,
    )


def apply_blur(op, x, adjoint=False):
    """Apply the Kronecker blur (or its transpose) without forming ``A``."""
    x = as_image(x, op.m)
    if adjoint:
        return op.factor_col.T @ x @ op.factor_row
    return op.factor_col @ x @ op.factor_row.T


def apply_model(op, x, adjoint=False):
    """Apply the true forward model.

    Same as :func:`apply_blur` for separable PSFs. For an approximated
    operator the full 2D kernel is convolved with reflexive padding.
    """
    if op.exact or op.psf is None:
        return apply_blur(op, x, adjoint)
    x = as_image(x, op.m)
    if adjoint:
        return ndimage.correlate(x, op.psf.kernel, mode="reflect")
    return ndimage.convolve(x, op.psf.kernel, mode="reflect")


def gradient_length(m):
    return 2 * m * (m - 1)


def apply_gradient(x):
    """Stacked differences ``[(L1 (x) I) vec X; (I (x) L1) vec X]``."""
    x = as_image(x)
    gh = x[:, 1:] - x[:, :-1]
    gv = x[1:, :] - x[:-1, :]
    return np.concatenate([gh.ravel(order="F"), gv.ravel(order="F")])


def apply_gradient_adjoint(g, m=None):
    """Exact transpose of :func:`apply_gradient`."""
    g = np.asarray(g, dtype=np.float64)
    if m is None:
        m = int(round((1 + math.sqrt(1 + 2 * g.size)) / 2))
    if g.ndim != 1 or g.size != gradient_length(m) or m < 2:
        raise DimensionError(f"gradient vector of length {g.size} does not fit an m={m} image")
    half = m * (m - 1)
    gh = g[:half].reshape((m, m - 1), order="F")
    gv = g[half:].reshape((m - 1, m), order="F")
    x = np.zeros((m, m))
    x[:, :-1] -= gh
    x[:, 1:] += gh
    x[:-1, :] -= gv
    x[1:, :] += gv
    return x


def gradient_matrix(m):
    """Sparse ``L`` acting on column-major ``vec`` images."""
    e = np.ones(m)
    L1 = sp.diags([-e[:-1], e[:-1]], [0, 1], shape=(m - 1, m))
    eye = sp.identity(m)
    return sp.vstack([sp.kron(L1, eye), sp.kron(eye, L1)]).tocsr()
