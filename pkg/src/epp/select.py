"""Choice of the subspace dimension ``k`` by generalized cross-validation."""

from dataclasses import dataclass

import numpy as np

__all__ = ["GcvCurve", "spectral_coefficients", "gcv_curve", "choose_k", "DEFAULT_SHRINK"]

DEFAULT_SHRINK = 2.0 / 3.0


@dataclass(frozen=True)
class GcvCurve:
    """``values[k - 1] = G(k)`` for ``k = 1 .. n-1``; ``argmin`` is 1-based."""

    values: np.ndarray
    argmin: int
    k_max: int

    def summary(self):
        return {
            "gcv_argmin": int(self.argmin),
            "gcv_min": float(self.values[self.argmin - 1]),
            "gcv_k_max": int(self.k_max),
        }


def spectral_coefficients(basis, blur, b):
    """Ordered data coefficients ``beta_i = w_i^T b``.

    ``blur`` is accepted for interface symmetry; the basis already carries
    the left singular vectors it was built from.
    """
    if basis.m != blur.m:
        raise ValueError("basis and blur operator have different sizes")
    return basis.left_coefficients(b)


def gcv_curve(beta, k_max=None):
    """Evaluate ``G(k) = sum_{i>k} beta_i^2 / (n-k)^2`` with one reverse cumsum.

    ``k_max`` restricts the argmin search to ``1 .. k_max``; the returned
    values always cover the full range. Ties go to the smallest ``k``.
    """
    beta = np.asarray(beta, dtype=np.float64).ravel()
    n = beta.size
    if n < 2:
        raise ValueError("need at least two coefficients")
    tail = np.cumsum((beta**2)[::-1])[::-1]  # tail[i] = sum_{j>=i} beta_j^2 (0-based)
    k = np.arange(1, n)
    values = tail[1:] / (n - k) ** 2.0
    if k_max is None:
        k_max = n - 1
    k_max = int(min(max(k_max, 1), n - 1))
    argmin = int(np.argmin(values[:k_max])) + 1
    return GcvCurve(values, argmin, k_max)


def choose_k(curve, shrink=DEFAULT_SHRINK):
    """Shrink the GCV minimizer: ``round(shrink * argmin)`` clamped to ``[1, n-1]``.

    Python's ``round`` breaks exact halves toward the even integer.
    """
    if not 0 < shrink <= 1:
        raise ValueError(f"shrink must lie in (0, 1], got {shrink}")
    n_minus_1 = curve.values.size
    return int(min(max(1, round(shrink * curve.argmin)), n_minus_1))
