"""Synthetic test images with sharp edges."""

import numpy as np

__all__ = ["shapes_phantom", "step_phantom"]


def shapes_phantom(m=256):
    """Piecewise-constant scene of rectangles, disks, a triangle and bars on a
    gently shaded background, with intensities in ``[0, 1]``.

    Geometry scales with ``m`` so any size gives the same picture.
    """
    t = (np.arange(m) + 0.5) / m
    yy, xx = np.meshgrid(t, t, indexing="ij")
    img = 0.15 + 0.1 * xx  # smooth shading keeps the scene from being purely flat

    img[(yy > 0.08) & (yy < 0.45) & (xx > 0.08) & (xx < 0.40)] = 0.55
    img[(yy > 0.18) & (yy < 0.35) & (xx > 0.16) & (xx < 0.32)] = 0.85
    img[(yy - 0.28) ** 2 + (xx - 0.70) ** 2 < 0.17 ** 2] = 0.95
    img[(yy - 0.28) ** 2 + (xx - 0.70) ** 2 < 0.07 ** 2] = 0.35
    img[((yy - 0.72) / 0.12) ** 2 + ((xx - 0.25) / 0.18) ** 2 < 1.0] = 0.70
    tri = (yy > 0.55) & (yy < 0.92) & (np.abs(xx - 0.72) < (yy - 0.55) * 0.55)
    img[tri] = 0.45
    for i in range(5):
        x0 = 0.06 + 0.035 * i
        img[(yy > 0.88) & (yy < 0.97) & (xx > x0) & (xx < x0 + 0.015)] = 1.0
    return img


def step_phantom(m=64, levels=(0.2, 0.8, 0.4, 1.0, 0.1), axis=1):
    """Image whose rows (``axis=1``) all hold the same piecewise-constant profile."""
    edges = np.linspace(0, m, len(levels) + 1).round().astype(int)
    profile = np.empty(m)
    for lo, hi, v in zip(edges[:-1], edges[1:], levels):
        profile[lo:hi] = v
    img = np.tile(profile, (m, 1))
    return img if axis == 1 else img.T
