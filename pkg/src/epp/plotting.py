"""Report figures written next to the JSON output of ``epp deblur``.

Uses the object-oriented matplotlib API with the Agg canvas so no display or
global pyplot state is involved.
"""

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

__all__ = ["decomposition_figure", "gcv_figure", "convergence_figure", "save"]

DPI = 120


def _new(width, height, nrows=1, ncols=1):
    fig = Figure(figsize=(width, height))
    FigureCanvasAgg(fig)
    axes = fig.subplots(nrows, ncols, squeeze=False)
    return fig, axes


def save(fig, path):
    fig.savefig(path, dpi=DPI, bbox_inches="tight", metadata={"Software": None})


def _show(ax, img, title, cmap, symmetric=False):
    if symmetric:
        v = float(np.max(np.abs(img))) or 1.0
        ax.imshow(img, cmap=cmap, vmin=-v, vmax=v, interpolation="nearest")
    else:
        ax.imshow(img, cmap=cmap, vmin=0.0, vmax=1.0, interpolation="nearest")
    ax.set_title(title, fontsize=9)
    ax.set_axis_off()


def decomposition_figure(blurred, x_k, x_0, restored, cmap="gray"):
    """Blurred data, smooth component, correction and reconstruction side by side."""
    fig, axes = _new(10, 2.8, 1, 4)
    _show(axes[0, 0], blurred, "blurred, noisy", cmap)
    _show(axes[0, 1], x_k, "smooth component $x_k$", cmap)
    _show(axes[0, 2], x_0, "correction $x_0$", "RdBu_r", symmetric=True)
    _show(axes[0, 3], restored, "reconstruction", cmap)
    return fig


def gcv_figure(curve, k_used=None):
    fig, axes = _new(4.5, 3.2)
    ax = axes[0, 0]
    k = np.arange(1, curve.values.size + 1)
    ax.semilogy(k, np.maximum(curve.values, np.finfo(float).tiny), lw=1)
    ax.axvline(curve.argmin, color="C1", ls="--", lw=1, label=f"GCV minimum k={curve.argmin}")
    if k_used is not None:
        ax.axvline(k_used, color="C2", lw=1, label=f"used k={k_used}")
    ax.set_xlabel("k")
    ax.set_ylabel("G(k)")
    ax.legend(fontsize=8, frameon=False)
    ax.grid(alpha=0.3)
    return fig


def convergence_figure(trace):
    """Objective per IRLS iteration and inner GMRES iteration counts."""
    fig, axes = _new(8, 3, 1, 2)
    obj = np.asarray(trace.objectives)
    axes[0, 0].plot(np.arange(obj.size), obj, ".-")
    axes[0, 0].set_xlabel("IRLS iteration")
    axes[0, 0].set_ylabel("$\\|Lx\\|_p$")
    its = [r.gmres_iterations for r in trace.records]
    axes[0, 1].bar(np.arange(1, len(its) + 1), its, color="C0")
    axes[0, 1].set_xlabel("IRLS iteration")
    axes[0, 1].set_ylabel("GMRES iterations")
    for ax in axes[0]:
        ax.grid(alpha=0.3)
    return fig
