"""High-frequency correction: ``min_y ||L W_0 y + L W_k y_k||_p`` by IRLS.

Each outer iteration reweights with the current residual, solves the
projected normal equations with right-preconditioned GMRES (multigrid on
``L^T D^2 L`` wrapped by the tail projection) and line-searches the step.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .multigrid import WeightedDiffusion, mg_setup, mg_vcycle
from .operators import apply_gradient

__all__ = [
    "IrlsOptions",
    "IrlsRecord",
    "IrlsTrace",
    "GmresResult",
    "pnorm",
    "irls_weights",
    "line_search",
    "gmres_right",
    "CorrectionProblem",
    "solve_correction",
]

log = logging.getLogger(__name__)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
# an inner solve that leaves more than half the residual made little progress
STAGNATION_RESIDUAL = 0.5


@dataclass(frozen=True)
class IrlsOptions:
    """Solver settings for :func:`solve_correction`.

    ``p`` may equal 2 (the weighted problem is then plain least squares);
    the command line restricts it to the open interval (1, 2).
    """

    p: float = 1.01
    max_outer: int = 30
    outer_tol: float = 1e-3
    inner_tol: float = 1e-2
    gmres_restart: int = 50
    gmres_max: int = 200
    weight_floor: float = 1e-8
    line_search_upper: float = 2.0
    line_search_width: float = 1e-4
    mg_presmooth: int = 1
    mg_postsmooth: int = 1
    mg_cycles: int = 1
    mg_interpolation: str = "operator"
    precondition: bool = True

    def __post_init__(self):
        if not 1.0 < self.p <= 2.0:
            raise ValueError(f"p must satisfy 1 < p <= 2, got {self.p}")
        for name in ("outer_tol", "inner_tol", "weight_floor", "line_search_width"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_outer < 0 or self.gmres_restart < 1 or self.gmres_max < 1:
            raise ValueError("iteration budgets must be positive")
        if self.mg_presmooth < 0 or self.mg_postsmooth < 0 or self.mg_cycles < 1:
            raise ValueError("smoothing sweeps must be nonnegative and cycles at least 1")
        if self.mg_interpolation not in ("operator", "bilinear"):
            raise ValueError(f"unknown interpolation {self.mg_interpolation!r}")


@dataclass(frozen=True)
class IrlsRecord:
    objective: float
    step_norm: float
    relative_step: float
    alpha: float
    gmres_iterations: int
    gmres_residual: float


@dataclass
class IrlsTrace:
    """Per-iteration history of :func:`solve_correction`.

    ``converged`` means the relative step fell below ``outer_tol``. When the
    inner solve of that last iteration stagnated, the step can be small only
    because GMRES made no progress; ``inner_ok`` tells the two apart.
    """

    initial_objective: float
    records: list = field(default_factory=list)
    converged: bool = False
    stalled: bool = False
    stop_reason: str = "max_outer"
    inner_tol: float = None

    @property
    def inner_ok(self):
        """Whether the last inner solve met its tolerance."""
        if not self.records or self.inner_tol is None:
            return True
        return self.records[-1].gmres_residual <= self.inner_tol

    @property
    def iterations(self):
        return len(self.records)

    @property
    def objectives(self):
        return [self.initial_objective] + [r.objective for r in self.records]

    @property
    def final_objective(self):
        return self.objectives[-1]

    def summary(self):
        return {
            "irls_iterations": self.iterations,
            "irls_converged": bool(self.converged),
            "irls_stalled": bool(self.stalled),
            "irls_stop_reason": self.stop_reason,
            "final_inner_converged": bool(self.inner_ok),
            "objective_initial": float(self.initial_objective),
            "objective_final": float(self.final_objective),
            "final_relative_step": float(self.records[-1].relative_step) if self.records else 0.0,
            "gmres_iterations": [int(r.gmres_iterations) for r in self.records],
            "gmres_residuals": [float(r.gmres_residual) for r in self.records],
            "inner_stagnations": int(sum(r.gmres_residual > STAGNATION_RESIDUAL for r in self.records)),
            "line_search_alpha": [float(r.alpha) for r in self.records],
        }


@dataclass(frozen=True)
class GmresResult:
    solution: np.ndarray
    iterations: int
    residual: float
    converged: bool
    breakdown: bool = False


def pnorm(v, p):
    return float(np.sum(np.abs(v) ** p) ** (1.0 / p))


def irls_weights(residual, p, floor=1e-8):
    """IRLS weights ``max(|r_i|, floor ||r||_inf)^((p-2)/2)`` and their squares."""
    if not floor > 0:
        raise ValueError("floor must be positive")
    r = np.abs(np.asarray(residual, dtype=np.float64))
    scale = r.max() if r.size else 0.0
    if scale == 0.0:
        scale = 1.0
    w = np.maximum(r, floor * scale) ** ((p - 2.0) / 2.0)
    return w, w * w


def line_search(objective, upper=2.0, width=1e-4):
    """Golden-section search of a convex ``objective`` on ``[0, upper]``.

    Returns ``(alpha, objective(alpha))`` for the best sampled point; falls
    back to ``alpha = 0`` when no sample improves on ``objective(0)``.
    """
    best_a, best_f = 0.0, objective(0.0)
    a, b = 0.0, float(upper)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = objective(c), objective(d)
    for t, ft in ((c, fc), (d, fd)):
        if ft < best_f:
            best_a, best_f = t, ft
    while b - a > width:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = objective(c)
            t, ft = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = objective(d)
            t, ft = d, fd
        if ft < best_f:
            best_a, best_f = t, ft
    return best_a, best_f


def _identity(v):
    return v


def gmres_right(op, precond, rhs, tol=1e-6, restart=50, max_iter=200, x0=None):
    """Restarted GMRES on ``(op M) u = rhs`` returning ``x = x0 + M u``.

    ``op`` and ``precond`` are callables on 1D arrays (``precond=None`` means
    no preconditioning). Convergence is declared on the true relative
    residual ``||rhs - op(x)|| / ||rhs||``, which is also what is reported.
    """
    precond = precond or _identity
    rhs = np.asarray(rhs, dtype=np.float64)
    n = rhs.size
    bnorm = np.linalg.norm(rhs)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    if bnorm == 0.0:
        return GmresResult(np.zeros(n), 0, 0.0, True)
    r = rhs - op(x) if x0 is not None else rhs.copy()
    beta = np.linalg.norm(r)
    total = 0
    breakdown = False
    while beta / bnorm > tol and total < max_iter and not breakdown:
        m = min(restart, max_iter - total)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        j_used = 0
        for j in range(m):
            # copy: callers may hand back their input, and w is updated in place
            w = np.array(op(precond(V[j])), dtype=np.float64)
            total += 1
            wnorm0 = np.linalg.norm(w)
            for i in range(j + 1):
                H[i, j] = V[i] @ w
                w -= H[i, j] * V[i]
            h = np.linalg.norm(w)
            H[j + 1, j] = h
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = math.hypot(H[j, j], H[j + 1, j])
            j_used = j + 1
            if denom == 0.0:
                breakdown = True
                j_used = j
                break
            cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            if h <= 1e-14 * max(wnorm0, 1e-300):
                breakdown = True
                break
            V[j + 1] = w / h
            if abs(g[j + 1]) / bnorm <= tol:
                break
        if j_used > 0:
            y = np.linalg.solve(np.triu(H[:j_used, :j_used]), g[:j_used])
            x += precond(V[:j_used].T @ y)
        r = rhs - op(x)
        beta = np.linalg.norm(r)
    res = beta / bnorm
    converged = res <= tol
    return GmresResult(x, total, float(res), converged, breakdown and not converged)


class CorrectionProblem:
    """Matrix-free pieces of the projected p-norm problem for one ``(basis, k, y_k)``.

    Tail coefficient vectors ``y`` have length ``n - k``; the image they
    represent is ``W_0 y``.
    """

    def __init__(self, basis, k, y_k):
        self.basis = basis
        self.k = int(k)
        self.m = basis.m
        if not 1 <= self.k < basis.n:
            raise ValueError(f"k={k} outside [1, {basis.n - 1}]")
        self.y_k = np.asarray(y_k, dtype=np.float64)
        self.x_k = basis.head_image(self.y_k)
        self.grad_x_k = apply_gradient(self.x_k)

    @property
    def size(self):
        return self.basis.n - self.k

    def image(self, y0):
        return self.x_k + self.basis.tail_image(y0)

    def gradient(self, y0):
        """``L (W_k y_k + W_0 y0)``; the IRLS residual is its negative."""
        return apply_gradient(self.image(y0))

    def objective(self, y0, p):
        return pnorm(self.gradient(y0), p)

    def _apply_image(self, A, x):
        m = self.m
        return (A @ x.ravel(order="F")).reshape((m, m), order="F")

    def normal_operator(self, diffusion):
        """``v -> W_0^T (L^T D^2 L) W_0 v``."""
        A = diffusion.matrix
        basis, k = self.basis, self.k

        def op(v):
            return basis.tail_coeffs(self._apply_image(A, basis.tail_image(v)), k)
        return op

    def normal_rhs(self, diffusion):
        """``-W_0^T (L^T D^2 L) W_k y_k``."""
        return -self.basis.tail_coeffs(self._apply_image(diffusion.matrix, self.x_k), self.k)

    def preconditioner(self, hierarchy):
        """Three-step map ``v -> W_0^T mg(W_0 v)``."""
        basis, k = self.basis, self.k

        def prec(v):
            return basis.tail_coeffs(mg_vcycle(hierarchy, basis.tail_image(v)), k)
        return prec


def solve_correction(blur, basis, k, y_k, opts=None):
    """IRLS for the tail coefficients ``y_0``.

    Iterates in the ``q = z + y_0`` form: GMRES solves the projected normal
    equations for ``q`` warm-started at the current ``y_0`` (implemented as a
    solve for the step ``z`` with zero initial guess, so the inner tolerance
    is relative to the warm-start residual). Never raises on budget
    exhaustion; inspect ``trace.converged``.

    Returns
    -------
    y_0 : ndarray
        Tail coefficients of length ``n - k``.
    trace : IrlsTrace
    """
    opts = opts or IrlsOptions()
    if blur is not None and blur.m != basis.m:
        raise ValueError("blur and basis sizes differ")
    prob = CorrectionProblem(basis, k, y_k)
    p = opts.p
    y0 = np.zeros(prob.size)
    g = prob.grad_x_k
    f = pnorm(g, p)
    trace = IrlsTrace(initial_objective=f, inner_tol=opts.inner_tol)
    if f == 0.0:
        trace.converged = True
        trace.stop_reason = "zero_objective"
        return y0, trace

    for _ in range(opts.max_outer):
        _, d2 = irls_weights(-g, p, opts.weight_floor)
        diffusion = WeightedDiffusion(prob.m, d2)
        op = prob.normal_operator(diffusion)
        prec = None
        if opts.precondition:
            hier = mg_setup(diffusion, opts.mg_presmooth, opts.mg_postsmooth, opts.mg_cycles,
                            opts.mg_interpolation)
            prec = prob.preconditioner(hier)
        rhs = prob.normal_rhs(diffusion) - op(y0)
        res = gmres_right(op, prec, rhs, tol=opts.inner_tol,
                          restart=opts.gmres_restart, max_iter=opts.gmres_max)
        z = res.solution
        gz = apply_gradient(basis.tail_image(z))

        def along(alpha):
            return np.sum(np.abs(g + alpha * gz) ** p)

        alpha, _ = line_search(along, opts.line_search_upper, opts.line_search_width)
        step = alpha * z
        y0 = y0 + step
        g = prob.gradient(y0)
        f_new = pnorm(g, p)
        step_norm = float(np.linalg.norm(step))
        rel = step_norm / max(float(np.linalg.norm(y0)), 1e-300)
        trace.records.append(IrlsRecord(f_new, step_norm, rel, float(alpha), res.iterations, res.residual))
        log.debug("irls it=%d f=%.6e alpha=%.4f rel_step=%.3e gmres=%d res=%.2e",
                  trace.iterations, f_new, alpha, rel, res.iterations, res.residual)
        if alpha == 0.0:
            trace.stalled = True
            trace.stop_reason = "line_search_stall"
            break
        if rel < opts.outer_tol:
            trace.converged = True
            trace.stop_reason = "step_tolerance"
            break
    if trace.converged and not trace.inner_ok:
        log.warning("step tolerance met after a stagnated inner solve (relative residual %.2e); "
                    "the objective may still be well above its minimum", trace.records[-1].gmres_residual)
    return y0, trace
