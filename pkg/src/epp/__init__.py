"""Edge-preserving projection deblurring.

A smooth reconstruction in the leading spectral subspace of the blur, plus a
p-norm (``1 < p < 2``) gradient correction in its orthogonal complement,
computed by IRLS with multigrid-preconditioned GMRES.
"""

from .basis import (CoeffSplit, SpectralBasis, UnsupportedOperatorError, analyze,
                    build_dct_basis, build_svd_basis, dct2, synthesize)
from .metrics import (QualityReport, UndefinedMetricError, mssim, noise_level, psnr,
                      quality_report, relative_error)
from .multigrid import WeightedDiffusion, mg_setup, mg_vcycle
from .operators import (BlurOperator, DimensionError, InvalidParameterError, Psf,
                        apply_blur, apply_gradient, apply_gradient_adjoint, apply_model,
                        blur_from_psf, make_custom_psf, make_gaussian_psf,
                        make_out_of_focus_psf, reflexive_matrix)
from .phantom import shapes_phantom, step_phantom
from .pipeline import EppResult, UniquenessError, check_uniqueness, epp_solve, solve_projected
from .pnorm import (IrlsOptions, IrlsTrace, gmres_right, irls_weights, line_search, pnorm,
                    solve_correction)
from .select import DEFAULT_SHRINK, GcvCurve, choose_k, gcv_curve, spectral_coefficients

__version__ = "0.1.0"

__all__ = [
    "BlurOperator", "CoeffSplit", "DEFAULT_SHRINK", "DimensionError", "EppResult",
    "GcvCurve", "InvalidParameterError", "IrlsOptions", "IrlsTrace", "Psf",
    "QualityReport", "SpectralBasis", "UndefinedMetricError", "UniquenessError",
    "UnsupportedOperatorError", "WeightedDiffusion", "analyze", "apply_blur",
    "apply_gradient", "apply_gradient_adjoint", "apply_model", "blur_from_psf",
    "build_dct_basis", "build_svd_basis", "check_uniqueness", "choose_k", "dct2",
    "epp_solve", "gcv_curve", "gmres_right", "irls_weights", "line_search",
    "make_custom_psf", "make_gaussian_psf", "make_out_of_focus_psf", "mg_setup",
    "mg_vcycle", "mssim", "noise_level", "pnorm", "psnr", "quality_report",
    "reflexive_matrix", "relative_error", "shapes_phantom", "solve_correction",
    "solve_projected", "spectral_coefficients", "step_phantom", "synthesize",
]
