"""Patch-based image denoising under patch-analysis and patch-synthesis priors."""

from .estimator import PatchDenoiser
from .exceptions import CapabilityError, CoverageError, DivergenceError
from .image import ImageBuffer, NoiseSpec, add_awgn, make_test_image, mse, psnr
from .patches import (
    PatchGrid,
    PatchStack,
    extract,
    plan_grid,
    project_range,
    qqt_diag,
    synthesize,
    synthesize_adjoint,
)
from .priors import (
    AnalysisTransformPrior,
    GmmPrior,
    L1Prior,
    L2SqPrior,
    PatchPrior,
    load_gmm,
    make_prior,
    save_gmm,
)
from .sampler import SampleJob, sample_prior_image, sample_prior_images
from .solvers import (
    AdmmConfig,
    HqsConfig,
    SolverResult,
    denoise_analysis_admm,
    denoise_analysis_hqs,
    denoise_synthesis_admm,
    objective_analysis,
    objective_synthesis,
    synthesis_z_update,
)

__version__ = "0.1.0"
