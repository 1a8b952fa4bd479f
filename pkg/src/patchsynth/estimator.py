"""scikit-learn style wrapper around the patch denoisers."""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .image import ImageBuffer, psnr
from .patches import plan_grid
from .priors import PatchPrior, make_prior
from .solvers import (
    METHODS,
    AdmmConfig,
    HqsConfig,
    denoise_analysis_admm,
    denoise_analysis_hqs,
    denoise_synthesis_admm,
)
from .validation import check_image, check_pair, check_positive


class PatchDenoiser(TransformerMixin, BaseEstimator):
    """Denoise a grayscale image with a patch prior.

    ``fit`` plans the patch grid for the image shape and builds the prior;
    ``transform`` runs the chosen solver on a noisy image of that shape.

    Parameters
    ----------
    method : {"synthesis-admm", "analysis-admm", "analysis-hqs"}
    prior : str or PatchPrior
        ``l1``, ``l2``, ``dct-l1``, ``dct-l2``, ``gmm:<path>``, or an instance.
    lam : float
        Prior weight for the named convex priors.
    patch_size, stride : int or (int, int)
    boundary : {"clip", "periodic"}
    sigma : float
        Noise standard deviation.
    rho : float, optional
        ADMM penalty, defaults to ``1 / sigma**2``.
    beta_init, beta_growth, beta_stages, inner_iters
        HQS schedule.

    Attributes
    ----------
    grid_ : PatchGrid
    prior_ : PatchPrior
    result_ : SolverResult
        Set by the last ``transform`` call.
    """

    def __init__(
        self,
        method="synthesis-admm",
        prior="dct-l1",
        lam=0.05,
        patch_size=8,
        stride=4,
        boundary="clip",
        sigma=0.1,
        rho=None,
        max_iter=300,
        tol_abs=1e-6,
        tol_rel=1e-4,
        beta_init=None,
        beta_growth=4.0,
        beta_stages=6,
        inner_iters=2,
        gmm_path=None,
    ):
        self.method = method
        self.prior = prior
        self.lam = lam
        self.patch_size = patch_size
        self.stride = stride
        self.boundary = boundary
        self.sigma = sigma
        self.rho = rho
        self.max_iter = max_iter
        self.tol_abs = tol_abs
        self.tol_rel = tol_rel
        self.beta_init = beta_init
        self.beta_growth = beta_growth
        self.beta_stages = beta_stages
        self.inner_iters = inner_iters
        self.gmm_path = gmm_path

    def fit(self, X, y=None):
        img = check_image(X)
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {sorted(METHODS)}, got {self.method!r}")
        check_positive("sigma", self.sigma)
        ph, pw = check_pair("patch_size", self.patch_size)
        sy, sx = check_pair("stride", self.stride)
        self.grid_ = plan_grid(img.height, img.width, ph, pw, sy, sx, self.boundary)
        if isinstance(self.prior, PatchPrior):
            prior = self.prior
            if prior.patch_dim != ph * pw:
                raise ValueError(f"prior patch_dim {prior.patch_dim} != patch size {ph * pw}")
        else:
            prior = make_prior(self.prior, self.lam, ph, pw, gmm_path=self.gmm_path)
        self.prior_ = prior
        return self

    def _config(self):
        if self.method == "analysis-hqs":
            return HqsConfig(
                sigma=self.sigma,
                beta_init=self.beta_init,
                beta_growth=self.beta_growth,
                betas_count=self.beta_stages,
                inner_iters=self.inner_iters,
            )
        return AdmmConfig(
            sigma=self.sigma,
            rho=self.rho,
            max_iter=self.max_iter,
            tol_abs=self.tol_abs,
            tol_rel=self.tol_rel,
        )

    def transform(self, X):
        check_is_fitted(self, "grid_")
        img = check_image(X)
        if img.shape != self.grid_.image_shape:
            raise ValueError(f"image shape {img.shape} differs from fitted shape {self.grid_.image_shape}")
        solver = {
            "synthesis-admm": denoise_synthesis_admm,
            "analysis-admm": denoise_analysis_admm,
            "analysis-hqs": denoise_analysis_hqs,
        }[self.method]
        self.result_ = solver(img, self.grid_, self.prior_, self._config())
        if isinstance(X, ImageBuffer):
            return self.result_.x_hat
        return self.result_.x_hat.to_array()

    def score(self, X, y):
        """PSNR (dB, peak 1) of ``transform(X)`` against the clean image ``y``."""
        return psnr(check_image(self.transform(X)), check_image(y), peak=1.0)
