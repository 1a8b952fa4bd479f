"""Patch-synthesis ADMM and the two patch-analysis solvers.

All objectives use one scale::

    synthesis:  1/(2 sigma^2) ||Q z - y||^2 + sum_m xi(z_m)
    analysis:   1/(2 sigma^2) ||x - y||^2   + sum_m xi(P_m x)

The synthesis ADMM splits ``z = u`` and uses the scaled dual ``d`` with

    z <- argmin 1/(2 sigma^2) ||Q z - y||^2 + rho/2 ||z - u - d||^2
    u <- prox_{xi/rho}(z - d)
    d <- d + u - z

(``d`` is the negative of the textbook scaled dual ``w`` in
``z <- ...||z - u + w||``, ``u <- prox(z + w)``, ``w <- w + z - u``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DivergenceError
from .image import ImageBuffer
from .io import atomic_write_bytes
from .patches import (
    PatchGrid,
    PatchStack,
    gather,
    scatter_mean,
    scatter_mean_adjoint,
    scatter_sum,
)
from .priors import PatchPrior


@dataclass
class AdmmConfig:
    sigma: float
    rho: float | None = None  # defaults to 1 / sigma^2
    max_iter: int = 300
    tol_abs: float = 1e-6
    tol_rel: float = 1e-4

    def __post_init__(self):
        if self.rho is None and self.sigma > 0:
            self.rho = 1.0 / self.sigma**2
        for name in ("sigma", "rho", "tol_abs", "tol_rel"):
            v = getattr(self, name)
            if not (v is not None and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive real, got {v}")
        if self.tol_abs > 1 or self.tol_rel > 1:
            raise ValueError("tolerances must be <= 1")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")


@dataclass
class HqsConfig:
    sigma: float
    beta_init: float | None = None  # defaults to 1 / sigma^2
    beta_growth: float = 4.0
    betas_count: int = 6
    inner_iters: int = 2

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be a positive real, got {self.sigma}")
        if self.beta_init is None:
            self.beta_init = 1.0 / self.sigma**2
        if not self.beta_init > 0:
            raise ValueError(f"beta_init must be positive, got {self.beta_init}")
        if not self.beta_growth > 1:
            raise ValueError(f"beta_growth must exceed 1, got {self.beta_growth}")
        if self.betas_count < 1 or self.inner_iters < 1:
            raise ValueError("betas_count and inner_iters must be positive")

    @property
    def betas(self) -> np.ndarray:
        return self.beta_init * self.beta_growth ** np.arange(self.betas_count)


@dataclass
class SolverResult:
    x_hat: ImageBuffer
    iterations: int
    objective_trace: list[float]
    primal_residual_trace: list[float]
    dual_residual_trace: list[float]
    converged: bool
    method: str
    nonconvex_prior: bool = False
    stacks: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else float("nan")

    def trace_text(self) -> str:
        """One line per iteration: ``iteration objective primal dual``."""
        lines = [
            f"# method={self.method} iterations={self.iterations} converged={self.converged}",
            "# iteration objective primal_residual dual_residual",
        ]
        for i, (f, r, s) in enumerate(
            zip(self.objective_trace, self.primal_residual_trace, self.dual_residual_trace), 1
        ):
            lines.append(f"{i} {f!r} {r!r} {s!r}")
        return "\n".join(lines) + "\n"

    def save_trace(self, path):
        atomic_write_bytes(path, self.trace_text().encode())


def load_trace(path) -> np.ndarray:
    """Read a trace file as an ``(iterations, 4)`` array."""
    return np.loadtxt(Path(path), comments="#", ndmin=2)


def _check_problem(grid: PatchGrid, prior: PatchPrior, y: ImageBuffer):
    if y.shape != grid.image_shape:
        raise ValueError(f"image shape {y.shape} does not match grid {grid.image_shape}")
    if prior.patch_dim != grid.n:
        raise ValueError(f"prior patch_dim {prior.patch_dim} does not match grid n={grid.n}")


def _xi(grid: PatchGrid, prior: PatchPrior, z: np.ndarray) -> float:
    return float(np.sum(prior.negloglik(z.reshape(grid.num_patches, grid.n))))


def _prox(grid: PatchGrid, prior: PatchPrior, v: np.ndarray, t: float) -> np.ndarray:
    return prior.prox(v.reshape(grid.num_patches, grid.n), t).reshape(-1)


def objective_synthesis(grid, prior, y: ImageBuffer, z, sigma: float) -> float:
    _check_problem(grid, prior, y)
    z = z.data if isinstance(z, PatchStack) else np.asarray(z, dtype=np.float64)
    r = scatter_mean(grid, z) - y.data
    return float(r @ r) / (2 * sigma**2) + _xi(grid, prior, z)


def objective_analysis(grid, prior, y: ImageBuffer, x, sigma: float) -> float:
    _check_problem(grid, prior, y)
    x = x.data if isinstance(x, ImageBuffer) else np.asarray(x, dtype=np.float64)
    r = x - y.data
    return float(r @ r) / (2 * sigma**2) + _xi(grid, prior, gather(grid, x))


def synthesis_z_update(grid: PatchGrid, y, u, d, sigma: float, rho: float) -> np.ndarray:
    """Minimiser of ``1/(2 sigma^2)||Qz - y||^2 + rho/2 ||z - u - d||^2``.

    Uses ``(Q^T Q + a I)^-1 = (I - Q^T (a I + Q Q^T)^-1 Q) / a`` with
    ``a = sigma^2 rho`` and ``Q Q^T = diag(1/c)``, so the cost is a handful
    of gathers and scatters.
    """
    y = y.data if isinstance(y, ImageBuffer) else np.asarray(y, dtype=np.float64)
    u = u.data if isinstance(u, PatchStack) else np.asarray(u, dtype=np.float64)
    d = d.data if isinstance(d, PatchStack) else np.asarray(d, dtype=np.float64)
    a = sigma**2 * rho
    s = scatter_mean_adjoint(grid, y) + a * (u + d)
    q = 1.0 / (a + 1.0 / grid.counts)
    return (s - scatter_mean_adjoint(grid, q * scatter_mean(grid, s))) / a


def _consensus_z_update(grid: PatchGrid, y: np.ndarray, target: np.ndarray, sigma, rho):
    # argmin over z = P x of 1/(2 sigma^2)||Q z - y||^2 + rho/2 ||z - target||^2; QP = I
    x = (y / sigma**2 + rho * scatter_sum(grid, target)) / (1.0 / sigma**2 + rho * grid.counts)
    return gather(grid, x)


def _tolerances(cfg: AdmmConfig, size: int, primal_scale: float, dual_scale: float):
    root = math.sqrt(size) * cfg.tol_abs
    return root + cfg.tol_rel * primal_scale, root + cfg.tol_rel * dual_scale


def denoise_synthesis_admm(
    y: ImageBuffer,
    grid: PatchGrid,
    prior: PatchPrior,
    cfg: AdmmConfig,
    consensus: bool = False,
) -> SolverResult:
    """MAP estimate under the patch-synthesis model, ``x_hat = Q z_hat``.

    With ``consensus=True`` the z-step is restricted to ``range(P)``
    (patches that agree on shared pixels); the solution is then the
    patch-analysis estimate.
    """
    _check_problem(grid, prior, y)
    sigma, rho = cfg.sigma, cfg.rho
    yv = y.data
    z = gather(grid, yv)
    u = z.copy()
    d = np.zeros_like(z)
    objective, primal, dual = [], [], []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        if consensus:
            z = _consensus_z_update(grid, yv, u + d, sigma, rho)
        else:
            z = synthesis_z_update(grid, yv, u, d, sigma, rho)
        u_old = u
        u = _prox(grid, prior, z - d, 1.0 / rho)
        d = d + u - z
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(u))):
            raise DivergenceError(it)
        r = float(np.linalg.norm(z - u))
        s = rho * float(np.linalg.norm(u - u_old))
        objective.append(objective_synthesis(grid, prior, y, z, sigma))
        primal.append(r)
        dual.append(s)
        eps_pri, eps_dual = _tolerances(
            cfg, z.size, max(np.linalg.norm(z), np.linalg.norm(u)), rho * np.linalg.norm(d)
        )
        if r <= eps_pri and s <= eps_dual:
            converged = True
            break
    x_hat = ImageBuffer(grid.image_height, grid.image_width, scatter_mean(grid, z))
    return SolverResult(
        x_hat=x_hat,
        iterations=it,
        objective_trace=objective,
        primal_residual_trace=primal,
        dual_residual_trace=dual,
        converged=converged,
        method="synthesis-admm" + ("-consensus" if consensus else ""),
        nonconvex_prior=not prior.is_convex_neglog,
        stacks={"z": PatchStack(grid, z), "u": PatchStack(grid, u), "d": PatchStack(grid, d)},
    )


def denoise_analysis_admm(y: ImageBuffer, grid: PatchGrid, prior: PatchPrior, cfg: AdmmConfig) -> SolverResult:
    """Patch-analysis MAP by ADMM on ``v = P x``.

    Scaled form with dual ``d`` on ``P x - v``::

        x <- (y/sigma^2 + rho P^T (v - d)) / (1/sigma^2 + rho c)
        v <- prox_{xi/rho}(P x + d)
        d <- d + P x - v
    """
    _check_problem(grid, prior, y)
    sigma, rho = cfg.sigma, cfg.rho
    yv = y.data
    x = yv.copy()
    v = gather(grid, x)
    d = np.zeros_like(v)
    denom = 1.0 / sigma**2 + rho * grid.counts
    objective, primal, dual = [], [], []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        x = (yv / sigma**2 + rho * scatter_sum(grid, v - d)) / denom
        px = gather(grid, x)
        v_old = v
        v = _prox(grid, prior, px + d, 1.0 / rho)
        d = d + px - v
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise DivergenceError(it)
        r = float(np.linalg.norm(px - v))
        s = rho * float(np.linalg.norm(scatter_sum(grid, v - v_old)))
        objective.append(objective_analysis(grid, prior, y, x, sigma))
        primal.append(r)
        dual.append(s)
        eps_pri, eps_dual = _tolerances(
            cfg, v.size, max(np.linalg.norm(px), np.linalg.norm(v)),
            rho * np.linalg.norm(scatter_sum(grid, d)),
        )
        if r <= eps_pri and s <= eps_dual:
            converged = True
            break
    return SolverResult(
        x_hat=ImageBuffer(grid.image_height, grid.image_width, x),
        iterations=it,
        objective_trace=objective,
        primal_residual_trace=primal,
        dual_residual_trace=dual,
        converged=converged,
        method="analysis-admm",
        nonconvex_prior=not prior.is_convex_neglog,
        stacks={"v": PatchStack(grid, v), "d": PatchStack(grid, d)},
    )


def hqs_objective(grid, prior, y: ImageBuffer, x, v, sigma: float, beta: float) -> float:
    """Smoothed objective ``1/(2 sigma^2)||x-y||^2 + beta/2 ||v - Px||^2 + sum xi(v_m)``."""
    x = x.data if isinstance(x, ImageBuffer) else np.asarray(x, dtype=np.float64)
    v = v.data if isinstance(v, PatchStack) else np.asarray(v, dtype=np.float64)
    r = x - y.data
    c = v - gather(grid, x)
    return float(r @ r) / (2 * sigma**2) + 0.5 * beta * float(c @ c) + _xi(grid, prior, v)


def denoise_analysis_hqs(
    y: ImageBuffer,
    grid: PatchGrid,
    prior: PatchPrior,
    cfg: HqsConfig,
    record_smoothed: bool = False,
) -> SolverResult:
    """EPLL-style half-quadratic splitting with an increasing ``beta`` schedule.

    Each inner iteration minimises exactly in ``v`` then in ``x``::

        v_m <- prox_{xi/beta}(P_m x)
        x   <- (y/sigma^2 + beta P^T v) / (1/sigma^2 + beta c)

    The objective trace holds the analysis objective at ``x``; the primal
    trace ``||v - P x||`` and the dual trace ``||x - x_prev||``.  With
    ``record_smoothed`` the smoothed objective after every half-step is
    kept in ``stacks["smoothed"]`` as ``(beta, after_v, after_x)`` rows.
    """
    _check_problem(grid, prior, y)
    sigma = cfg.sigma
    yv = y.data
    x = yv.copy()
    v = gather(grid, x)
    objective, primal, dual, smoothed = [], [], [], []
    it = 0
    for beta in cfg.betas:
        denom = 1.0 / sigma**2 + beta * grid.counts
        for _ in range(cfg.inner_iters):
            it += 1
            v = _prox(grid, prior, gather(grid, x), 1.0 / beta)
            if record_smoothed:
                after_v = hqs_objective(grid, prior, y, x, v, sigma, beta)
            x_old = x
            x = (yv / sigma**2 + beta * scatter_sum(grid, v)) / denom
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
                raise DivergenceError(it)
            if record_smoothed:
                smoothed.append((beta, after_v, hqs_objective(grid, prior, y, x, v, sigma, beta)))
            objective.append(objective_analysis(grid, prior, y, x, sigma))
            primal.append(float(np.linalg.norm(v - gather(grid, x))))
            dual.append(float(np.linalg.norm(x - x_old)))
    stacks = {"v": PatchStack(grid, v)}
    if record_smoothed:
        stacks["smoothed"] = np.array(smoothed)
    return SolverResult(
        x_hat=ImageBuffer(grid.image_height, grid.image_width, x),
        iterations=it,
        objective_trace=objective,
        primal_residual_trace=primal,
        dual_residual_trace=dual,
        converged=True,
        method="analysis-hqs",
        nonconvex_prior=not prior.is_convex_neglog,
        stacks=stacks,
    )


METHODS = {
    "synthesis-admm": denoise_synthesis_admm,
    "analysis-admm": denoise_analysis_admm,
    "analysis-hqs": denoise_analysis_hqs,
}
