"""Slow dense reference implementations used to certify the fast paths.

Nothing here calls :mod:`patchsynth.patches` kernels or the solvers: the
patch membership is re-derived from the grid's geometry parameters with
plain loops, and the optimisation oracles work on explicit matrices.
Only use on small grids (see :data:`MAX_ENTRIES`).
"""

from __future__ import annotations

import numpy as np
from scipy import linalg

from .priors import PatchPrior

MAX_ENTRIES = 10**7


def _guard(rows: int, cols: int):
    if rows * cols > MAX_ENTRIES:
        raise MemoryError(f"dense operator {rows}x{cols} exceeds the {MAX_ENTRIES}-entry guard")


def _patch_pixels(grid) -> list[list[int]]:
    H, W = grid.image_height, grid.image_width
    ph, pw = grid.patch_height, grid.patch_width
    if grid.boundary == "clip":
        ys = range(0, H - ph + 1, grid.stride_y)
        xs = range(0, W - pw + 1, grid.stride_x)
    else:
        ys = range(0, H, grid.stride_y)
        xs = range(0, W, grid.stride_x)
    patches = []
    for y0 in ys:
        for x0 in xs:
            pix = []
            for dy in range(ph):
                for dx in range(pw):
                    pix.append(((y0 + dy) % H) * W + (x0 + dx) % W)
            patches.append(pix)
    return patches


def dense_P(grid) -> np.ndarray:
    """``(M n) x N`` binary extraction matrix."""
    patches = _patch_pixels(grid)
    n, N = grid.patch_height * grid.patch_width, grid.image_height * grid.image_width
    _guard(len(patches) * n, N)
    P = np.zeros((len(patches) * n, N))
    for m, pix in enumerate(patches):
        for j, i in enumerate(pix):
            P[m * n + j, i] = 1.0
    return P


def dense_Q(grid) -> np.ndarray:
    """``N x (M n)`` averaging synthesis matrix ``[Q_1 ... Q_M]``."""
    P = dense_P(grid)
    counts = P.sum(axis=0)
    if np.any(counts == 0):
        raise ValueError("grid leaves a pixel uncovered")
    return P.T / counts[:, None]


def dense_Q_blocks(grid) -> list[np.ndarray]:
    """The individual ``N x n`` blocks ``Q_m``."""
    Q = dense_Q(grid)
    n = grid.patch_height * grid.patch_width
    return [Q[:, m * n : (m + 1) * n] for m in range(Q.shape[1] // n)]


def direct_z_update(grid, y, u, d, sigma, rho) -> np.ndarray:
    """Solve ``(Q^T Q + sigma^2 rho I) z = Q^T y + sigma^2 rho (u + d)`` densely."""
    Q = dense_Q(grid)
    _guard(Q.shape[1], Q.shape[1])
    a = sigma**2 * rho
    assert a > 0
    A = Q.T @ Q + a * np.eye(Q.shape[1])
    rhs = Q.T @ np.asarray(y, float) + a * (np.asarray(u, float) + np.asarray(d, float))
    return linalg.solve(A, rhs, assume_a="pos")


def ridge_synthesis_solution(grid, y, sigma, lam) -> np.ndarray:
    """Patch-synthesis MAP image for ``xi = lam ||.||^2``: ``Q z*`` with
    ``z* = (Q^T Q / sigma^2 + 2 lam I)^-1 Q^T y / sigma^2``."""
    Q = dense_Q(grid)
    A = Q.T @ Q / sigma**2 + 2 * lam * np.eye(Q.shape[1])
    z = linalg.solve(A, Q.T @ np.asarray(y, float) / sigma**2, assume_a="pos")
    return Q @ z


def ridge_analysis_solution(grid, y, sigma, lam) -> np.ndarray:
    """Patch-analysis MAP image for ``xi = lam ||.||^2``:
    ``(I / sigma^2 + 2 lam P^T P) x = y / sigma^2``."""
    P = dense_P(grid)
    A = np.eye(P.shape[1]) / sigma**2 + 2 * lam * P.T @ P
    return linalg.solve(A, np.asarray(y, float) / sigma**2, assume_a="pos")


def _spectral_norm_sq(A: np.ndarray, iters: int = 200, seed: int = 0) -> float:
    v = np.random.default_rng(seed).standard_normal(A.shape[1])
    lam = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        lam = float(np.linalg.norm(w))
        if lam == 0:
            return 0.0
        v = w / lam
    return lam


def _neglog(prior: PatchPrior, z: np.ndarray) -> float:
    return float(np.sum(prior.negloglik(z.reshape(-1, prior.patch_dim))))


def proximal_gradient_reference(A, y, sigma, prior: PatchPrior, step=None, iters=20000):
    """Plain proximal gradient on ``1/(2 sigma^2)||A z - y||^2 + sum_m xi(z_m)``.

    Returns ``(z, objective_trace)``.  ``step`` defaults to
    ``0.99 sigma^2 / ||A||^2`` with the norm from power iteration.
    """
    if not prior.is_convex_neglog:
        raise ValueError("proximal gradient reference requires a convex prior")
    A = np.asarray(A, float)
    y = np.asarray(y, float)
    norm_sq = _spectral_norm_sq(A)
    max_step = sigma**2 / norm_sq if norm_sq > 0 else np.inf
    if step is None:
        step = 0.99 * max_step
    elif step > max_step * (1 + 1e-9):
        raise ValueError(f"step {step} exceeds sigma^2/||A||^2 = {max_step}")
    n = prior.patch_dim

    def objective(z):
        r = A @ z - y
        return float(r @ r) / (2 * sigma**2) + _neglog(prior, z)

    z = np.zeros(A.shape[1])
    trace = [objective(z)]
    for _ in range(iters):
        grad = A.T @ (A @ z - y) / sigma**2
        z = prior.prox((z - step * grad).reshape(-1, n), step).reshape(-1)
        trace.append(objective(z))
    return z, np.array(trace)


def analysis_dual_reference(P, y, sigma, prior: PatchPrior, iters=20000):
    """Patch-analysis MAP ``min_x 1/(2 sigma^2)||x - y||^2 + sum_m xi((P x)_m)``
    by accelerated proximal gradient on the dual.

    Dual: ``min_w sigma^2/2 ||P^T w||^2 - <w, P y> + xi*(w)``, primal
    recovery ``x = y - sigma^2 P^T w``; ``prox_{tau xi*}`` comes from the
    Moreau identity.  Returns ``(x, primal_objective)``.
    """
    if not prior.is_convex_neglog:
        raise ValueError("dual reference requires a convex prior")
    P = np.asarray(P, float)
    y = np.asarray(y, float)
    n = prior.patch_dim
    Py = P @ y
    tau = 1.0 / (sigma**2 * _spectral_norm_sq(P.T))

    def prox_conj(a):
        return a - tau * prior.prox((a / tau).reshape(-1, n), 1.0 / tau).reshape(-1)

    w = np.zeros(P.shape[0])
    w_prev = w
    s = w
    t = 1.0
    for _ in range(iters):
        grad = sigma**2 * (P @ (P.T @ s)) - Py
        w_prev, w = w, prox_conj(s - tau * grad)
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        s = w + ((t - 1) / t_next) * (w - w_prev)
        t = t_next
    x = y - sigma**2 * (P.T @ w)
    r = x - y
    return x, float(r @ r) / (2 * sigma**2) + _neglog(prior, P @ x)
