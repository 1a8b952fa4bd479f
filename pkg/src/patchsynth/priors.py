"""Patch priors: negative log-density, proximity operator and sampling.

Every prior acts on vectors of length ``patch_dim``.  Methods also accept a
``(..., patch_dim)`` batch and act patch-wise, which is how the solvers
call them.

Additive constants of ``negloglik``:

* :class:`L1Prior`, :class:`L2SqPrior`, :class:`AnalysisTransformPrior`
  return the bare penalty (zero at the origin), i.e. the normalising
  constant of the density is dropped;
* :class:`GmmPrior` returns the exact normalised ``-log p(u)``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import fft, linalg
from scipy.special import logsumexp

from ._random import SeedLike, as_rng, gaussian, laplace
from .exceptions import CapabilityError


class PatchPrior:
    """Interface shared by all patch priors."""

    has_exact_prox = True
    is_convex_neglog = True
    can_sample = True

    def __init__(self, patch_dim: int):
        if int(patch_dim) != patch_dim or patch_dim < 1:
            raise ValueError(f"patch_dim must be a positive integer, got {patch_dim}")
        self.patch_dim = int(patch_dim)

    def _check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.ndim == 0 or u.shape[-1] != self.patch_dim:
            raise ValueError(f"expected patch vectors of length {self.patch_dim}, got shape {u.shape}")
        if not np.all(np.isfinite(u)):
            raise ValueError("patch contains non-finite values")
        return u

    @staticmethod
    def _check_t(t):
        if not t > 0:
            raise ValueError(f"prox step t must be positive, got {t}")

    def negloglik(self, u):
        raise NotImplementedError

    def prox(self, v, t: float):
        raise NotImplementedError

    def sample(self, seed: SeedLike, size: int | None = None):
        """One patch (``size=None``) or ``(size, n)`` i.i.d. patches."""
        raise CapabilityError(f"{type(self).__name__} cannot be sampled")

    def _shape(self, size):
        return (self.patch_dim,) if size is None else (int(size), self.patch_dim)


class L1Prior(PatchPrior):
    """``xi(u) = lam * ||u||_1``."""

    def __init__(self, lam: float, patch_dim: int):
        super().__init__(patch_dim)
        if not lam > 0:
            raise ValueError(f"lam must be positive, got {lam}")
        self.lam = float(lam)

    def negloglik(self, u):
        u = self._check(u)
        return self.lam * np.abs(u).sum(axis=-1)

    def prox(self, v, t):
        v = self._check(v)
        self._check_t(t)
        return np.sign(v) * np.maximum(np.abs(v) - self.lam * t, 0.0)

    def sample(self, seed, size=None):
        shape = self._shape(size)
        return laplace(as_rng(seed), int(np.prod(shape)), 1.0 / self.lam).reshape(shape)

    def __repr__(self):
        return f"L1Prior(lam={self.lam}, patch_dim={self.patch_dim})"


class L2SqPrior(PatchPrior):
    """``xi(u) = lam * ||u||_2^2``; the density is N(0, I / (2 lam))."""

    def __init__(self, lam: float, patch_dim: int):
        super().__init__(patch_dim)
        if not lam > 0:
            raise ValueError(f"lam must be positive, got {lam}")
        self.lam = float(lam)

    def negloglik(self, u):
        u = self._check(u)
        return self.lam * np.square(u).sum(axis=-1)

    def prox(self, v, t):
        v = self._check(v)
        self._check_t(t)
        return v / (1.0 + 2.0 * self.lam * t)

    def sample(self, seed, size=None):
        shape = self._shape(size)
        std = np.sqrt(0.5 / self.lam)
        return std * gaussian(as_rng(seed), int(np.prod(shape))).reshape(shape)

    def __repr__(self):
        return f"L2SqPrior(lam={self.lam}, patch_dim={self.patch_dim})"


def dct_matrix(patch_height: int, patch_width: int) -> np.ndarray:
    """Orthonormal 2D DCT-II acting on row-major flattened patches."""
    ch = fft.dct(np.eye(patch_height), norm="ortho", axis=0)
    cw = fft.dct(np.eye(patch_width), norm="ortho", axis=0)
    return np.kron(ch, cw)


class AnalysisTransformPrior(PatchPrior):
    """``xi(u) = lam * sum_k w_k * phi((B u)_k)`` with ``B`` orthonormal.

    ``phi`` is ``|.|`` (``inner="l1"``) or ``(.)**2`` (``inner="l2"``).
    Orthonormality makes the prox exact: ``B^T prox_inner(B v)``.
    ``weights`` (default all ones) lets single coefficients go unpenalised;
    a zero weight makes the density improper, so sampling is disabled.
    """

    def __init__(self, B, lam: float, inner: str = "l1", weights=None):
        B = np.asarray(B, dtype=np.float64)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise ValueError("transform must be a square matrix")
        super().__init__(B.shape[0])
        if not np.allclose(B.T @ B, np.eye(self.patch_dim), atol=1e-10, rtol=0):
            raise ValueError("transform is not orthonormal (B^T B != I)")
        if inner not in ("l1", "l2"):
            raise ValueError(f"inner penalty must be 'l1' or 'l2', got {inner!r}")
        if not lam > 0:
            raise ValueError(f"lam must be positive, got {lam}")
        self.B = B
        self.lam = float(lam)
        self.inner = inner
        self.weights = np.ones(self.patch_dim) if weights is None else np.asarray(weights, float)
        if self.weights.shape != (self.patch_dim,) or np.any(self.weights < 0):
            raise ValueError("weights must be a nonnegative vector of length patch_dim")
        self.can_sample = bool(np.all(self.weights > 0))

    @classmethod
    def dct(cls, patch_height, patch_width, lam, inner="l1", penalize_dc=False):
        """2D DCT prior; by default the DC coefficient is left unpenalised."""
        weights = np.ones(patch_height * patch_width)
        if not penalize_dc:
            weights[0] = 0.0
        return cls(dct_matrix(patch_height, patch_width), lam, inner, weights)

    def _coef(self, u):
        return u @ self.B.T

    def negloglik(self, u):
        c = self._coef(self._check(u))
        if self.inner == "l1":
            return self.lam * (np.abs(c) @ self.weights)
        return self.lam * (np.square(c) @ self.weights)

    def prox(self, v, t):
        c = self._coef(self._check(v))
        self._check_t(t)
        w = self.lam * t * self.weights
        if self.inner == "l1":
            c = np.sign(c) * np.maximum(np.abs(c) - w, 0.0)
        else:
            c = c / (1.0 + 2.0 * w)
        return c @ self.B

    def sample(self, seed, size=None):
        if not self.can_sample:
            raise CapabilityError("transform prior with unpenalised coefficients is improper")
        shape = self._shape(size)
        rng = as_rng(seed)
        count = int(np.prod(shape))
        scale = self.lam * np.broadcast_to(self.weights, shape).reshape(-1)
        if self.inner == "l1":
            c = laplace(rng, count) / scale
        else:
            c = gaussian(rng, count) * np.sqrt(0.5 / scale)
        return c.reshape(shape) @ self.B

    def __repr__(self):
        return f"AnalysisTransformPrior(inner={self.inner!r}, lam={self.lam}, patch_dim={self.patch_dim})"


class GmmPrior(PatchPrior):
    """Gaussian mixture ``sum_k pi_k N(mu_k, Sigma_k)`` with fixed parameters.

    The prox is the usual best-component approximation: pick the component
    with the largest responsibility for ``v`` under extra noise variance
    ``t`` and apply its Wiener filter.  It is not the exact prox.
    """

    has_exact_prox = False
    is_convex_neglog = False

    def __init__(self, weights, means, covariances):
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        covs = np.asarray(covariances, dtype=np.float64)
        K, n = means.shape
        super().__init__(n)
        if weights.shape != (K,) or covs.shape != (K, n, n):
            raise ValueError(
                f"inconsistent GMM shapes: weights {weights.shape}, means {means.shape}, "
                f"covariances {covs.shape}"
            )
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("GMM weights must be nonnegative and sum to 1")
        if not np.allclose(covs, covs.transpose(0, 2, 1), rtol=0, atol=1e-12):
            raise ValueError("GMM covariances must be symmetric")
        self._chol = []
        for k in range(K):
            try:
                self._chol.append(linalg.cholesky(covs[k], lower=True))
            except linalg.LinAlgError as exc:
                raise ValueError(f"covariance {k} is not positive definite") from exc
        self.weights = weights
        self.means = means
        self.covariances = covs
        with np.errstate(divide="ignore"):
            self._log_weights = np.log(weights)

    @property
    def n_components(self) -> int:
        return self.weights.size

    @staticmethod
    def _log_normal(u, mean, chol):
        n = mean.size
        diff = (u - mean).reshape(-1, n)
        sol = linalg.solve_triangular(chol, diff.T, lower=True)
        maha = np.sum(sol * sol, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        out = -0.5 * (maha + logdet + n * np.log(2.0 * np.pi))
        return out.reshape(u.shape[:-1])

    def component_loglik(self, u, extra_var: float = 0.0):
        """``log pi_k + log N(u; mu_k, Sigma_k + extra_var I)`` stacked on the last axis."""
        u = np.asarray(u, dtype=np.float64)
        out = []
        for k in range(self.n_components):
            chol = self._chol[k]
            if extra_var:
                chol = linalg.cholesky(self.covariances[k] + extra_var * np.eye(self.patch_dim), lower=True)
            out.append(self._log_weights[k] + self._log_normal(u, self.means[k], chol))
        return np.stack(out, axis=-1)

    def negloglik(self, u):
        u = self._check(u)
        return -logsumexp(self.component_loglik(u), axis=-1)

    def prox(self, v, t):
        v = self._check(v)
        self._check_t(t)
        best = np.argmax(self.component_loglik(v, extra_var=t), axis=-1)
        flat_v = v.reshape(-1, self.patch_dim)
        flat_best = np.reshape(best, -1)
        out = np.empty_like(flat_v)
        eye = np.eye(self.patch_dim)
        for k in np.unique(flat_best):
            rows = flat_best == k
            sigma = self.covariances[k]
            # Sigma (Sigma + tI)^-1 is symmetric; apply it through a solve
            gain = linalg.solve(sigma + t * eye, sigma, assume_a="pos").T
            out[rows] = self.means[k] + (flat_v[rows] - self.means[k]) @ gain.T
        return out.reshape(v.shape)

    def sample(self, seed, size=None):
        shape = self._shape(size)
        count = 1 if size is None else int(size)
        rng = as_rng(seed)
        comp = np.searchsorted(np.cumsum(self.weights), rng.random(count), side="right")
        comp = np.minimum(comp, self.n_components - 1)
        g = gaussian(rng, count * self.patch_dim).reshape(count, self.patch_dim)
        out = np.empty((count, self.patch_dim))
        for k in np.unique(comp):
            rows = comp == k
            out[rows] = self.means[k] + g[rows] @ self._chol[k].T
        return out.reshape(shape)

    def save(self, path):
        save_gmm(path, self)

    @classmethod
    def load(cls, path) -> GmmPrior:
        return load_gmm(path)

    def __repr__(self):
        return f"GmmPrior(K={self.n_components}, patch_dim={self.patch_dim})"


def save_gmm(path, gmm: GmmPrior):
    """Write the plain-text GMM layout read by :func:`load_gmm`."""
    K, n = gmm.n_components, gmm.patch_dim
    lines = [f"# GMM patch prior: K n / weights / means / covariances", f"{K} {n}"]
    lines.append(" ".join(repr(float(w)) for w in gmm.weights))
    for k in range(K):
        lines.append(" ".join(repr(float(v)) for v in gmm.means[k]))
    for k in range(K):
        for row in gmm.covariances[k]:
            lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_gmm(path) -> GmmPrior:
    """Read a GMM parameter file.

    Whitespace-separated numbers, ``#`` starts a comment::

        K n
        w_1 ... w_K                      (K weights)
        mu_1 (n values) ... mu_K         (K*n means, component-major)
        Sigma_1 (n*n, row-major) ...     (K*n*n covariances)
    """
    tokens = []
    for line in Path(path).read_text().splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if len(tokens) < 2:
        raise ValueError(f"{path}: missing GMM header")
    K, n = int(tokens[0]), int(tokens[1])
    values = np.array(tokens[2:], dtype=np.float64)
    expected = K + K * n + K * n * n
    if values.size != expected:
        raise ValueError(f"{path}: expected {expected} numbers for K={K}, n={n}, got {values.size}")
    weights = values[:K]
    means = values[K : K + K * n].reshape(K, n)
    covs = values[K + K * n :].reshape(K, n, n)
    return GmmPrior(weights, means, covs)


def make_prior(spec: str, lam: float | None, patch_height: int, patch_width: int, gmm_path=None) -> PatchPrior:
    """Build a prior from a selection string.

    ``l1``, ``l2``, ``dct-l1``, ``dct-l2`` take ``lam``; ``gmm:<path>`` (or
    ``gmm`` with ``gmm_path``) loads a parameter file.  DCT priors leave the
    DC coefficient unpenalised.
    """
    n = patch_height * patch_width
    if spec.startswith("gmm"):
        path = spec.partition(":")[2] or gmm_path
        if not path:
            raise ValueError("gmm prior needs a parameter file (gmm:<path>)")
        prior = load_gmm(path)
        if prior.patch_dim != n:
            raise ValueError(f"GMM patch_dim {prior.patch_dim} does not match patch size {n}")
        return prior
    if lam is None:
        raise ValueError(f"prior {spec!r} needs a weight (lambda)")
    if spec == "l1":
        return L1Prior(lam, n)
    if spec == "l2":
        return L2SqPrior(lam, n)
    if spec in ("dct-l1", "dct-l2"):
        return AnalysisTransformPrior.dct(patch_height, patch_width, lam, inner=spec[4:])
    raise ValueError(f"unknown prior {spec!r}; expected l1, l2, dct-l1, dct-l2 or gmm:<path>")
