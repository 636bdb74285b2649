"""Gaussian mixtures evaluated in the log domain.

Every closed-form object in this package (diffusion marginals, posteriors,
finite-sample fields) is a finite Gaussian mixture, so this one class carries
density, responsibility, score and score-Jacobian evaluation for all of
them.  Inputs are ``(B, n)`` point arrays; see :mod:`fsrdiag._arrays`.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

_LOG_2PI = np.log(2.0 * np.pi)
# Upper bound on B * K elements materialized at once.
_BLOCK_ELEMENTS = 1 << 21


def _row_blocks(n_rows: int, n_comp: int):
    step = max(1, _BLOCK_ELEMENTS // max(n_comp, 1))
    for start in range(0, n_rows, step):
        yield slice(start, min(start + step, n_rows))


class GaussianMixture:
    """Mixture ``sum_k w_k N(x; m_k, C_k)``.

    Pass either full covariances ``covs`` of shape ``(K, n, n)`` or a single
    isotropic variance ``var`` shared by every component (the discrete and
    finite-sample case), which takes a much cheaper evaluation path.
    """

    def __init__(self, weights, means, covs=None, *, var=None, log_weights=None):
        self.means = np.atleast_2d(np.asarray(means, dtype=float))
        k, n = self.means.shape
        if log_weights is not None:
            lw = np.asarray(log_weights, dtype=float).reshape(k)
            self.log_weights = lw - logsumexp(lw)
            self.weights = np.exp(self.log_weights)
        else:
            w = np.asarray(weights, dtype=float).reshape(k)
            if np.any(w < 0):
                raise ValueError("mixture weights must be nonnegative")
            w = w / w.sum()
            self.weights = w
            with np.errstate(divide="ignore"):
                self.log_weights = np.log(w)
        self.dim = n
        self.n_components = k
        if (covs is None) == (var is None):
            raise ValueError("give exactly one of covs or var")
        if var is not None:
            var = float(var)
            if not var > 0:
                raise ValueError(f"component variance must be positive, got {var}")
            self.var = var
            self.covs = None
            self._log_norm = np.full(k, -0.5 * n * (_LOG_2PI + np.log(var)))
        else:
            covs = np.asarray(covs, dtype=float).reshape(k, n, n)
            covs = 0.5 * (covs + np.swapaxes(covs, -1, -2))
            self.var = None
            self.covs = covs
            chol = np.linalg.cholesky(covs)
            eye = np.broadcast_to(np.eye(n), covs.shape)
            self._chol = chol
            self._chol_inv = np.linalg.solve(chol, eye)
            self.precisions = np.swapaxes(self._chol_inv, -1, -2) @ self._chol_inv
            logdet = 2.0 * np.log(np.diagonal(chol, axis1=-2, axis2=-1)).sum(-1)
            self._log_norm = -0.5 * (n * _LOG_2PI + logdet)

    @property
    def isotropic(self) -> bool:
        return self.var is not None

    # -- log-domain kernels -------------------------------------------------
    def component_log_pdf(self, x: np.ndarray) -> np.ndarray:
        """``log N(x_b; m_k, C_k)`` for every point and component, shape (B, K)."""
        x = np.asarray(x, dtype=float)
        diff = x[:, None, :] - self.means[None, :, :]
        if self.isotropic:
            if self.dim == 1:
                maha = diff[..., 0] ** 2 / self.var
            else:
                maha = np.einsum("bkn,bkn->bk", diff, diff) / self.var
        else:
            z = np.einsum("kij,bkj->bki", self._chol_inv, diff)
            maha = np.einsum("bki,bki->bk", z, z)
        return self._log_norm[None, :] - 0.5 * maha

    def joint_log(self, x: np.ndarray) -> np.ndarray:
        return self.log_weights[None, :] + self.component_log_pdf(x)

    def log_pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape[0])
        for sl in _row_blocks(x.shape[0], self.n_components):
            out[sl] = logsumexp(self.joint_log(x[sl]), axis=1)
        return out

    def pdf(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.log_pdf(x))

    def responsibilities(self, x: np.ndarray) -> np.ndarray:
        """Posterior component probabilities via max-subtracted softmax, (B, K)."""
        jl = self.joint_log(x)
        jl -= jl.max(axis=1, keepdims=True)
        r = np.exp(jl)
        r /= r.sum(axis=1, keepdims=True)
        return r

    # -- scores ---------------------------------------------------------------
    def _precision_diff(self, x):
        """``u_bk = C_k^{-1} (x_b - m_k)``, shape (B, K, n)."""
        diff = x[:, None, :] - self.means[None, :, :]
        if self.isotropic:
            return diff / self.var
        return np.einsum("kij,bkj->bki", self.precisions, diff)

    def score(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for sl in _row_blocks(x.shape[0], self.n_components):
            xb = x[sl]
            r = self.responsibilities(xb)
            if self.isotropic:
                out[sl] = -(xb - r @ self.means) / self.var
            else:
                out[sl] = -np.einsum("bk,bkn->bn", r, self._precision_diff(xb))
        return out

    def score_jacobian(self, x: np.ndarray) -> np.ndarray:
        """Hessian of ``log p``: ``sum_k r_k (u_k u_k^T - P_k) - s s^T``, (B, n, n).

        Written in centered form ``Cov_r(u) - E_r[P]`` for numerical stability.
        """
        x = np.asarray(x, dtype=float)
        n = self.dim
        out = np.empty((x.shape[0], n, n))
        for sl in _row_blocks(x.shape[0], self.n_components):
            xb = x[sl]
            r = self.responsibilities(xb)
            if self.isotropic:
                mbar = r @ self.means
                dm = self.means[None, :, :] - mbar[:, None, :]
                spread = np.einsum("bk,bki,bkj->bij", r, dm, dm)
                out[sl] = spread / self.var**2 - np.eye(n) / self.var
            else:
                u = self._precision_diff(xb)
                ubar = np.einsum("bk,bkn->bn", r, u)
                du = u - ubar[:, None, :]
                spread = np.einsum("bk,bki,bkj->bij", r, du, du)
                out[sl] = spread - np.einsum("bk,kij->bij", r, self.precisions)
        return out

    # -- sampling -------------------------------------------------------------
    def sample(self, n_samples: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(self.n_components, size=n_samples, p=self.weights)
        z = rng.standard_normal((n_samples, self.dim))
        if self.isotropic:
            return self.means[idx] + np.sqrt(self.var) * z
        return self.means[idx] + np.einsum("bij,bj->bi", self._chol[idx], z)

    # -- moments --------------------------------------------------------------
    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def cov(self) -> np.ndarray:
        mu = self.mean()
        dm = self.means - mu
        between = np.einsum("k,ki,kj->ij", self.weights, dm, dm)
        if self.isotropic:
            return between + self.var * np.eye(self.dim)
        return between + np.einsum("k,kij->ij", self.weights, self.covs)


def gaussian_log_pdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Log density of a single Gaussian at points ``x`` of shape (B, n)."""
    return GaussianMixture([1.0], np.atleast_2d(mean), np.asarray(cov)[None]).log_pdf(x)
