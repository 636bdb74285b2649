"""Exact conditional diffusion objects for the tractable problem classes.

Tractable means either a discrete prior with any operator, or a Gaussian /
Gaussian-mixture prior with an affine operator.  In each case the likelihood
p(y | x_t), the posterior p(x_t | y) and their scores have closed forms; the
posterior at every time is again a Gaussian mixture.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._arrays import as_points, scalar_out, vector_out
from .exceptions import IntractableError
from .fields import DensityField, normalize_rows
from .forward_ops import MeasurementModel
from .mixture import GaussianMixture, gaussian_log_pdf
from .priors import DiscretePrior, GaussianPrior, GMMPrior, Prior, _gaussian_denoiser, _require_positive_time
from .schedule import NoiseSchedule


@dataclass(frozen=True, eq=False)
class ConditionalProblem:
    prior: Prior
    measurement: MeasurementModel
    y: float | np.ndarray
    schedule: NoiseSchedule = NoiseSchedule()

    @property
    def dim(self) -> int:
        return self.prior.dim

    @property
    def y_vec(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.y, dtype=float)).reshape(-1)

    @property
    def tractable(self) -> bool:
        if isinstance(self.prior, DiscretePrior):
            return True
        return self.measurement.is_affine and isinstance(self.prior, (GaussianPrior, GMMPrior))

    def _require_tractable(self):
        if not self.tractable:
            raise IntractableError(
                f"no closed-form posterior for {type(self.prior).__name__} with "
                f"{type(self.measurement.operator).__name__} operator"
            )

    def _gaussian_components(self):
        """Prior components as (weights, means (K, n), covs (K, n, n))."""
        p = self.prior
        if isinstance(p, GaussianPrior):
            return np.ones(1), p.mean_vec[None], p.cov_mat[None]
        return p.weights, p.means, p.covs

    # -- posterior ------------------------------------------------------------
    def posterior(self, t: float) -> GaussianMixture:
        """The posterior p(x_t | y) as an explicit Gaussian mixture."""
        self._require_tractable()
        s = self.schedule
        m = self.measurement
        y = self.y_vec
        if isinstance(self.prior, DiscretePrior):
            _require_positive_time(t, "the posterior of a discrete prior")
            scale, var = s.forward_kernel(t)
            with np.errstate(divide="ignore"):
                log_w = np.log(self.prior.weights)
            log_w = log_w + m.log_likelihood_points(y, self.prior.atoms)
            return GaussianMixture(None, scale * self.prior.atoms, var=var, log_weights=log_w)

        scale, var = s.forward_kernel(t)
        A = m.operator.matrix
        b = m.operator.offset
        sigma_y = m.noise_var * np.eye(A.shape[0])
        weights, means, covs = self._gaussian_components()
        n = self.dim
        log_w, post_means, post_covs = [], [], []
        for w_i, m_i, c_i in zip(weights, means, covs):
            pred = A @ m_i + b
            S = A @ c_i @ A.T + sigma_y
            gain = np.linalg.solve(S, A @ c_i).T  # C A^T S^{-1}
            log_w.append(np.log(w_i) + gaussian_log_pdf(y[None], pred, S)[0])
            post_means.append(scale * (m_i + gain @ (y - pred)))
            post_covs.append(scale**2 * (c_i - gain @ A @ c_i) + var * np.eye(n))
        return GaussianMixture(None, np.array(post_means), np.array(post_covs), log_weights=np.array(log_w))

    def posterior_log_density(self, t: float, xt):
        pts, shape = as_points(xt, self.dim)
        return scalar_out(self.posterior(t).log_pdf(pts), shape)

    def posterior_density(self, t: float, xt):
        return np.exp(self.posterior_log_density(t, xt))

    def posterior_score(self, t: float, xt):
        pts, shape = as_points(xt, self.dim)
        return vector_out(self.posterior(t).score(pts), shape, self.dim)

    # -- likelihood -----------------------------------------------------------
    def _log_likelihood_points(self, t: float, pts: np.ndarray) -> np.ndarray:
        self._require_tractable()
        _require_positive_time(t, "the likelihood")
        s, m, y = self.schedule, self.measurement, self.y_vec
        marginal = self.prior.marginal(s, t)
        jl = marginal.joint_log(pts)
        log_r = jl - logsumexp(jl, axis=1, keepdims=True)
        if isinstance(self.prior, DiscretePrior):
            log_l = m.log_likelihood_points(y, self.prior.atoms)
            return logsumexp(log_r + log_l[None, :], axis=1)
        scale, var = s.forward_kernel(t)
        A = m.operator.matrix
        b = m.operator.offset
        sigma_y = m.noise_var * np.eye(A.shape[0])
        _, means, covs = self._gaussian_components()
        comp = []
        for m_i, c_i in zip(means, covs):
            c0t, m0t = _gaussian_denoiser(m_i, c_i, scale, var, pts)
            S = sigma_y + A @ c0t @ A.T
            resid = y[None, :] - (m0t @ A.T + b)
            comp.append(gaussian_log_pdf(resid, np.zeros(A.shape[0]), S))
        return logsumexp(log_r + np.stack(comp, axis=1), axis=1)

    def likelihood_log_density(self, t: float, xt):
        pts, shape = as_points(xt, self.dim)
        return scalar_out(self._log_likelihood_points(t, pts), shape)

    def likelihood(self, t: float, xt):
        return np.exp(self.likelihood_log_density(t, xt))

    def likelihood_score(self, t: float, xt):
        """Gradient of ``log p(y | x_t)`` in ``x_t``."""
        self._require_tractable()
        _require_positive_time(t, "the likelihood score")
        pts, shape = as_points(xt, self.dim)
        s, m, y = self.schedule, self.measurement, self.y_vec
        scale, var = s.forward_kernel(t)
        if isinstance(self.prior, DiscretePrior):
            # only the weights depend on x_t: grad = (sqrt(abar)/(1-abar)) (E_q[x_i] - E_r[x_i])
            marginal = self.prior.marginal(s, t)
            jl = marginal.joint_log(pts)
            r = np.exp(jl - logsumexp(jl, axis=1, keepdims=True))
            jq = jl + m.log_likelihood_points(y, self.prior.atoms)[None, :]
            q = np.exp(jq - logsumexp(jq, axis=1, keepdims=True))
            g = (scale / var) * ((q - r) @ self.prior.atoms)
        elif isinstance(self.prior, GaussianPrior):
            A = m.operator.matrix
            b = m.operator.offset
            c0t, m0t = _gaussian_denoiser(self.prior.mean_vec, self.prior.cov_mat, scale, var, pts)
            S = m.noise_var * np.eye(A.shape[0]) + A @ c0t @ A.T
            resid = y[None, :] - (m0t @ A.T + b)
            g = (scale / var) * np.linalg.solve(S, resid.T).T @ A @ c0t.T
        else:
            g = self.posterior(t).score(pts) - self.prior.marginal(s, t).score(pts)
        return vector_out(g, shape, self.dim)

    # -- grids ----------------------------------------------------------------
    def posterior_field(self, t_grid, x_grid, label: str = "analytic") -> DensityField:
        """Row-normalized posterior density on a (time x space) grid (1D states)."""
        t_grid = np.asarray(t_grid, dtype=float)
        x = np.asarray(x_grid, dtype=float).reshape(-1, 1)
        vals = np.stack([self.posterior(float(t)).pdf(x) for t in t_grid])
        return DensityField(t_grid, x_grid, normalize_rows(vals, x_grid), label)


def analytic_likelihood(cp: ConditionalProblem, t: float, xt):
    return cp.likelihood(t, xt)


def analytic_posterior_density(cp: ConditionalProblem, t: float, xt):
    return cp.posterior_density(t, xt)


def analytic_posterior_score(cp: ConditionalProblem, t: float, xt):
    return cp.posterior_score(t, xt)


def analytic_likelihood_score(cp: ConditionalProblem, t: float, xt):
    return cp.likelihood_score(t, xt)
