"""The finite-sample regime: diffusion objects of an empirical prior.

Treating the prior as the empirical measure of N samples makes the marginal,
denoiser, likelihood and posterior exact Gaussian mixtures (or discrete
measures) at every t > 0, for any measurement operator:

- kernel weights   w_i(x, t) proportional to N(x; sqrt(abar) x_i, (1 - abar) I)
- likelihood       p(y | x_t) = sum_i w_i(x_t, t) N(y; A(x_i), Sigma_y)
- posterior        p(x_t | y) = sum_i pi_i N(x_t; sqrt(abar) x_i, (1 - abar) I)
  with pi_i proportional to N(y; A(x_i), Sigma_y), independent of t.

This module evaluates those expressions directly from the dataset; it does
not go through :mod:`fsrdiag.analytic`, so the two can be compared.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from ._arrays import as_points, matrix_out, scalar_out, symmetrize_psd, vector_out
from .exceptions import DegenerateEvidenceError, DomainError
from .fields import DensityField, normalize_rows
from .forward_ops import MeasurementModel
from .priors import DenoiserMoments
from .schedule import NoiseSchedule

# log of the smallest density treated as nonzero
LOG_DENSITY_FLOOR = np.log(1e-300)
_PRUNE_BELOW = 800.0
_BLOCK = 1 << 21


def load_dataset(path) -> np.ndarray:
    """Read a one-point-per-line numeric text file (whitespace-separated for n > 1)."""
    data = np.loadtxt(Path(path), dtype=float, ndmin=1)
    return data


class FsrModel:
    """Finite-sample posterior for a fixed dataset, measurement model and y."""

    def __init__(self, dataset, schedule: NoiseSchedule, measurement: MeasurementModel, y):
        data = np.asarray(dataset, dtype=float)
        if data.ndim == 0 or data.shape[0] < 1:
            raise ValueError("the dataset needs at least one point")
        self.atoms = data.reshape(-1, 1) if data.ndim == 1 else data.copy()
        self.atoms.setflags(write=False)
        self.n_atoms, self.dim = self.atoms.shape
        self.schedule = schedule
        self.measurement = measurement
        self.y = np.atleast_1d(np.asarray(y, dtype=float)).reshape(-1)
        resid = self.y[None, :] - measurement.apply_points(self.atoms)
        m = resid.shape[1]
        self.log_evidence_weights = -0.5 * (
            m * np.log(2.0 * np.pi * measurement.noise_var) + (resid**2).sum(axis=1) / measurement.noise_var
        )
        self._log_pi = None

    def __repr__(self):
        return f"FsrModel(N={self.n_atoms}, dim={self.dim}, y={self.y.tolist()})"

    # -- measurement (evidence) weights --------------------------------------
    @property
    def log_posterior_weights(self) -> np.ndarray:
        """``log pi_i``, normalized; raises if every measurement weight underflows."""
        if self._log_pi is None:
            top = float(self.log_evidence_weights.max())
            if top < LOG_DENSITY_FLOOR:
                raise DegenerateEvidenceError(top)
            self._log_pi = self.log_evidence_weights - logsumexp(self.log_evidence_weights)
        return self._log_pi

    @property
    def posterior_weights(self) -> np.ndarray:
        return np.exp(self.log_posterior_weights)

    # -- kernel weights -------------------------------------------------------
    def _kernel(self, t: float):
        if not t > 0:
            raise DomainError(f"finite-sample weights degenerate at t={t}; need t > 0")
        return self.schedule.forward_kernel(t)

    def _log_kernel(self, t, pts):
        """Unnormalized ``log N(x_b; sqrt(abar) x_i, (1-abar) I)``, shape (B, N)."""
        scale, var = self._kernel(t)
        if self.dim == 1:
            d2 = (pts[:, :1] - scale * self.atoms[None, :, 0]) ** 2
        else:
            d = pts[:, None, :] - scale * self.atoms[None, :, :]
            d2 = np.einsum("bkn,bkn->bk", d, d)
        return -0.5 * d2 / var - 0.5 * self.dim * np.log(2.0 * np.pi * var)

    def _weights_points(self, t, pts):
        lk = self._log_kernel(t, pts)
        lk -= lk.max(axis=1, keepdims=True)
        w = np.exp(lk)
        return w / w.sum(axis=1, keepdims=True)

    def weights(self, t: float, xt) -> np.ndarray:
        """Denoiser weights ``w_i(x_t, t)``; trailing axis of length N."""
        pts, shape = as_points(xt, self.dim)
        return self._weights_points(t, pts).reshape(tuple(shape) + (self.n_atoms,))

    def weight_gradient(self, t: float, xt) -> np.ndarray:
        """``grad w_i = (sqrt(abar)/(1-abar)) w_i (x_i - m_{0|t}(x_t))``.

        Returns shape ``batch + (N, n)``.
        """
        scale, var = self._kernel(t)
        pts, shape = as_points(xt, self.dim)
        w = self._weights_points(t, pts)
        m = w @ self.atoms
        g = (scale / var) * w[:, :, None] * (self.atoms[None, :, :] - m[:, None, :])
        return g.reshape(tuple(shape) + (self.n_atoms, self.dim))

    # -- unconditional objects -----------------------------------------------
    def marginal_log_density(self, t: float, xt):
        pts, shape = as_points(xt, self.dim)
        out = logsumexp(self._log_kernel(t, pts), axis=1) - np.log(self.n_atoms)
        return scalar_out(out, shape)

    def marginal(self, t: float, xt):
        return np.exp(self.marginal_log_density(t, xt))

    def marginal_score(self, t: float, xt):
        scale, var = self._kernel(t)
        pts, shape = as_points(xt, self.dim)
        w = self._weights_points(t, pts)
        return vector_out(-(pts - scale * (w @ self.atoms)) / var, shape, self.dim)

    def denoiser_moments(self, t: float, xt) -> DenoiserMoments:
        pts, shape = as_points(xt, self.dim)
        w = self._weights_points(t, pts)
        mean = w @ self.atoms
        d = self.atoms[None, :, :] - mean[:, None, :]
        cov = symmetrize_psd(np.einsum("bk,bki,bkj->bij", w, d, d))
        return DenoiserMoments(vector_out(mean, shape, self.dim), matrix_out(cov, shape, self.dim))

    # -- conditional objects --------------------------------------------------
    def likelihood_log_density(self, t: float, xt):
        pts, shape = as_points(xt, self.dim)
        lk = self._log_kernel(t, pts)
        log_w = lk - logsumexp(lk, axis=1, keepdims=True)
        return scalar_out(logsumexp(log_w + self.log_evidence_weights[None, :], axis=1), shape)

    def likelihood(self, t: float, xt):
        return np.exp(self.likelihood_log_density(t, xt))

    def posterior_log_density(self, t: float, xt):
        pts, shape = as_points(xt, self.dim)
        out = logsumexp(self._log_kernel(t, pts) + self.log_posterior_weights[None, :], axis=1)
        return scalar_out(out, shape)

    def posterior_density(self, t: float, xt):
        return np.exp(self.posterior_log_density(t, xt))

    def posterior_score(self, t: float, xt):
        scale, var = self._kernel(t)
        pts, shape = as_points(xt, self.dim)
        jq = self._log_kernel(t, pts) + self.log_posterior_weights[None, :]
        jq -= jq.max(axis=1, keepdims=True)
        q = np.exp(jq)
        q /= q.sum(axis=1, keepdims=True)
        return vector_out(-(pts - scale * (q @ self.atoms)) / var, shape, self.dim)

    def posterior_field(self, t_grid, x_grid, label: str = "fsr") -> DensityField:
        """Posterior on a (time x space) grid, rows normalized (1D states only)."""
        if self.dim != 1:
            raise ValueError("density fields are defined for scalar states")
        t_grid = np.asarray(t_grid, dtype=float)
        x = np.asarray(x_grid, dtype=float)
        log_pi = self.log_posterior_weights
        keep = log_pi > log_pi.max() - _PRUNE_BELOW
        pi = np.exp(log_pi[keep])
        atoms = self.atoms[keep, 0]
        vals = np.empty((t_grid.size, x.size))
        step = max(1, _BLOCK // max(atoms.size, 1))
        for k, t in enumerate(t_grid):
            scale, var = self._kernel(float(t))
            mu = scale * atoms
            norm = 1.0 / np.sqrt(2.0 * np.pi * var)
            for start in range(0, x.size, step):
                xb = x[start : start + step]
                vals[k, start : start + step] = norm * (np.exp(-0.5 * (xb[:, None] - mu[None, :]) ** 2 / var) @ pi)
        return DensityField(t_grid, x, normalize_rows(vals, x), label)

    def posterior_sample(self, t: float, n_samples: int, seed=0):
        """Direct draws from p(x_t | y): pick atom i w.p. pi_i, then add forward noise."""
        scale, var = self._kernel(t)
        rng = np.random.default_rng(seed)
        idx = rng.choice(self.n_atoms, size=int(n_samples), p=self.posterior_weights)
        x = scale * self.atoms[idx] + np.sqrt(var) * rng.standard_normal((int(n_samples), self.dim))
        return x[:, 0] if self.dim == 1 else x


def fsr_weights(f: FsrModel, t, xt):
    return f.weights(t, xt)


def fsr_weight_gradient(f: FsrModel, t, xt):
    return f.weight_gradient(t, xt)


def fsr_marginal(f: FsrModel, t, xt):
    return f.marginal(t, xt)


def fsr_denoiser_moments(f: FsrModel, t, xt):
    return f.denoiser_moments(t, xt)


def fsr_likelihood(f: FsrModel, t, xt):
    return f.likelihood(t, xt)


def fsr_posterior_density(f: FsrModel, t, xt):
    return f.posterior_density(t, xt)


def fsr_posterior_field(f: FsrModel, t_grid, x_grid):
    return f.posterior_field(t_grid, x_grid)


def fsr_posterior_sample(f: FsrModel, t, n_samples, seed=0):
    return f.posterior_sample(t, n_samples, seed)


def fsr_posterior_score(f: FsrModel, t, xt):
    return f.posterior_score(t, xt)
