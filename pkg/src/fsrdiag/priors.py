"""Priors with closed-form unconditional diffusion objects.

For each prior the VP-SDE marginal p_t is a Gaussian mixture (a single
Gaussian, a GMM, or isotropic kernels centred on scaled atoms), so the
marginal density, score and score Jacobian all come from
:class:`~fsrdiag.mixture.GaussianMixture`.  The denoiser p_{0|t} moments are
computed independently from the prior side (conjugacy / weighted atoms), which
lets Tweedie's formula be checked against them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._arrays import (
    as_matrix,
    as_points,
    matrix_out,
    scalar_out,
    symmetrize_psd,
    vector_out,
)
from .exceptions import DegenerateDensityError, UnsupportedOperationError
from .mixture import GaussianMixture, _row_blocks
from .schedule import NoiseSchedule

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DenoiserMoments:
    """Mean ``m_{0|t}(x_t)`` and covariance ``C_{0|t}(x_t)`` of the denoiser."""

    mean: np.ndarray
    cov: np.ndarray


def _check_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float).reshape(-1)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if abs(w.sum() - 1.0) > _WEIGHT_TOL:
        raise ValueError(f"weights must sum to 1 (got {w.sum()!r})")
    return w


def _check_spd(c: np.ndarray) -> np.ndarray:
    if not np.allclose(c, c.T, rtol=0, atol=1e-12):
        raise ValueError("covariance must be symmetric")
    if np.any(np.linalg.eigvalsh(c) <= 0):
        raise ValueError("covariance must be positive definite")
    return c


def _require_positive_time(t: float, what: str):
    if not t > 0:
        raise DegenerateDensityError(f"{what} requires t > 0 (got t={t})")


def _gaussian_denoiser(mean, cov, scale, var, x):
    """Per-component conjugate denoiser ``N(m_{0|t}(x), C_{0|t})``.

    ``C_{0|t} = (C^{-1} + (abar / (1 - abar)) I)^{-1}`` and
    ``m_{0|t} = C_{0|t} (C^{-1} m + (sqrt(abar) / (1 - abar)) x)``.
    """
    n = mean.shape[-1]
    prec = np.linalg.inv(cov)
    c0t = np.linalg.inv(prec + (scale**2 / var) * np.eye(n))
    m0t = (prec @ mean)[None, :] @ c0t.T + (scale / var) * x @ c0t.T
    return c0t, m0t


class Prior:
    """Common interface; concrete priors implement :meth:`marginal`."""

    dim: int

    # subclass hooks
    def marginal(self, schedule: NoiseSchedule, t: float) -> GaussianMixture:
        raise NotImplementedError

    def _denoiser(self, schedule: NoiseSchedule, t: float, x: np.ndarray):
        raise NotImplementedError

    def _draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def log_density(self, x0):
        raise UnsupportedOperationError(
            f"{type(self).__name__} has no pointwise density (weighted sum of Diracs)"
        )

    def density(self, x0):
        return np.exp(self.log_density(x0))

    # public evaluators
    def marginal_log_density(self, schedule: NoiseSchedule, t: float, xt):
        pts, shape = as_points(xt, self.dim)
        return scalar_out(self.marginal(schedule, t).log_pdf(pts), shape)

    def marginal_density(self, schedule: NoiseSchedule, t: float, xt):
        return np.exp(self.marginal_log_density(schedule, t, xt))

    def marginal_score(self, schedule: NoiseSchedule, t: float, xt):
        pts, shape = as_points(xt, self.dim)
        return vector_out(self.marginal(schedule, t).score(pts), shape, self.dim)

    def marginal_score_jacobian(self, schedule: NoiseSchedule, t: float, xt):
        pts, shape = as_points(xt, self.dim)
        return matrix_out(self.marginal(schedule, t).score_jacobian(pts), shape, self.dim)

    def denoiser_moments(self, schedule: NoiseSchedule, t: float, xt) -> DenoiserMoments:
        _require_positive_time(t, "the denoiser")
        pts, shape = as_points(xt, self.dim)
        mean, cov = self.denoiser_moments_points(schedule, t, pts)
        return DenoiserMoments(vector_out(mean, shape, self.dim), matrix_out(cov, shape, self.dim))

    def denoiser_moments_points(self, schedule: NoiseSchedule, t: float, pts: np.ndarray):
        """Denoiser moments on a ``(B, n)`` array; returns ``(B, n)`` and ``(B, n, n)``."""
        _require_positive_time(t, "the denoiser")
        mean, cov = self._denoiser(schedule, t, np.asarray(pts, dtype=float))
        return mean, symmetrize_psd(cov)

    def sample(self, n: int, seed: int | np.random.Generator | None = 0):
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        draws = self._draw(int(n), rng)
        return draws[:, 0] if self.dim == 1 else draws


class DiscretePrior(Prior):
    """Weighted atoms ``sum_i p_i delta(x - x_i)``."""

    def __init__(self, atoms, weights):
        atoms = np.asarray(atoms, dtype=float)
        self.atoms = atoms.reshape(-1, 1) if atoms.ndim <= 1 else atoms
        self.dim = self.atoms.shape[1]
        self.weights = _check_weights(weights)
        if self.weights.shape[0] != self.atoms.shape[0]:
            raise ValueError("need one weight per atom")

    def __repr__(self):
        return f"{type(self).__name__}(n_atoms={self.atoms.shape[0]}, dim={self.dim})"

    def marginal(self, schedule, t):
        _require_positive_time(t, "the marginal of a discrete prior")
        scale, var = schedule.forward_kernel(t)
        return GaussianMixture(self.weights, scale * self.atoms, var=var)

    def _denoiser(self, schedule, t, x):
        mix = self.marginal(schedule, t)
        n = self.dim
        mean = np.empty_like(x)
        cov = np.empty((x.shape[0], n, n))
        for sl in _row_blocks(x.shape[0], mix.n_components):
            r = mix.responsibilities(x[sl])
            m = r @ self.atoms
            mean[sl] = m
            # centered spread, not E[x^2] - m^2: the latter cancels badly
            # when one atom dominates
            if n == 1:
                d = self.atoms[None, :, 0] - m[:, :1]
                cov[sl, 0, 0] = np.einsum("bk,bk->b", r, d * d)
            else:
                d = self.atoms[None, :, :] - m[:, None, :]
                cov[sl] = np.einsum("bk,bki,bkj->bij", r, d, d)
        return mean, cov

    def _draw(self, n, rng):
        idx = rng.choice(self.atoms.shape[0], size=n, p=self.weights)
        return self.atoms[idx]

    def mean(self):
        return self.weights @ self.atoms

    def cov(self):
        d = self.atoms - self.mean()
        return np.einsum("k,ki,kj->ij", self.weights, d, d)

    def support(self):
        return self.atoms.min(axis=0), self.atoms.max(axis=0), 0.0


class EmpiricalPrior(DiscretePrior):
    """Uniformly weighted dataset: the finite-sample view of any prior."""

    def __init__(self, dataset):
        data = np.asarray(dataset, dtype=float)
        n = data.shape[0]
        super().__init__(data, np.full(n, 1.0 / n))

    @property
    def dataset(self):
        return self.atoms


class GaussianPrior(Prior):
    def __init__(self, mean, cov):
        mean = np.atleast_1d(np.asarray(mean, dtype=float)).reshape(-1)
        self.dim = mean.shape[0]
        self.mean_vec = mean
        self.cov_mat = _check_spd(as_matrix(cov, self.dim))

    def __repr__(self):
        return f"GaussianPrior(mean={self.mean_vec.tolist()}, cov={self.cov_mat.tolist()})"

    def log_density(self, x0):
        pts, shape = as_points(x0, self.dim)
        mix = GaussianMixture([1.0], self.mean_vec[None], self.cov_mat[None])
        return scalar_out(mix.log_pdf(pts), shape)

    def marginal(self, schedule, t):
        scale, var = schedule.forward_kernel(t)
        cov = scale**2 * self.cov_mat + var * np.eye(self.dim)
        return GaussianMixture([1.0], scale * self.mean_vec[None], cov[None])

    def _denoiser(self, schedule, t, x):
        scale, var = schedule.forward_kernel(t)
        c0t, m0t = _gaussian_denoiser(self.mean_vec, self.cov_mat, scale, var, x)
        return m0t, np.broadcast_to(c0t, (x.shape[0],) + c0t.shape).copy()

    def _draw(self, n, rng):
        chol = np.linalg.cholesky(self.cov_mat)
        return self.mean_vec + rng.standard_normal((n, self.dim)) @ chol.T

    def mean(self):
        return self.mean_vec.copy()

    def cov(self):
        return self.cov_mat.copy()

    def support(self):
        sd = float(np.sqrt(np.max(np.diag(self.cov_mat))))
        return self.mean_vec, self.mean_vec, sd


class GMMPrior(Prior):
    def __init__(self, weights, means, covs):
        self.weights = _check_weights(weights)
        k = self.weights.shape[0]
        means = np.asarray(means, dtype=float)
        self.means = means.reshape(k, -1)
        self.dim = self.means.shape[1]
        covs = np.asarray(covs, dtype=float)
        if self.dim == 1:
            covs = covs.reshape(k, 1, 1)
        self.covs = np.stack([_check_spd(as_matrix(c, self.dim)) for c in covs])

    def __repr__(self):
        return f"GMMPrior(n_components={self.weights.shape[0]}, dim={self.dim})"

    def log_density(self, x0):
        pts, shape = as_points(x0, self.dim)
        return scalar_out(GaussianMixture(self.weights, self.means, self.covs).log_pdf(pts), shape)

    def marginal(self, schedule, t):
        scale, var = schedule.forward_kernel(t)
        covs = scale**2 * self.covs + var * np.eye(self.dim)
        return GaussianMixture(self.weights, scale * self.means, covs)

    def _denoiser(self, schedule, t, x):
        scale, var = schedule.forward_kernel(t)
        r = self.marginal(schedule, t).responsibilities(x)
        comp_means, comp_covs = [], []
        for m_i, c_i in zip(self.means, self.covs):
            c0t, m0t = _gaussian_denoiser(m_i, c_i, scale, var, x)
            comp_means.append(m0t)
            comp_covs.append(c0t)
        cm = np.stack(comp_means, axis=1)  # (B, K, n)
        cc = np.stack(comp_covs)  # (K, n, n)
        mean = np.einsum("bk,bkn->bn", r, cm)
        d = cm - mean[:, None, :]
        cov = np.einsum("bk,kij->bij", r, cc) + np.einsum("bk,bki,bkj->bij", r, d, d)
        return mean, cov

    def _draw(self, n, rng):
        return GaussianMixture(self.weights, self.means, self.covs).sample(n, rng)

    def mean(self):
        return self.weights @ self.means

    def cov(self):
        return GaussianMixture(self.weights, self.means, self.covs).cov()

    def support(self):
        sd = float(np.sqrt(np.max(self.covs[:, np.arange(self.dim), np.arange(self.dim)])))
        return self.means.min(axis=0), self.means.max(axis=0), sd


def tweedie_moments_from_score(
    schedule: NoiseSchedule, t: float, xt, score, score_jacobian
) -> DenoiserMoments:
    """Denoiser moments from the marginal score and its Jacobian (Tweedie).

    ``mean = (x + (1 - abar) s) / sqrt(abar)`` and
    ``cov = ((1 - abar) / abar) (I + (1 - abar) J)``.  Shapes follow the same
    convention as the inputs: scalar arrays in 1D, trailing ``(n,)`` / ``(n, n)``
    otherwise.
    """
    scale, var = schedule.forward_kernel(t)
    x = np.asarray(xt, dtype=float)
    s = np.asarray(score, dtype=float)
    jac = np.asarray(score_jacobian, dtype=float)
    mean = (x + var * s) / scale
    if jac.shape == x.shape:  # scalar state
        cov = (var / scale**2) * (1.0 + var * jac)
        cov = np.maximum(cov, 0.0)
    else:
        n = x.shape[-1]
        cov = symmetrize_psd((var / scale**2) * (np.eye(n) + var * jac))
    if np.ndim(mean) == 0:
        mean, cov = float(mean), float(cov)
    return DenoiserMoments(mean, cov)


def prior_density(p: Prior, x0):
    return p.density(x0)


def marginal_density(p: Prior, s: NoiseSchedule, t: float, xt):
    return p.marginal_density(s, t, xt)


def marginal_score(p: Prior, s: NoiseSchedule, t: float, xt):
    return p.marginal_score(s, t, xt)


def denoiser_moments(p: Prior, s: NoiseSchedule, t: float, xt) -> DenoiserMoments:
    return p.denoiser_moments(s, t, xt)


def sample_prior(p: Prior, n: int, seed: int = 0):
    return p.sample(n, seed)
