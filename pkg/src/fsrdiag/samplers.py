"""Moment-matching posterior samplers driven by a reverse-time VP-SDE.

Each method replaces the intractable likelihood score with one built from the
prior's denoiser moments ``m = m_{0|t}(x_t)`` and ``C = C_{0|t}(x_t)``:

==========  ===============================================================
sigma_dps   Dirac denoiser, Gaussian noise: ``k C J_A(m)^T (y - A(m)) / sigma^2``
zeta_dps    Dirac denoiser, residual-normalized step: ``2 zeta k C J_A(m)^T r / |r|``
pgdm        Gaussian denoiser with covariance ``r_t^2 I`` (affine A only)
tmpd        Gaussian denoiser with covariance ``C`` (affine A only)
==========  ===============================================================

with ``k = sqrt(abar) / (1 - abar)``.  The prior part of the posterior score
is always the exact marginal score of the prior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._arrays import as_points, scalar_out, vector_out
from .exceptions import DomainError, SamplerDivergenceError, UnsupportedOperationError
from .forward_ops import MeasurementModel
from .mixture import _LOG_2PI
from .priors import Prior
from .schedule import NoiseSchedule

METHODS = ("sigma_dps", "zeta_dps", "pgdm", "tmpd")
ABLATIONS = ("unconditional",)
AFFINE_ONLY = ("pgdm", "tmpd")

# fraction of diverged trajectories that aborts a run
MAX_DIVERGED_FRACTION = 0.01


def pgdm_default_r2(schedule: NoiseSchedule, t: float) -> float:
    """``r_t^2 = sigma_t^2 / (1 + sigma_t^2)`` with ``sigma_t^2 = (1 - abar) / abar``.

    Algebraically this is ``1 - abar``; the long form is kept for readability.
    """
    abar = schedule.alpha_bar(t)
    sig2 = (1.0 - abar) / abar
    return sig2 / (1.0 + sig2)


@dataclass(frozen=True)
class SamplerSpec:
    method: str
    zeta: float = 0.1
    r_schedule: Callable[[float], float] | None = None
    n_steps: int = 399
    t_start: float = 1.0
    t_end: float = 1e-3
    K: int = 20_000
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS + ABLATIONS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS + ABLATIONS}")
        if not (1.0 >= self.t_start > self.t_end > 0):
            raise DomainError(f"need 1 >= t_start > t_end > 0, got {self.t_start}, {self.t_end}")
        if self.n_steps < 1 or self.K < 1:
            raise ValueError("n_steps and K must be positive")
        if self.method == "zeta_dps" and not self.zeta > 0:
            raise ValueError("zeta must be positive")

    def time_grid(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_steps + 1)

    def check_operator(self, measurement: MeasurementModel):
        if self.method in AFFINE_ONLY and not measurement.is_affine:
            raise UnsupportedOperationError(
                f"{self.method} needs an affine operator, got {type(measurement.operator).__name__}"
            )


@dataclass
class SampleEnsemble:
    """Trajectories recorded on ``times``.

    ``states`` has shape ``(K, len(times))`` for scalar states and
    ``(K, len(times), n)`` otherwise; diverged rows are NaN from the step they
    blew up onward.
    """

    times: np.ndarray
    states: np.ndarray
    diverged: np.ndarray = field(default=None)
    method: str = ""

    def __post_init__(self):
        if self.diverged is None:
            self.diverged = np.zeros(self.states.shape[0], dtype=bool)

    @property
    def K(self) -> int:
        return self.states.shape[0]

    @property
    def n_diverged(self) -> int:
        return int(self.diverged.sum())

    def at(self, j: int) -> np.ndarray:
        """Finite states at recorded node ``j``."""
        col = self.states[:, j]
        return col[~self.diverged]

    def terminal(self) -> np.ndarray:
        return self.at(-1)


# -- likelihood-score approximations ------------------------------------------
def _r2(spec: SamplerSpec, schedule: NoiseSchedule, t: float) -> float:
    return float(spec.r_schedule(t)) if spec.r_schedule is not None else pgdm_default_r2(schedule, t)


def _moments(prior, schedule, t, pts):
    mean, cov = prior.denoiser_moments_points(schedule, t, pts)
    return mean, cov


def approx_likelihood_score_points(
    spec, prior: Prior, measurement: MeasurementModel, y, t, pts, schedule, moments=None
):
    """Approximate ``grad log p(y | x_t)`` on a ``(B, n)`` array.

    ``moments`` may carry precomputed ``(m_{0|t}, C_{0|t})`` for ``pts``.
    """
    if spec.method == "unconditional":
        return np.zeros_like(pts)
    spec.check_operator(measurement)
    scale, var = schedule.forward_kernel(t)
    k = scale / var
    y = np.atleast_1d(np.asarray(y, dtype=float)).reshape(-1)
    mean, cov = _moments(prior, schedule, t, pts) if moments is None else moments
    resid = y[None, :] - measurement.apply_points(mean)
    s2 = measurement.noise_var
    if spec.method in ("sigma_dps", "zeta_dps"):
        jac = measurement.jacobian_points(mean)  # (B, m, n)
        v = np.einsum("bmn,bm->bn", jac, resid)
        if spec.method == "sigma_dps":
            v = v / s2
        else:
            norm = np.linalg.norm(resid, axis=1, keepdims=True)
            with np.errstate(divide="ignore", invalid="ignore"):
                v = np.where(norm > 0, 2.0 * spec.zeta * v / norm, 0.0)
        return k * np.einsum("bij,bj->bi", cov, v)

    A = measurement.operator.matrix
    m = A.shape[0]
    if spec.method == "pgdm":
        S = s2 * np.eye(m) + _r2(spec, schedule, t) * (A @ A.T)
        sol = np.linalg.solve(S, resid.T).T
    else:  # tmpd
        S = s2 * np.eye(m)[None] + np.einsum("ij,bjk,lk->bil", A, cov, A)
        sol = np.linalg.solve(S, resid[:, :, None])[:, :, 0]
    return k * np.einsum("bij,bj->bi", cov, sol @ A)


def approx_log_likelihood_points(spec, prior: Prior, measurement: MeasurementModel, y, t, pts, schedule):
    """The log-density whose gradient the method's score is (up to a constant).

    For tmpd this is only exact when ``C_{0|t}`` does not depend on ``x_t``
    (Gaussian priors); the method differentiates with ``C`` held fixed.
    """
    if spec.method == "unconditional":
        return np.zeros(pts.shape[0])
    spec.check_operator(measurement)
    y = np.atleast_1d(np.asarray(y, dtype=float)).reshape(-1)
    mean, cov = _moments(prior, schedule, t, pts)
    if spec.method == "sigma_dps":
        return measurement.log_likelihood_points(y, mean)
    resid = y[None, :] - measurement.apply_points(mean)
    if spec.method == "zeta_dps":
        return -2.0 * spec.zeta * np.linalg.norm(resid, axis=1)
    A = measurement.operator.matrix
    m = A.shape[0]
    s2 = measurement.noise_var
    if spec.method == "pgdm":
        S = np.broadcast_to(s2 * np.eye(m) + _r2(spec, schedule, t) * (A @ A.T), (pts.shape[0], m, m))
    else:
        S = s2 * np.eye(m)[None] + np.einsum("ij,bjk,lk->bil", A, cov, A)
    sol = np.linalg.solve(S, resid[:, :, None])[:, :, 0]
    _, logdet = np.linalg.slogdet(S)
    return -0.5 * (m * _LOG_2PI + logdet + np.einsum("bm,bm->b", resid, sol))


def approx_likelihood_score(spec, prior, measurement, y, t, xt, schedule=NoiseSchedule()):
    pts, shape = as_points(xt, prior.dim)
    return vector_out(approx_likelihood_score_points(spec, prior, measurement, y, t, pts, schedule), shape, prior.dim)


def approx_log_likelihood(spec, prior, measurement, y, t, xt, schedule=NoiseSchedule()):
    pts, shape = as_points(xt, prior.dim)
    return scalar_out(approx_log_likelihood_points(spec, prior, measurement, y, t, pts, schedule), shape)


# -- integrator ----------------------------------------------------------------
def reverse_sde_step(state, t: float, dt: float, posterior_score, schedule: NoiseSchedule, noise):
    """One reverse-time Euler-Maruyama step from ``t`` to ``t - dt``.

    ``x <- x - [-beta x / 2 - beta * score] dt + sqrt(beta dt) * noise``.
    Pass ``noise = 0`` for the deterministic (noise-free) variant.
    """
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    b = schedule.beta(t)
    return state + (0.5 * b * state + b * posterior_score) * dt + np.sqrt(b * dt) * noise


def _record_nodes(record, n_nodes: int) -> np.ndarray:
    if record == "all":
        return np.arange(n_nodes)
    if record == "terminal":
        return np.array([n_nodes - 1])
    idx = np.unique(np.asarray(record, dtype=int) % n_nodes)
    return idx


def run_sampler(
    spec: SamplerSpec,
    prior: Prior,
    measurement: MeasurementModel,
    y,
    schedule: NoiseSchedule = NoiseSchedule(),
    *,
    score_fn: Callable[[float, np.ndarray], np.ndarray] | None = None,
    record="all",
    noise: bool = True,
) -> SampleEnsemble:
    """Integrate K trajectories from ``N(0, I)`` at ``t_start`` down to ``t_end``.

    The step score is ``marginal_score + approx_likelihood_score`` unless
    ``score_fn(t, pts)`` is given, in which case it is used as the whole
    posterior score.  ``record`` is ``"all"``, ``"terminal"`` or a list of
    node indices.
    """
    if score_fn is None:
        spec.check_operator(measurement)
    times = spec.time_grid()
    nodes = _record_nodes(record, times.size)
    n = prior.dim
    rng = np.random.Generator(np.random.Philox(spec.seed))
    x = rng.standard_normal((spec.K, n))
    alive = np.ones(spec.K, dtype=bool)
    first_bad = None
    out = np.full((spec.K, nodes.size, n), np.nan)
    slot = {int(j): i for i, j in enumerate(nodes)}
    if 0 in slot:
        out[:, slot[0]] = x

    def total_score(t, pts):
        if score_fn is not None:
            return score_fn(t, pts)
        if spec.method == "unconditional":
            return prior.marginal(schedule, t).score(pts)
        # one pass for the moments; the prior score follows from Tweedie's
        # mean identity  s = (sqrt(abar) m - x) / (1 - abar)
        mom = prior.denoiser_moments_points(schedule, t, pts)
        scale, var = schedule.forward_kernel(t)
        s = (scale * mom[0] - pts) / var
        return s + approx_likelihood_score_points(spec, prior, measurement, y, t, pts, schedule, mom)

    for j in range(spec.n_steps):
        t, dt = times[j], times[j] - times[j + 1]
        z = rng.standard_normal((spec.K, n)) if noise else 0.0
        xa = x[alive]
        with np.errstate(all="ignore"):
            sc = total_score(float(t), xa)
            za = z[alive] if noise else 0.0
            x[alive] = reverse_sde_step(xa, float(t), float(dt), sc, schedule, za)
        bad = alive & ~np.isfinite(x).all(axis=1)
        if bad.any():
            first_bad = j if first_bad is None else first_bad
            alive &= ~bad
            x[bad] = np.nan
        if j + 1 in slot:
            out[:, slot[j + 1]] = x

    diverged = ~alive
    if diverged.sum() > MAX_DIVERGED_FRACTION * spec.K:
        raise SamplerDivergenceError(int(diverged.sum()), spec.K, first_bad)
    states = out[:, :, 0] if n == 1 else out
    return SampleEnsemble(times[nodes], states, diverged, spec.method)
