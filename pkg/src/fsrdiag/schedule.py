"""Linear-beta variance-preserving noise schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
        raise DomainError(f"time must lie in [0, 1], got {t}")
    return t


def _ret(v):
    return float(v) if np.ndim(v) == 0 else v


@dataclass(frozen=True)
class NoiseSchedule:
    """beta(t) = beta0 + t (beta1 - beta0) on t in [0, 1].

    The forward kernel is p(x_t | x_0) = N(sqrt(abar) x_0, (1 - abar) I) with
    abar(t) = exp(-int_0^t beta).
    """

    beta0: float = 0.1
    beta1: float = 20.0

    def __post_init__(self):
        if not self.beta0 > 0:
            raise DomainError(f"beta0 must be positive, got {self.beta0}")
        if not self.beta1 >= self.beta0:
            raise DomainError(f"beta1 must be >= beta0, got {self.beta1} < {self.beta0}")

    def beta(self, t):
        t = _check_time(t)
        return _ret(self.beta0 + t * (self.beta1 - self.beta0))

    def integrated_beta(self, t):
        """Closed-form int_0^t beta(tau) dtau."""
        t = _check_time(t)
        return _ret(self.beta0 * t + 0.5 * (self.beta1 - self.beta0) * t**2)

    def alpha_bar(self, t):
        return _ret(np.exp(-np.asarray(self.integrated_beta(t))))

    def forward_kernel(self, t):
        """Return ``(scale, variance)`` of the forward transition at time t.

        ``variance`` is computed with ``expm1`` so it stays accurate for tiny t.
        """
        ib = np.asarray(self.integrated_beta(t))
        scale = np.exp(-0.5 * ib)
        variance = -np.expm1(-ib)
        return _ret(scale), _ret(variance)


DEFAULT_SCHEDULE = NoiseSchedule()


def beta(s: NoiseSchedule, t):
    return s.beta(t)


def alpha_bar(s: NoiseSchedule, t):
    return s.alpha_bar(t)


def forward_kernel(s: NoiseSchedule, t):
    return s.forward_kernel(t)
