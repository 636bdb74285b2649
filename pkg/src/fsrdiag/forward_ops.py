"""Measurement operators A and the isotropic Gaussian noise model y = A(x) + eta."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._arrays import as_points, scalar_out, vector_out
from .exceptions import DomainError
from .mixture import _LOG_2PI


class Operator:
    """Pointwise-evaluable, differentiable map R^n -> R^m on ``(B, n)`` arrays."""

    is_affine = False

    def out_dim(self, n: int) -> int:
        return n

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """Jacobian stack of shape (B, m, n)."""
        raise NotImplementedError


class _Elementwise(Operator):
    def _f(self, x):
        raise NotImplementedError

    def _df(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self._f(np.asarray(x, dtype=float))

    def jacobian(self, x):
        d = self._df(np.asarray(x, dtype=float))
        return d[:, :, None] * np.eye(d.shape[1])[None]


@dataclass(frozen=True)
class Affine(Operator):
    """x -> A x + b. ``A`` may be a scalar in 1D."""

    A: np.ndarray | float = 1.0
    b: np.ndarray | float = 0.0
    is_affine = True

    @property
    def matrix(self) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.A, dtype=float))

    @property
    def offset(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.b, dtype=float)).reshape(-1)

    def out_dim(self, n):
        return self.matrix.shape[0]

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.matrix.T + self.offset

    def jacobian(self, x):
        x = np.asarray(x)
        return np.broadcast_to(self.matrix, (x.shape[0],) + self.matrix.shape).copy()


@dataclass(frozen=True)
class Quadratic(_Elementwise):
    def _f(self, x):
        return x**2

    def _df(self, x):
        return 2.0 * x


@dataclass(frozen=True)
class Cubic(_Elementwise):
    def _f(self, x):
        return x**3

    def _df(self, x):
        return 3.0 * x**2


@dataclass(frozen=True)
class Sine(_Elementwise):
    """x -> amplitude * sin(frequency * x)."""

    amplitude: float = 1.0
    frequency: float = 1.0

    def _f(self, x):
        return self.amplitude * np.sin(self.frequency * x)

    def _df(self, x):
        return self.amplitude * self.frequency * np.cos(self.frequency * x)


@dataclass(frozen=True)
class Tabulated(_Elementwise):
    """Scalar operator given by samples on a grid, linearly interpolated.

    The Jacobian is the interpolated central-difference slope of the table.
    """

    grid: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))
    values: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or g.size < 2 or np.any(np.diff(g) <= 0):
            raise ValueError("tabulated operator needs matching increasing 1D grid and values")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_slope", np.gradient(v, g))

    def _f(self, x):
        return np.interp(x, self.grid, self.values)

    def _df(self, x):
        return np.interp(x, self.grid, self._slope)


@dataclass(frozen=True)
class MeasurementModel:
    """Operator plus isotropic Gaussian noise with standard deviation ``noise_std``."""

    operator: Operator
    noise_std: float

    def __post_init__(self):
        if not (np.isfinite(self.noise_std) and self.noise_std > 0):
            raise DomainError(f"noise_std must be positive, got {self.noise_std}")

    @property
    def is_affine(self) -> bool:
        return self.operator.is_affine

    @property
    def noise_var(self) -> float:
        return float(self.noise_std) ** 2

    # -- point-array API used internally -------------------------------------
    def apply_points(self, pts: np.ndarray) -> np.ndarray:
        return self.operator(pts)

    def jacobian_points(self, pts: np.ndarray) -> np.ndarray:
        return self.operator.jacobian(pts)

    def log_likelihood_points(self, y: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """``log N(y; A(x_b), sigma^2 I)`` for every row of ``pts``."""
        r = np.atleast_1d(np.asarray(y, dtype=float)) - self.operator(pts)
        m = r.shape[1]
        return -0.5 * (m * (_LOG_2PI + np.log(self.noise_var)) + (r * r).sum(axis=1) / self.noise_var)

    # -- public API ---------------------------------------------------------
    def apply(self, x, dim: int = 1):
        pts, shape = as_points(x, dim)
        out = self.operator(pts)
        return vector_out(out, shape, out.shape[1]) if out.shape[1] > 1 else scalar_out(out[:, 0], shape)

    def jacobian(self, x, dim: int = 1):
        pts, shape = as_points(x, dim)
        jac = self.operator.jacobian(pts)
        if jac.shape[1:] == (1, 1):
            return scalar_out(jac[:, 0, 0], shape)
        return jac.reshape(tuple(shape) + jac.shape[1:])

    def log_likelihood(self, y, x0, dim: int = 1):
        pts, shape = as_points(x0, dim)
        return scalar_out(self.log_likelihood_points(y, pts), shape)

    def likelihood(self, y, x0, dim: int = 1):
        return np.exp(self.log_likelihood(y, x0, dim))

    def simulate(self, x0, seed: int | np.random.Generator | None = 0, dim: int = 1):
        """Draw ``y = A(x0) + sigma * z``."""
        pts, shape = as_points(x0, dim)
        rng = np.random.default_rng(seed)
        mean = self.operator(pts)
        y = mean + self.noise_std * rng.standard_normal(mean.shape)
        return scalar_out(y[:, 0], shape) if y.shape[1] == 1 else y.reshape(tuple(shape) + y.shape[1:])


OPERATORS = {
    "identity": lambda: Affine(1.0, 0.0),
    "gain_shift": lambda: Affine(0.7, -0.4),
    "gain": lambda: Affine(0.6, 0.0),
    "quadratic": lambda: Quadratic(),
    "cubic": lambda: Cubic(),
    "sine": lambda: Sine(),
}
# panel names used for the same operator families
OPERATOR_ALIASES = {
    "linear": "identity",
    "identity_lownoise": "identity",
    "gain_highnoise": "gain",
}


def make_operator(name: str, **params) -> Operator:
    key = OPERATOR_ALIASES.get(name, name)
    if key not in OPERATORS:
        raise KeyError(f"unknown operator {name!r}; choose from {sorted(OPERATORS)}")
    if not params:
        return OPERATORS[key]()
    if key in ("identity", "gain_shift", "gain"):
        base = OPERATORS[key]()
        return Affine(params.get("A", base.A), params.get("b", base.b))
    if key == "sine":
        return Sine(**params)
    raise ValueError(f"operator {name!r} takes no parameters")


def apply(m: MeasurementModel, x, dim: int = 1):
    return m.apply(x, dim)


def jacobian(m: MeasurementModel, x, dim: int = 1):
    return m.jacobian(x, dim)


def measurement_likelihood(m: MeasurementModel, y, x0, dim: int = 1):
    return m.likelihood(y, x0, dim)


def simulate_measurement(m: MeasurementModel, x0, seed=0, dim: int = 1):
    return m.simulate(x0, seed, dim)
