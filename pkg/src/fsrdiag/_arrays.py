"""Shape conventions shared by every public evaluator.

Points in an n-dimensional state space are arrays whose trailing axis has
length n.  When n == 1 the trailing axis may be omitted: scalar inputs and
outputs are then plain arrays of the batch shape.  Internally everything is
flattened to ``(B, n)``.
"""

from __future__ import annotations

import numpy as np


def as_points(x, dim: int):
    """Return ``(pts, batch_shape)`` with ``pts`` of shape ``(B, dim)``."""
    x = np.asarray(x, dtype=float)
    if dim == 1:
        return x.reshape(-1, 1), x.shape
    if x.shape[-1:] != (dim,):
        raise ValueError(f"expected trailing axis of length {dim}, got shape {x.shape}")
    return x.reshape(-1, dim), x.shape[:-1]


def scalar_out(v, shape):
    v = np.asarray(v).reshape(shape)
    return float(v) if v.ndim == 0 else v


def vector_out(v, shape, dim: int):
    v = np.asarray(v)
    if dim == 1:
        return scalar_out(v[..., 0], shape)
    return v.reshape(tuple(shape) + (dim,))


def matrix_out(v, shape, dim: int):
    v = np.asarray(v)
    if dim == 1:
        return scalar_out(v[..., 0, 0], shape)
    return v.reshape(tuple(shape) + (dim, dim))


def as_vector(v, dim: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float)).reshape(-1)
    if v.shape != (dim,):
        raise ValueError(f"expected a length-{dim} vector, got shape {v.shape}")
    return v


def as_matrix(c, dim: int) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if dim == 1 and c.size == 1:
        return c.reshape(1, 1)
    if c.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix, got shape {c.shape}")
    return c


def symmetrize_psd(c: np.ndarray) -> np.ndarray:
    """Symmetrize a stack of matrices and clamp negative eigenvalues to zero."""
    c = 0.5 * (c + np.swapaxes(c, -1, -2))
    if c.shape[-1] == 1:
        return np.maximum(c, 0.0)
    w, v = np.linalg.eigh(c)
    if np.all(w >= 0):
        return c
    w = np.maximum(w, 0.0)
    return (v * w[..., None, :]) @ np.swapaxes(v, -1, -2)
