"""Total variation between gridded densities, ensemble histograms, rate fits."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .exceptions import GridMismatchError
from .fields import DensityField, normalize_rows, trapezoid_weights


def _check_same_grid(a: np.ndarray, b: np.ndarray, what: str):
    if a.shape != b.shape or not np.allclose(a, b, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise GridMismatchError(f"{what} grids differ")


def tv_distance(p, q, x_grid) -> float:
    """``(1/2) int |p - q| dx`` by the trapezoid rule, after renormalizing both rows."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    x = np.asarray(x_grid, dtype=float)
    if p.shape != x.shape or q.shape != x.shape:
        raise GridMismatchError(f"rows of shape {p.shape} and {q.shape} on a grid of {x.shape}")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("densities must be nonnegative")
    w = trapezoid_weights(x)
    mp, mq = w @ p, w @ q
    if mp <= 0 or mq <= 0:
        return 1.0
    return float(np.clip(0.5 * (w @ np.abs(p / mp - q / mq)), 0.0, 1.0))


def tv_rows(a: DensityField, b: DensityField) -> np.ndarray:
    """Per-row TV between two fields on identical grids; flagged rows score 1."""
    _check_same_grid(a.x_grid, b.x_grid, "space")
    _check_same_grid(a.t_grid, b.t_grid, "time")
    w = trapezoid_weights(a.x_grid)
    pa = normalize_rows(a.values, a.x_grid)
    pb = normalize_rows(b.values, b.x_grid)
    tv = np.clip(0.5 * (np.abs(pa - pb) @ w), 0.0, 1.0)
    empty = (a.values @ w <= 0) | (b.values @ w <= 0)
    tv[empty | a.flagged | b.flagged] = 1.0
    return tv


@dataclass
class TvCurve:
    x: np.ndarray
    tv: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.tv = np.asarray(self.tv, dtype=float)
        if self.x.shape != self.tv.shape:
            raise ValueError("x and tv must have equal length")
        if np.any((self.tv < 0) | (self.tv > 1)):
            raise ValueError("TV values must lie in [0, 1]")

    def rows(self):
        return np.column_stack([self.x, self.tv])

    def window_mean(self, lo: float, hi: float) -> float:
        sel = (self.x >= lo - 1e-12) & (self.x <= hi + 1e-12)
        return float(self.tv[sel].mean())


def tv_curve(field: DensityField, reference: DensityField, label: str | None = None) -> TvCurve:
    return TvCurve(field.t_grid, tv_rows(field, reference), field.label if label is None else label)


def _bin_edges(x: np.ndarray) -> np.ndarray:
    mid = 0.5 * (x[1:] + x[:-1])
    return np.concatenate([[x[0] - 0.5 * (x[1] - x[0])], mid, [x[-1] + 0.5 * (x[-1] - x[-2])]])


def histogram_rows(samples: np.ndarray, x_grid) -> tuple[np.ndarray, np.ndarray]:
    """Bin each row of ``samples`` (T, K) on cells centred at ``x_grid``.

    Returns unnormalized densities (counts / (K * width)) and a per-row flag
    for rows with no finite sample inside the grid.
    """
    x = np.asarray(x_grid, dtype=float)
    edges = _bin_edges(x)
    width = np.diff(edges)
    s = np.atleast_2d(np.asarray(samples, dtype=float))
    T, K = s.shape
    idx = np.searchsorted(edges, s, side="right") - 1
    ok = np.isfinite(s) & (idx >= 0) & (idx < x.size)
    flat = (np.arange(T)[:, None] * x.size + idx)[ok]
    counts = np.bincount(flat, minlength=T * x.size).reshape(T, x.size)
    n_finite = np.maximum(np.isfinite(s).sum(axis=1), 1)
    dens = counts / (n_finite[:, None] * width[None, :])
    return dens, counts.sum(axis=1) == 0


def ensemble_density(ensemble, x_grid, smooth: bool = False, label: str | None = None) -> DensityField:
    """Per-timestep histogram density of a 1D sample ensemble on ``x_grid``.

    With ``smooth=True`` each row is convolved with a Gaussian of one bin
    width before normalization.
    """
    states = np.asarray(ensemble.states, dtype=float)
    if states.ndim != 2:
        raise ValueError("ensemble_density needs scalar states")
    live = states[~np.asarray(ensemble.diverged, dtype=bool)]
    if live.shape[0] < 100:
        raise ValueError(f"need at least 100 finite trajectories, got {live.shape[0]}")
    dens, flagged = histogram_rows(live.T, x_grid)
    if smooth:
        dens = gaussian_filter1d(dens, sigma=1.0, axis=1, mode="constant")
    name = label if label is not None else getattr(ensemble, "method", "")
    return DensityField(ensemble.times, x_grid, normalize_rows(dens, x_grid), name, flagged)


def mc_rate_fit(points) -> tuple[float, float]:
    """Least-squares line through ``(log N, log TV)``; returns (slope, intercept)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 4:
        raise ValueError("mc_rate_fit needs at least 4 (N, tv) pairs")
    good = (pts[:, 0] > 0) & (pts[:, 1] > 0) & np.isfinite(pts).all(axis=1)
    if not good.all():
        warnings.warn(f"excluding {int((~good).sum())} nonpositive point(s) from the rate fit", RuntimeWarning)
    if good.sum() < 2:
        raise ValueError("fewer than two positive points left to fit")
    slope, intercept = np.polyfit(np.log(pts[good, 0]), np.log(pts[good, 1]), 1)
    return float(slope), float(intercept)
