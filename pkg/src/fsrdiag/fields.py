"""(time x space) density grids, the common currency for comparing posteriors."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def trapezoid_weights(x_grid: np.ndarray) -> np.ndarray:
    """Quadrature weights so that ``w @ f`` is the trapezoid rule on ``x_grid``."""
    x = np.asarray(x_grid, dtype=float)
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


def normalize_rows(values: np.ndarray, x_grid: np.ndarray) -> np.ndarray:
    """Scale each row to unit trapezoid mass; all-zero rows are left as zero."""
    mass = values @ trapezoid_weights(x_grid)
    out = np.zeros_like(values, dtype=float)
    ok = mass > 0
    out[ok] = values[ok] / mass[ok, None]
    return out


@dataclass
class DensityField:
    """Nonnegative ``(N_t, N_x)`` matrix of densities on a uniform grid.

    ``flagged`` marks rows with no usable mass (e.g. every sample off-grid);
    comparisons treat those rows as maximally wrong.
    """

    t_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray
    label: str = ""
    flagged: np.ndarray = field(default=None)

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        self.x_grid = np.asarray(self.x_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.t_grid.size, self.x_grid.size):
            raise ValueError(
                f"values shape {self.values.shape} does not match grids "
                f"({self.t_grid.size}, {self.x_grid.size})"
            )
        if self.flagged is None:
            self.flagged = np.zeros(self.t_grid.size, dtype=bool)
        else:
            self.flagged = np.asarray(self.flagged, dtype=bool)

    def row_mass(self) -> np.ndarray:
        return self.values @ trapezoid_weights(self.x_grid)

    def normalized(self) -> "DensityField":
        return DensityField(
            self.t_grid, self.x_grid, normalize_rows(self.values, self.x_grid), self.label, self.flagged
        )

    def row_index(self, t: float) -> int:
        return int(np.argmin(np.abs(self.t_grid - t)))

    def save(self, path) -> Path:
        path = Path(path)
        np.savez(
            path,
            t_grid=self.t_grid,
            x_grid=self.x_grid,
            values=self.values,
            flagged=self.flagged,
            label=np.array(self.label),
        )
        return path

    @classmethod
    def load(cls, path) -> "DensityField":
        with np.load(path) as d:
            return cls(d["t_grid"], d["x_grid"], d["values"], str(d["label"]), d["flagged"])
