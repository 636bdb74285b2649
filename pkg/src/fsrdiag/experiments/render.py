"""Heatmap rendering of density fields (time on the horizontal axis)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..fields import DensityField  # noqa: E402

GAMMA = 0.55
CEILING_PERCENTILE = 99.0
CLIP_PERCENTILE = 99.9


def row_ceilings(reference: np.ndarray) -> np.ndarray:
    """Per-row colour ceiling: the 99th percentile of the reference row.

    Rows whose 99th percentile is zero (mass on a handful of cells) fall back
    to the 99.9th percentile, then to the row maximum.
    """
    ref = np.asarray(reference, dtype=float)
    c = np.percentile(ref, CEILING_PERCENTILE, axis=1)
    hi = np.percentile(ref, CLIP_PERCENTILE, axis=1)
    c = np.where(c > 0, c, hi)
    c = np.where(c > 0, c, ref.max(axis=1))
    return c


def normalized_image(field: DensityField, reference: DensityField | None = None, gamma: float = GAMMA):
    """Colour intensities in [0, 1], shaped (N_x, N_t) for display."""
    vals = np.asarray(field.values, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("cannot render a field with non-finite values")
    ref = field if reference is None else reference
    if ref.values.shape != vals.shape:
        raise ValueError("reference field has a different shape")
    c = row_ceilings(ref.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(c[:, None] > 0, vals / c[:, None], 0.0)
    return np.clip(scaled, 0.0, 1.0).T ** gamma


def render_heatmap(
    field: DensityField,
    reference: DensityField | None = None,
    path=None,
    gamma: float = GAMMA,
    title: str | None = None,
    cmap: str = "magma",
) -> Path:
    """Write a PNG heatmap of ``field``; bytes are deterministic for fixed input."""
    img = normalized_image(field, reference, gamma)
    path = Path(path)
    fig, ax = plt.subplots(figsize=(4.0, 3.0), dpi=100)
    try:
        ax.imshow(
            img,
            origin="lower",
            aspect="auto",
            cmap=cmap,
            vmin=0.0,
            vmax=1.0,
            interpolation="nearest",
            extent=(field.t_grid[0], field.t_grid[-1], field.x_grid[0], field.x_grid[-1]),
        )
        ax.set_xlabel("Time t")
        ax.set_ylabel("Position x")
        if title:
            ax.set_title(title, fontsize=9)
        fig.tight_layout()
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="png", metadata={"Software": None})
        except OSError as exc:
            raise OSError(f"could not write heatmap to {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def render_marker(path, text: str = "Intractable") -> Path:
    """Placeholder image for a cell with no field."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(4.0, 3.0), dpi=100)
    try:
        ax.text(0.5, 0.5, text, ha="center", va="center")
        ax.set_axis_off()
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="png", metadata={"Software": None})
    finally:
        plt.close(fig)
    return path
