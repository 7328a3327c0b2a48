"""Export surfaces: delimited text tables, heatmap rasters, and figures.

All text outputs are space-delimited columns with ``#``-prefixed header
lines.  Heatmaps are binary portable graymaps (P5): one row per time
sample, one column per grid node, pixel value an 8-bit sign-preserving
rescaling of the field (0 = most negative, 127/128 = zero, 255 = most
positive).  Figures are rendered with the Agg backend and written without
timestamps so identical inputs produce identical bytes.
"""
from __future__ import annotations

import os
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .config import node_coords
from .ensemble import EnsembleResult, FieldSnapshot, TrajectoryRecord
from .errors import DataError
from .stats import ComparisonReport, DensitySeries

_FLOAT_FMT = "%.17g"

_PNG_METADATA = {"Software": None}  # suppress the matplotlib version stamp


def _atomic_write(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as handle:
        handle.write(data)
    os.replace(tmp, path)


# --- delimited text ----------------------------------------------------------

def _table(header: Sequence[str], columns: Sequence[np.ndarray]) -> bytes:
    lines = ["# " + " ".join(header)]
    rows = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    for row in rows:
        lines.append(" ".join(_FLOAT_FMT % v for v in row))
    return ("\n".join(lines) + "\n").encode("ascii")


def write_snapshot_table(path: str, snapshot: FieldSnapshot) -> None:
    """Columnar (x, phi) for one field snapshot."""
    xs = node_coords(snapshot.state.grid)
    _atomic_write(path, _table(("x", "phi"), (xs, snapshot.state.phi_curr)))


def write_trajectory_table(path: str, records: Iterable[TrajectoryRecord]) -> None:
    """Flat columnar (seed, t, x, beta) across all records."""
    seeds, ts, xs, bs = [], [], [], []
    for rec in records:
        n = rec.times.size
        seeds.append(np.full(n, rec.seed, dtype=float))
        ts.append(rec.times)
        xs.append(rec.positions)
        bs.append(rec.betas)
    if not ts:
        raise DataError("no trajectory records to export")
    _atomic_write(
        path,
        _table(
            ("seed", "t", "x", "beta"),
            (np.concatenate(seeds), np.concatenate(ts), np.concatenate(xs), np.concatenate(bs)),
        ),
    )


def write_density_table(path: str, series: DensitySeries) -> None:
    """Flat columnar (t, x, density) in row-major (time-outer) order."""
    nt, nx = series.densities.shape
    t_col = np.repeat(series.times, nx)
    x_col = np.tile(series.x_centers, nt)
    _atomic_write(path, _table(("t", "x", "density"), (t_col, x_col, series.densities.ravel())))


def write_comparison_table(path: str, report: ComparisonReport) -> None:
    _atomic_write(
        path,
        _table(
            ("t", "l2_distance", "pearson_r", "total_variation"),
            (report.times, report.l2_distance, report.pearson_r, report.total_variation),
        ),
    )


def write_comparison_summary(path: str, report: ComparisonReport) -> None:
    lines = [f"{key} = {_FLOAT_FMT % value}" for key, value in sorted(report.summary().items())]
    _atomic_write(path, ("\n".join(lines) + "\n").encode("ascii"))


# --- portable graymap rasters ------------------------------------------------

def heatmap_bytes(matrix: np.ndarray) -> bytes:
    """P5 raster of a (time, x) matrix with sign-preserving normalization."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.size == 0:
        raise DataError(f"heatmap needs a non-empty 2-D matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise DataError("heatmap input contains non-finite values")
    peak = np.abs(matrix).max()
    scaled = matrix / peak if peak > 0 else matrix
    pixels = np.clip(np.rint(127.5 * (scaled + 1.0)), 0, 255).astype(np.uint8)
    rows, cols = pixels.shape
    return f"P5\n{cols} {rows}\n255\n".encode("ascii") + pixels.tobytes()


def write_heatmap(path: str, matrix: np.ndarray) -> None:
    _atomic_write(path, heatmap_bytes(matrix))


def snapshot_matrix(snapshots: Sequence[FieldSnapshot]) -> np.ndarray:
    """Stack snapshots into a (time, x) matrix ordered by time."""
    if not snapshots:
        raise DataError("no field snapshots available")
    ordered = sorted(snapshots, key=lambda s: s.t)
    return np.stack([s.state.phi_curr for s in ordered])


# --- figures -----------------------------------------------------------------

def _save_figure(fig, path: str) -> None:
    fig.savefig(path, dpi=150, metadata=_PNG_METADATA)
    plt.close(fig)


def figure_trajectory(path: str, record: TrajectoryRecord) -> None:
    fig, (ax_x, ax_b) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    ax_x.plot(record.times, record.positions, lw=0.8, color="k")
    ax_x.set_ylabel(r"$x_p/\lambda_c$")
    ax_b.plot(record.times, record.betas, lw=0.5, color="tab:blue")
    ax_b.set_ylabel(r"$\beta$")
    ax_b.set_xlabel(r"$t/\tau_c$")
    fig.tight_layout()
    _save_figure(fig, path)


def figure_ensemble(path: str, result: EnsembleResult, max_traces: int = 200) -> None:
    fig, ax = plt.subplots(figsize=(7, 5))
    for rec in result.records[:max_traces]:
        ax.plot(rec.positions, rec.times, lw=0.3, alpha=0.3, color="tab:purple")
    ax.set_xlabel(r"$x/\lambda_c$")
    ax.set_ylabel(r"$t/\tau_c$")
    ax.set_title(f"{len(result.records)} trajectories")
    fig.tight_layout()
    _save_figure(fig, path)


def figure_heatmap(path: str, matrix: np.ndarray, extent: tuple[float, float, float, float]) -> None:
    """Field heatmap; extent = (x_min, x_max, t_min, t_max)."""
    matrix = np.asarray(matrix, dtype=float)
    peak = np.abs(matrix).max() or 1.0
    fig, ax = plt.subplots(figsize=(7, 5))
    im = ax.imshow(
        matrix,
        origin="lower",
        aspect="auto",
        extent=extent,
        cmap="RdBu_r",
        vmin=-peak,
        vmax=peak,
    )
    fig.colorbar(im, ax=ax, label=r"$\phi$ (normalized)")
    ax.set_xlabel(r"$x/\lambda_c$")
    ax.set_ylabel(r"$t/\tau_c$")
    fig.tight_layout()
    _save_figure(fig, path)


def figure_comparison(path: str, empirical: DensitySeries, analytic: DensitySeries) -> None:
    """Side-by-side empirical PDF and Born-density heatmaps plus final-time cut."""
    fig, axes = plt.subplots(1, 3, figsize=(11, 4))
    for ax, series, title in (
        (axes[0], empirical, "ensemble PDF"),
        (axes[1], analytic, r"$|\psi|^2$"),
    ):
        ax.imshow(
            series.densities,
            origin="lower",
            aspect="auto",
            extent=(series.x_centers[0], series.x_centers[-1], series.times[0], series.times[-1]),
            cmap="viridis",
        )
        ax.set_title(title)
        ax.set_xlabel(r"$x/\lambda_c$")
    axes[0].set_ylabel(r"$t/\tau_c$")
    axes[2].plot(empirical.x_centers, empirical.densities[-1], label="ensemble", color="tab:purple")
    axes[2].plot(analytic.x_centers, analytic.densities[-1], label=r"$|\psi|^2$", color="k", ls="--")
    axes[2].set_title(f"t = {empirical.times[-1]:g}")
    axes[2].set_xlabel(r"$x/\lambda_c$")
    axes[2].legend()
    fig.tight_layout()
    _save_figure(fig, path)
