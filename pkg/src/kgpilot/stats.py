"""Ensemble statistics: empirical densities, speed and wavelength measures,
and comparison against the analytic Born density."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import AnalyticParams, ModeSet, born_density
from .ensemble import EnsembleResult, TrajectoryRecord
from .errors import DataError, ParameterError
from .config import node_coords
from .wavefield import FieldState

_trapz = np.trapezoid if hasattr(np, "trapezoid") else np.trapz


@dataclass(frozen=True)
class DensitySeries:
    """Time-indexed normalized densities on a common uniform grid."""

    times: np.ndarray
    x_centers: np.ndarray
    densities: np.ndarray  # rows = times

    def __post_init__(self):
        if self.densities.shape != (len(self.times), len(self.x_centers)):
            raise DataError("density matrix shape does not match times/x_centers")
        steps = np.diff(self.x_centers)
        if steps.size and not np.allclose(steps, steps[0], rtol=1e-9):
            raise DataError("x_centers must be uniformly spaced")


@dataclass(frozen=True)
class ComparisonReport:
    times: np.ndarray
    l2_distance: np.ndarray
    pearson_r: np.ndarray
    total_variation: np.ndarray

    def summary(self) -> dict:
        return {
            "n_times": int(len(self.times)),
            "l2_median": float(np.median(self.l2_distance)),
            "pearson_median": float(np.median(self.pearson_r)),
            "pearson_min": float(self.pearson_r.min()),
            "tv_median": float(np.median(self.total_variation)),
            "tv_max": float(self.total_variation.max()),
        }


def _sample_index(record: TrajectoryRecord, t: float) -> int:
    dt_sample = record.times[1] - record.times[0] if len(record.times) > 1 else 1.0
    idx = int(round(t / dt_sample))
    if idx < 0 or idx >= len(record.times) or abs(record.times[idx] - t) > 1e-9 * max(1.0, abs(t)):
        raise DataError(f"time {t} was not sampled (stride {dt_sample})")
    return idx


def pdf_series(
    result: EnsembleResult,
    bandwidth: float,
    x_grid: np.ndarray,
    times: np.ndarray,
) -> DensitySeries:
    """Gaussian-kernel density estimate of particle position at each time."""
    if bandwidth <= 0:
        raise ParameterError(f"bandwidth must be positive, got {bandwidth}")
    if not result.records:
        raise DataError("empty ensemble")
    x_grid = np.asarray(x_grid, dtype=float)
    times = np.asarray(times, dtype=float)
    rows = np.empty((len(times), len(x_grid)))
    for i, t in enumerate(times):
        idx = _sample_index(result.records[0], t)
        # sorted positions make the kernel sum independent of record order
        pos = np.sort([r.positions[idx] for r in result.records])
        z = (x_grid[None, :] - pos[:, None]) / bandwidth
        dens = np.exp(-0.5 * z * z).sum(axis=0)
        total = _trapz(dens, x_grid)
        if total <= 0:
            raise DataError(f"density vanished on the grid at t = {t}")
        rows[i] = dens / total
    return DensitySeries(times=times, x_centers=x_grid, densities=rows)


def analytic_density_series(
    params: AnalyticParams, x_grid: np.ndarray, times: np.ndarray
) -> DensitySeries:
    """Born density |psi|^2 of the Gaussian response on the same layout."""
    modes = ModeSet(params)
    x_grid = np.asarray(x_grid, dtype=float)
    times = np.asarray(times, dtype=float)
    rows = np.stack([born_density(x_grid, t, params, modes=modes) for t in times])
    return DensitySeries(times=times, x_centers=x_grid, densities=rows)


def quasi_steady_speed(
    record: TrajectoryRecord,
    window: tuple[float, float],
    c: float = 1.0,
    tau_c: float = 1.0,
) -> float:
    """Signed beta from the least-squares slope of x(t) over the window."""
    t_a, t_b = window
    if t_b - t_a < 10.0 * tau_c:
        raise ParameterError(
            f"window [{t_a}, {t_b}] shorter than 10 tau_c = {10 * tau_c}"
        )
    mask = (record.times >= t_a) & (record.times <= t_b)
    if mask.sum() < 2:
        raise DataError("window contains fewer than two samples")
    ts = record.times[mask]
    xs = record.positions[mask]
    # explicit normal equations: a constant record gives exactly zero slope
    dt = ts - ts.mean()
    dx = xs - xs.mean()
    slope = float(np.dot(dt, dx) / np.dot(dt, dt))
    return slope / c


def local_wavelength(field: FieldState, x_p: float, half_window: float) -> float:
    """Twice the mean spacing of consecutive zero crossings near the particle."""
    xs = node_coords(field.grid)
    lo = x_p - half_window
    hi = x_p + half_window
    if lo < xs[0] or hi > xs[-1]:
        raise DataError("wavelength window extends beyond the grid")
    mask = (xs >= lo) & (xs <= hi)
    x_w = xs[mask]
    phi_w = field.phi_curr[mask]
    sgn = np.sign(phi_w)
    flip = np.flatnonzero(sgn[:-1] * sgn[1:] < 0)
    frac = phi_w[flip] / (phi_w[flip] - phi_w[flip + 1])
    crossings = list(x_w[flip] + frac * (x_w[flip + 1] - x_w[flip]))
    # a node that is exactly zero with a sign change across it is a crossing
    exact = np.flatnonzero(sgn[1:-1] == 0)
    for j in exact + 1:
        if sgn[j - 1] * sgn[j + 1] < 0:
            crossings.append(x_w[j])
    crossings = np.sort(crossings)
    if crossings.size < 2:
        raise DataError(
            f"fewer than 2 zero crossings within +/-{half_window} of x = {x_p:.4g}"
        )
    return 2.0 * float(np.mean(np.diff(crossings)))


def de_broglie_check(
    record: TrajectoryRecord,
    snapshots,
    half_window: float = 5.0,
    beta_min: float = 0.05,
    lambda_c: float = 1.0,
) -> np.ndarray:
    """Ratios r = lambda_local * gamma * |beta| / lambda_c at usable samples.

    r = 1 means the local wavenumber satisfies p = hbar k exactly.  Samples
    with |beta| below beta_min or without enough crossings are skipped.
    """
    ratios = []
    for snap in snapshots:
        try:
            idx = _sample_index(record, snap.t)
        except DataError:
            continue
        beta = record.betas[idx]
        if abs(beta) <= beta_min:
            continue
        try:
            lam = local_wavelength(snap.state, record.positions[idx], half_window)
        except DataError:
            continue
        gamma = 1.0 / math.sqrt(1.0 - beta * beta)
        ratios.append(lam * gamma * abs(beta) / lambda_c)
    return np.array(ratios)


def compare(empirical: DensitySeries, analytic: DensitySeries) -> ComparisonReport:
    """Per-time L2 distance, Pearson correlation, and total variation."""
    if len(empirical.times) != len(analytic.times) or not np.allclose(
        empirical.times, analytic.times, rtol=1e-9, atol=1e-12
    ):
        raise DataError("time grids differ; resample before comparing")
    if len(empirical.x_centers) != len(analytic.x_centers) or not np.allclose(
        empirical.x_centers, analytic.x_centers, rtol=1e-9, atol=1e-12
    ):
        raise DataError("spatial grids differ; resample before comparing")
    xs = empirical.x_centers
    l2 = np.empty(len(empirical.times))
    pearson = np.empty_like(l2)
    tv = np.empty_like(l2)
    for i, (p, q) in enumerate(zip(empirical.densities, analytic.densities)):
        diff = p - q
        l2[i] = math.sqrt(_trapz(diff * diff, xs))
        pearson[i] = np.corrcoef(p, q)[0, 1]
        tv[i] = 0.5 * _trapz(np.abs(diff), xs)
    return ComparisonReport(
        times=empirical.times.copy(), l2_distance=l2, pearson_r=pearson,
        total_variation=tv,
    )
