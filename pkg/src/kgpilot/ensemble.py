"""Calibration, single runs, and seeded parallel ensembles.

A run alternates one field step (source frozen at the pre-step particle
position) with one RK4 particle advance across the same interval.  Runs are
fully determined by (config, seed); ensembles merge per-seed results in seed
order so the payload is independent of worker count and scheduling.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field as dc_field, replace
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from . import config as cfg
from .config import PhysicalParams, RunConfig, config_digest, ensure_valid, make_grid
from .errors import ArchiveError, CalibrationError, KgpilotError
from .particle import ParticleState, advance
from .wavefield import (
    FieldState,
    SourceSpec,
    first_step,
    random_perturbation,
    step,
    zero_field,
)

FORMAT_VERSION = "1.0"
_TRAJ_MAGIC = b"PWTRAJ1\x00"

# Divergence guard: chaotic coupled runs under bad configs fail loudly.
DIVERGENCE_LIMIT_FACTOR = 1e6


@dataclass(frozen=True)
class TrajectoryRecord:
    """Strided samples of one trajectory; times are implied by the stride."""

    seed: int
    times: np.ndarray
    positions: np.ndarray
    betas: np.ndarray
    config_digest: str

    def __eq__(self, other):
        if not isinstance(other, TrajectoryRecord):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.config_digest == other.config_digest
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.betas, other.betas)
        )


@dataclass(frozen=True)
class FieldSnapshot:
    t: float
    state: FieldState


@dataclass
class SingleRunResult:
    record: TrajectoryRecord
    snapshots: list[FieldSnapshot] = dc_field(default_factory=list)


@dataclass
class EnsembleResult:
    records: list[TrajectoryRecord]
    config: RunConfig
    phi_char: float
    failures: dict[int, str] = dc_field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    def positions_at_index(self, idx: int) -> np.ndarray:
        return np.array([r.positions[idx] for r in self.records])


def calibrate(config: RunConfig, horizon: float | None = None) -> float:
    """Characteristic wave amplitude of the stagnant particle.

    Runs the system with the coupling forced to zero and no perturbation for
    10 tau_c (on its own light-cone-sized grid) and returns the peak |phi|
    over the final tau_c.
    """
    ensure_valid(config)
    p = config.params
    if horizon is None:
        horizon = 10.0 * p.tau_c
    grid = make_grid(p, horizon, x0=config.x0, dx=config.grid.dx,
                     cfl=p.c * config.grid.dt / config.grid.dx)
    stagnant = replace(config, params=replace(p, alpha=0.0), grid=grid,
                       perturbation_ratio=0.0, snapshot_stride=None)
    tail_start = horizon - p.tau_c
    peak = 0.0
    for state, _particle in _iterate(stagnant, perturbation=np.zeros(grid.nx), limit=None):
        if state.t >= tail_start:
            peak = max(peak, float(np.abs(state.phi_curr).max()))
    if peak == 0.0:
        raise CalibrationError(
            "calibration produced a zero field (is epsilon_p zero?)", phi_char=0.0
        )
    return peak


def normalize_forcing(config: RunConfig) -> tuple[RunConfig, float]:
    """Rescale epsilon_p so the stagnant-particle wave has unit peak amplitude.

    Returns (normalized config, phi_char measured for the original config).
    Exact by linearity of the field equation.
    """
    phi_char = calibrate(config)
    p = config.params
    normalized = replace(config, params=replace(p, epsilon_p=p.epsilon_p / phi_char))
    return normalized, phi_char


def _iterate(config: RunConfig, perturbation: np.ndarray, limit: float | None):
    """Yield (field_state, particle_state) at t = dt, 2dt, ... nt*dt.

    The particle state yielded alongside a field level is the one advanced to
    that level's time.
    """
    grid = config.grid
    p = config.params
    dt = grid.dt
    phi0 = perturbation.copy()
    phi0[0] = 0.0
    phi0[-1] = 0.0
    field0 = FieldState(phi0, np.zeros(grid.nx), 0.0, grid, p)
    particle = ParticleState.at_rest(config.x0)

    source0 = SourceSpec(x_p=particle.x_p, t=0.0, params=p)
    field1 = first_step(field0, np.zeros(grid.nx), source0, limit=limit)
    if p.alpha != 0.0:
        particle = advance(particle, field0, field1, dt)
    else:
        particle = replace(particle, t=dt)
    yield field1, particle

    field = field1
    for n in range(1, grid.nt):
        source = SourceSpec(x_p=particle.x_p, t=field.t, params=p)
        new_field = step(field, source, limit=limit)
        if p.alpha != 0.0:
            particle = advance(particle, field, new_field, dt)
        else:
            particle = replace(particle, t=new_field.t)
        field = new_field
        yield field, particle


def simulate(config: RunConfig, phi_char: float, perturbation: np.ndarray) -> SingleRunResult:
    """Run one simulation with an explicit initial perturbation array."""
    ensure_valid(config)
    grid = config.grid
    digest = config_digest(config)
    limit = DIVERGENCE_LIMIT_FACTOR * max(phi_char, 1e-300)

    n_samples = grid.nt // config.sample_stride + 1
    dt_sample = config.sample_stride * grid.dt
    times = np.empty(n_samples)
    positions = np.empty(n_samples)
    betas = np.empty(n_samples)
    times[0] = 0.0
    positions[0] = config.x0
    betas[0] = 0.0
    snapshots: list[FieldSnapshot] = []

    k = 1
    for n, (field, particle) in enumerate(_iterate(config, perturbation, limit), start=1):
        if n % config.sample_stride == 0 and k < n_samples:
            times[k] = k * dt_sample
            positions[k] = particle.x_p
            betas[k] = particle.beta
            k += 1
        if config.snapshot_stride is not None and n % config.snapshot_stride == 0:
            snapshots.append(FieldSnapshot(t=field.t, state=field))
    record = TrajectoryRecord(
        seed=config.seed, times=times[:k], positions=positions[:k],
        betas=betas[:k], config_digest=digest,
    )
    return SingleRunResult(record=record, snapshots=snapshots)


def run_single(config: RunConfig, phi_char: float, seed: int | None = None) -> SingleRunResult:
    """Seeded run: zero field plus white perturbation, particle at rest at x0."""
    if phi_char <= 0:
        raise CalibrationError("phi_char must be positive; run calibration first",
                               phi_char=phi_char)
    if seed is not None:
        config = replace(config, seed=seed)
    amplitude = config.perturbation_ratio * phi_char
    perturbation = random_perturbation(config.seed, amplitude, config.grid)
    return simulate(config, phi_char, perturbation)


def _run_seed(args) -> tuple[int, TrajectoryRecord | None, str | None]:
    config, phi_char, seed = args
    try:
        out = run_single(config, phi_char, seed=seed)
        return seed, out.record, None
    except KgpilotError as exc:
        return seed, None, f"{type(exc).__name__}: {exc}"


def run_ensemble(
    config: RunConfig,
    n_runs: int,
    seed_base: int,
    workers: int = 1,
    phi_char: float | None = None,
) -> EnsembleResult:
    """Run seeds seed_base .. seed_base+n_runs-1, merged deterministically.

    Single-run failures are recorded per seed without aborting the rest.
    """
    if n_runs < 1:
        raise KgpilotError(f"n_runs must be >= 1, got {n_runs}")
    if workers < 1:
        raise KgpilotError(f"workers must be >= 1, got {workers}")
    ensure_valid(config)
    if phi_char is None:
        config, _ = normalize_forcing(config)
        phi_char = 1.0
    tasks = [(config, phi_char, seed_base + i) for i in range(n_runs)]
    if workers == 1:
        results = [_run_seed(t) for t in tasks]
    else:
        with get_context("fork").Pool(processes=workers) as pool:
            results = pool.map(_run_seed, tasks, chunksize=max(1, n_runs // (4 * workers)))
    results.sort(key=lambda r: r[0])
    records = [rec for _, rec, err in results if err is None]
    failures = {seed: err for seed, _, err in results if err is not None}
    return EnsembleResult(records=records, config=config, phi_char=phi_char,
                          failures=failures)


# --- archive I/O -------------------------------------------------------------

def _trajectory_bytes(record: TrajectoryRecord, dt_sample: float) -> bytes:
    header = _TRAJ_MAGIC + struct.pack(
        "<QQdd", record.seed, len(record.positions), 0.0, dt_sample
    )
    body = (
        record.positions.astype("<f8").tobytes()
        + record.betas.astype("<f8").tobytes()
    )
    return header + body


def _parse_trajectory(data: bytes, digest: str) -> TrajectoryRecord:
    if data[:8] != _TRAJ_MAGIC:
        raise ArchiveError("bad trajectory file magic")
    seed, n, t0, dt_sample = struct.unpack("<QQdd", data[8:40])
    need = 40 + 16 * n
    if len(data) != need:
        raise ArchiveError(f"trajectory file truncated: {len(data)} != {need} bytes")
    floats = np.frombuffer(data, dtype="<f8", offset=40)
    positions = floats[:n].copy()
    betas = floats[n:].copy()
    times = t0 + np.arange(n) * dt_sample
    return TrajectoryRecord(seed=int(seed), times=times, positions=positions,
                            betas=betas, config_digest=digest)


def save(result: EnsembleResult, path) -> None:
    """Write an ensemble archive directory (manifest + one binary per run)."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    digest = config_digest(result.config)
    dt_sample = result.config.sample_stride * result.config.grid.dt
    checksums = {}
    for record in result.records:
        data = _trajectory_bytes(record, dt_sample)
        name = f"traj_{record.seed}.bin"
        (root / name).write_bytes(data)
        checksums[name] = hashlib.sha256(data).hexdigest()
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": cfg.to_flat_dict(result.config),
        "config_digest": digest,
        "units": cfg.unit_metadata(result.config.params),
        "phi_char": result.phi_char,
        "seeds": [r.seed for r in result.records],
        "failures": {str(k): v for k, v in result.failures.items()},
        "checksums": checksums,
    }
    (root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load(path) -> EnsembleResult:
    """Read an archive back; rejects version, checksum, and digest mismatches."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise ArchiveError(f"no manifest.json under {root}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    version = manifest.get("format_version", "")
    if version.split(".")[0] != FORMAT_VERSION.split(".")[0]:
        raise ArchiveError(
            f"unsupported archive format version {version!r} (supported: {FORMAT_VERSION})"
        )
    config = cfg.from_flat_dict(manifest["config"])
    digest = config_digest(config)
    if digest != manifest["config_digest"]:
        raise ArchiveError("config digest mismatch: archive metadata is inconsistent")
    records = []
    for seed in manifest["seeds"]:
        name = f"traj_{seed}.bin"
        try:
            data = (root / name).read_bytes()
        except OSError as exc:
            raise ArchiveError(f"missing or unreadable trajectory file {name}") from exc
        actual = hashlib.sha256(data).hexdigest()
        if actual != manifest["checksums"][name]:
            raise ArchiveError(f"checksum mismatch for {name}")
        # each record is stamped with the digest of its own per-seed config
        seed_digest = config_digest(replace(config, seed=seed))
        record = _parse_trajectory(data, seed_digest)
        if record.seed != seed:
            raise ArchiveError(f"seed mismatch in {name}")
        records.append(record)
    failures = {int(k): v for k, v in manifest.get("failures", {}).items()}
    return EnsembleResult(records=records, config=config,
                          phi_char=float(manifest["phi_char"]), failures=failures)
