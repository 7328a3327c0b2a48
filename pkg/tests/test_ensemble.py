import dataclasses
import json
import os

import numpy as np
import pytest

from kgpilot.config import config_digest, default_config
from kgpilot.ensemble import (
    FORMAT_VERSION,
    calibrate,
    load,
    normalize_forcing,
    run_ensemble,
    run_single,
    save,
    simulate,
)
from kgpilot.errors import ArchiveError, CalibrationError
from kgpilot.wavefield import random_perturbation


def _small_config(horizon=5.0, seed=1, **kw):
    cfg = default_config(horizon=horizon, seed=seed)
    return dataclasses.replace(cfg, **kw) if kw else cfg


# --- calibration -------------------------------------------------------------

def test_calibrate_linear_in_epsilon():
    cfg = _small_config()
    base = calibrate(cfg)
    doubled = dataclasses.replace(
        cfg, params=dataclasses.replace(cfg.params, epsilon_p=2.0 * cfg.params.epsilon_p)
    )
    assert base > 0.0
    assert calibrate(doubled) == pytest.approx(2.0 * base, rel=1e-12)


def test_calibrate_zero_forcing_fails():
    cfg = _small_config()
    dead = dataclasses.replace(cfg, params=dataclasses.replace(cfg.params, epsilon_p=0.0))
    with pytest.raises(CalibrationError) as exc:
        calibrate(dead)
    assert exc.value.phi_char == 0.0


def test_normalized_config_has_unit_amplitude():
    cfg = _small_config()
    normalized, phi_char = normalize_forcing(cfg)
    assert phi_char == pytest.approx(calibrate(cfg))
    assert calibrate(normalized) == pytest.approx(1.0, abs=1e-6)


# --- single runs -------------------------------------------------------------

def test_run_single_requires_calibration():
    with pytest.raises(CalibrationError):
        run_single(_small_config(), 0.0)


def test_run_single_deterministic():
    cfg, _ = normalize_forcing(_small_config())
    a = run_single(cfg, 1.0)
    b = run_single(cfg, 1.0)
    assert a.record == b.record


def test_run_single_starts_at_rest():
    cfg, _ = normalize_forcing(_small_config())
    rec = run_single(cfg, 1.0).record
    assert rec.times[0] == 0.0
    assert rec.positions[0] == cfg.x0
    assert rec.betas[0] == 0.0
    assert np.all(np.abs(rec.betas) < 1.0)


def test_zero_perturbation_exactly_stagnant():
    cfg, _ = normalize_forcing(_small_config())
    cfg = dataclasses.replace(cfg, perturbation_ratio=0.0)
    rec = run_single(cfg, 1.0).record
    assert np.all(rec.positions == cfg.x0)
    assert np.all(rec.betas == 0.0)


def test_mirror_symmetry_exact():
    # spatially reflecting the initial perturbation exactly mirrors the
    # trajectory about x0 (the system is reflection-symmetric by construction)
    cfg, _ = normalize_forcing(_small_config(seed=13))
    amp = cfg.perturbation_ratio * 1.0
    pert = random_perturbation(cfg.seed, amp, cfg.grid)
    plus = simulate(cfg, 1.0, pert).record
    minus = simulate(cfg, 1.0, pert[::-1].copy()).record
    assert np.array_equal(minus.positions - cfg.x0, -(plus.positions - cfg.x0))
    assert np.array_equal(minus.betas, -plus.betas)


def test_snapshots_collected():
    cfg, _ = normalize_forcing(_small_config())
    cfg = dataclasses.replace(cfg, snapshot_stride=cfg.grid.nt // 4)
    result = run_single(cfg, 1.0)
    assert len(result.snapshots) >= 4
    ts = [s.t for s in result.snapshots]
    assert ts == sorted(ts)


# --- ensembles ---------------------------------------------------------------

def test_ensemble_merge_sorted_and_seeded():
    cfg = _small_config()
    result = run_ensemble(cfg, 4, seed_base=10, workers=2)
    assert [r.seed for r in result.records] == [10, 11, 12, 13]
    assert result.failures == {}
    assert not result.partial
    # run_ensemble normalizes the forcing: the config of record has phi_char 1
    assert result.phi_char == 1.0
    assert result.config.params.epsilon_p == pytest.approx(
        cfg.params.epsilon_p / calibrate(cfg)
    )


def test_ensemble_workers_equivalent(tmp_path):
    cfg = _small_config()
    serial = run_ensemble(cfg, 4, seed_base=1, workers=1)
    parallel = run_ensemble(cfg, 4, seed_base=1, workers=4)
    save(serial, tmp_path / "serial")
    save(parallel, tmp_path / "parallel")
    for name in sorted(os.listdir(tmp_path / "serial")):
        a = (tmp_path / "serial" / name).read_bytes()
        b = (tmp_path / "parallel" / name).read_bytes()
        assert a == b, f"{name} differs between worker counts"


def test_positions_at_index():
    cfg = _small_config()
    result = run_ensemble(cfg, 3, seed_base=1, workers=1)
    xs = result.positions_at_index(0)
    np.testing.assert_array_equal(xs, np.full(3, cfg.x0))


# --- archive -----------------------------------------------------------------

def test_archive_roundtrip(tmp_path):
    cfg = _small_config(seed=5)
    result = run_ensemble(cfg, 3, seed_base=5, workers=1)
    path = tmp_path / "arch"
    save(result, path)
    again = load(path)
    assert again.config == result.config
    assert again.phi_char == result.phi_char
    assert len(again.records) == 3
    for a, b in zip(again.records, result.records):
        assert a == b  # bitwise: times, positions, betas


def test_archive_manifest_contents(tmp_path):
    cfg = _small_config()
    result = run_ensemble(cfg, 2, seed_base=1, workers=1)
    save(result, tmp_path / "arch")
    manifest = json.loads((tmp_path / "arch" / "manifest.json").read_text())
    assert manifest["format_version"] == FORMAT_VERSION
    assert manifest["config_digest"] == config_digest(result.config)
    assert "units" in manifest
    assert manifest["seeds"] == [1, 2]


def test_archive_tamper_detected(tmp_path):
    cfg = _small_config()
    result = run_ensemble(cfg, 2, seed_base=1, workers=1)
    save(result, tmp_path / "arch")
    target = tmp_path / "arch" / "traj_1.bin"
    data = bytearray(target.read_bytes())
    data[-1] ^= 0xFF
    target.write_bytes(bytes(data))
    with pytest.raises(ArchiveError):
        load(tmp_path / "arch")


def test_archive_version_rejected(tmp_path):
    cfg = _small_config()
    result = run_ensemble(cfg, 1, seed_base=1, workers=1)
    save(result, tmp_path / "arch")
    manifest_path = tmp_path / "arch" / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    manifest["format_version"] = "99.0"
    manifest_path.write_text(json.dumps(manifest))
    with pytest.raises(ArchiveError):
        load(tmp_path / "arch")


def test_archive_missing_file(tmp_path):
    cfg = _small_config()
    result = run_ensemble(cfg, 2, seed_base=1, workers=1)
    save(result, tmp_path / "arch")
    os.remove(tmp_path / "arch" / "traj_2.bin")
    with pytest.raises(ArchiveError):
        load(tmp_path / "arch")


def test_archive_rewrite_identical(tmp_path):
    cfg = _small_config()
    result = run_ensemble(cfg, 2, seed_base=1, workers=1)
    save(result, tmp_path / "arch")
    first = {p: (tmp_path / "arch" / p).read_bytes()
             for p in os.listdir(tmp_path / "arch")}
    save(result, tmp_path / "arch")
    for p, data in first.items():
        assert (tmp_path / "arch" / p).read_bytes() == data
