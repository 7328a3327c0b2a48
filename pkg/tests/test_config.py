import math

import numpy as np
import pytest

from kgpilot.config import (
    CFL_TARGET,
    LIGHT_CONE_MARGIN,
    SCHEMA_VERSION,
    Grid,
    PhysicalParams,
    RunConfig,
    config_digest,
    default_config,
    dumps_config,
    ensure_valid,
    load_config,
    loads_config,
    make_grid,
    node_coords,
    node_offsets,
    save_config,
    validate,
)
from kgpilot.errors import ConfigError


def test_default_params_compton_units():
    p = PhysicalParams()
    assert p.c == 1.0
    assert p.omega_c == 2.0 * math.pi
    assert p.lambda_c == pytest.approx(1.0)
    assert p.tau_c == pytest.approx(1.0)
    assert p.a == 0.5
    assert p.alpha == 0.045


@pytest.mark.parametrize("horizon", [5.0, 40.0, 100.0, 123.4])
def test_default_config_valid(horizon):
    cfg = default_config(horizon=horizon)
    assert validate(cfg) == []
    assert cfg.grid.nx % 2 == 1  # symmetric about x0 with a center node
    assert cfg.grid.dt == pytest.approx(CFL_TARGET * cfg.grid.dx / cfg.params.c)
    assert cfg.grid.t_final >= horizon


def test_grid_symmetric_about_x0():
    cfg = default_config(horizon=10.0, x0=3.5)
    xs = node_coords(cfg.grid)
    assert xs[(len(xs) - 1) // 2] == pytest.approx(3.5)
    np.testing.assert_allclose(xs + xs[::-1], 7.0, atol=1e-12)


def test_node_offsets_exactly_antisymmetric():
    grid = default_config(horizon=5.0).grid
    off = node_offsets(grid)
    assert np.all(off == -off[::-1])  # bitwise mirror symmetry


def test_light_cone_margin_enforced():
    cfg = default_config(horizon=10.0)
    horizon = cfg.params.c * cfg.grid.nt * cfg.grid.dt
    assert cfg.grid.x_max >= cfg.x0 + LIGHT_CONE_MARGIN * horizon - 1e-9
    # shrink the domain: must be flagged
    small = Grid(cfg.grid.x_min / 2, cfg.grid.x_max / 2,
                 cfg.grid.nx // 2 * 2 + 1, cfg.grid.dt, cfg.grid.nt)
    bad = RunConfig(params=cfg.params, grid=small, seed=cfg.seed, x0=cfg.x0)
    assert any("light cone" in v for v in validate(bad))


def test_cfl_violation_detected():
    cfg = default_config(horizon=5.0)
    g = cfg.grid
    bad = RunConfig(params=cfg.params,
                    grid=Grid(g.x_min, g.x_max, g.nx, 3.0 * g.dx, g.nt),
                    seed=cfg.seed, x0=cfg.x0)
    assert any("CFL" in v for v in validate(bad))
    with pytest.raises(ConfigError):
        ensure_valid(bad)


def test_make_grid_respects_resolution():
    p = PhysicalParams()
    grid = make_grid(p, horizon=7.0, x0=0.0)
    assert grid.dx == pytest.approx(p.lambda_c / 20)
    assert grid.nt * grid.dt >= 7.0 - 1e-12


def test_roundtrip_text_serialization():
    cfg = default_config(horizon=12.0, seed=9)
    text = dumps_config(cfg)
    assert f"schema_version = {SCHEMA_VERSION}" in text
    again = loads_config(text)
    assert again == cfg
    assert config_digest(again) == config_digest(cfg)


def test_roundtrip_file(tmp_path):
    cfg = default_config(horizon=6.0, seed=4)
    path = tmp_path / "run.cfg"
    save_config(cfg, path)
    assert load_config(path) == cfg


def test_snapshot_stride_none_roundtrip():
    cfg = default_config(horizon=6.0)
    assert cfg.snapshot_stride is None
    assert "snapshot_stride = none" in dumps_config(cfg)
    assert loads_config(dumps_config(cfg)).snapshot_stride is None


@pytest.mark.parametrize("mutation,message", [
    ("bogus_key = 1", "unknown"),
    ("seed = 2\nseed = 3", "duplicate"),
])
def test_bad_config_text_rejected(mutation, message):
    text = dumps_config(default_config(horizon=6.0))
    if "duplicate" in message:
        text = text.replace("seed = 1", mutation)
    else:
        text += mutation + "\n"
    with pytest.raises(ConfigError, match=message):
        loads_config(text)


def test_missing_key_rejected():
    text = dumps_config(default_config(horizon=6.0))
    text = "\n".join(l for l in text.splitlines() if not l.startswith("alpha"))
    with pytest.raises(ConfigError, match="missing"):
        loads_config(text)


def test_wrong_schema_version_rejected():
    text = dumps_config(default_config(horizon=6.0))
    text = text.replace(f"schema_version = {SCHEMA_VERSION}", "schema_version = 99")
    with pytest.raises(ConfigError, match="schema_version"):
        loads_config(text)


def test_comments_and_blank_lines_allowed():
    text = "# a comment\n\n" + dumps_config(default_config(horizon=6.0))
    assert loads_config(text) == default_config(horizon=6.0)


def test_digest_sensitive_to_any_field():
    base = default_config(horizon=6.0)
    other = default_config(horizon=6.0, seed=2)
    assert config_digest(base) != config_digest(other)


def test_negative_parameters_rejected():
    import dataclasses

    cfg = default_config(horizon=6.0)
    bad = dataclasses.replace(cfg, params=dataclasses.replace(cfg.params, a=-1.0))
    with pytest.raises(ConfigError):
        ensure_valid(bad)


def test_zero_perturbation_ratio_allowed():
    import dataclasses

    cfg = dataclasses.replace(default_config(horizon=6.0), perturbation_ratio=0.0)
    assert validate(cfg) == []
