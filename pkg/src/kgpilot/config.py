"""Physical parameters, grid geometry, and run configuration.

Default unit system: Compton units with lambda_c = tau_c = 1, hence c = 1 and
omega_c = 2*pi.  Any other consistent choice is allowed; the choice in effect
is recorded in output metadata (see `unit_metadata`).

Config files are flat `key = value` text with a mandatory `schema_version`
key.  Unknown keys are rejected: silent typos in physics parameters are the
dominant failure mode.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import ConfigError

SCHEMA_VERSION = 1

# Default numerical targets.
CFL_TARGET = 0.5
LIGHT_CONE_MARGIN = 1.1
NODES_PER_LAMBDA_C = 20  # dx = lambda_c/20 resolves the a = lambda_c/2 source


@dataclass(frozen=True)
class PhysicalParams:
    """Nondimensional constants of the coupled field-particle system."""

    c: float = 1.0
    omega_c: float = 2.0 * math.pi
    a: float = 0.5
    epsilon_p: float = 1.0
    alpha: float = 0.045

    @property
    def lambda_c(self) -> float:
        return 2.0 * math.pi * self.c / self.omega_c

    @property
    def tau_c(self) -> float:
        return 2.0 * math.pi / self.omega_c


@dataclass(frozen=True)
class Grid:
    """Uniform spatial lattice and time stepping descriptor."""

    x_min: float
    x_max: float
    nx: int
    dt: float
    nt: int

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def x_center(self) -> float:
        return 0.5 * (self.x_min + self.x_max)

    @property
    def t_final(self) -> float:
        return self.nt * self.dt


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one simulation bit-for-bit."""

    params: PhysicalParams
    grid: Grid
    seed: int = 1
    perturbation_ratio: float = 1e-4
    x0: float = 0.0
    sample_stride: int = 5
    snapshot_stride: int | None = None


@lru_cache(maxsize=128)
def _node_offsets(nx: int, dx: float) -> np.ndarray:
    # Offsets from the grid center; exactly antisymmetric for odd nx, which
    # the mirror-symmetry guarantee of the solver relies on.
    j0 = (nx - 1) / 2.0
    xs = (np.arange(nx) - j0) * dx
    xs.setflags(write=False)
    return xs


def node_offsets(grid: Grid) -> np.ndarray:
    """Node coordinates relative to the grid center (read-only array)."""
    return _node_offsets(grid.nx, grid.dx)


def node_coords(grid: Grid) -> np.ndarray:
    """Absolute node coordinates."""
    if grid.x_center == 0.0:
        return node_offsets(grid)
    return node_offsets(grid) + grid.x_center


def make_grid(
    params: PhysicalParams,
    horizon: float,
    x0: float = 0.0,
    dx: float | None = None,
    cfl: float = CFL_TARGET,
    margin: float = LIGHT_CONE_MARGIN,
) -> Grid:
    """Build a light-cone-safe grid for a run of `horizon` time units.

    The domain is symmetric about x0 with an odd node count, so no boundary
    reflection can reach the particle within nt steps.
    """
    if horizon <= 0:
        raise ConfigError("horizon must be positive")
    if dx is None:
        dx = params.lambda_c / NODES_PER_LAMBDA_C
    dt = cfl * dx / params.c
    nt = int(math.ceil(horizon / dt - 1e-12))
    half_needed = margin * params.c * nt * dt
    j_half = int(math.ceil(half_needed / dx)) + 1  # one node of float headroom
    return Grid(
        x_min=x0 - j_half * dx,
        x_max=x0 + j_half * dx,
        nx=2 * j_half + 1,
        dt=dt,
        nt=nt,
    )


def default_config(horizon: float = 100.0, seed: int = 1, x0: float = 0.0) -> RunConfig:
    """Reference configuration in Compton units.

    alpha = 0.045, source width a = lambda_c/2, dx = lambda_c/20, dt = dx/(2c),
    horizon 100 tau_c by default, domain sized to contain the full light cone.
    epsilon_p starts at 1 and is meant to be rescaled by ensemble.normalize_forcing
    so the stagnant-particle wave has unit characteristic amplitude.
    """
    params = PhysicalParams()
    grid = make_grid(params, horizon * params.tau_c, x0=x0)
    # sample every tau_c/8
    stride = max(1, int(round(params.tau_c / 8.0 / grid.dt)))
    return RunConfig(params=params, grid=grid, seed=seed, x0=x0, sample_stride=stride)


def validate(config: RunConfig) -> list[str]:
    """Return a list of human-readable invariant violations (empty = ok)."""
    v: list[str] = []
    p, g = config.params, config.grid
    if p.c <= 0:
        v.append(f"wave speed must be positive, got c = {p.c}")
    if p.omega_c <= 0:
        v.append(f"Compton frequency must be positive, got omega_c = {p.omega_c}")
    if p.a <= 0:
        v.append(f"source width must be positive, got a = {p.a}")
    if p.epsilon_p < 0:
        v.append(f"forcing amplitude must be non-negative, got epsilon_p = {p.epsilon_p}")
    if p.alpha < 0:
        v.append(f"coupling must be non-negative, got alpha = {p.alpha}")
    if g.nx < 3:
        v.append(f"grid needs at least 3 nodes, got nx = {g.nx}")
    if g.nt < 1:
        v.append(f"need at least one time step, got nt = {g.nt}")
    if g.x_max <= g.x_min:
        v.append(f"empty domain: x_max = {g.x_max} <= x_min = {g.x_min}")
    elif g.dx <= 0:
        v.append("grid spacing is not positive")
    if g.dt <= 0:
        v.append(f"time step must be positive, got dt = {g.dt}")
    if g.nx >= 3 and g.x_max > g.x_min and g.dt > 0:
        cfl = p.c * g.dt / g.dx
        if cfl > 1.0:
            v.append(f"CFL exceeded: c*dt/dx = {cfl:.6g} > 1")
        horizon = p.c * g.nt * g.dt
        slack = 1e-9 * max(1.0, abs(g.x_max), abs(g.x_min))
        if g.x_max + slack < config.x0 + LIGHT_CONE_MARGIN * horizon:
            v.append(
                "light cone exits domain: x_max = "
                f"{g.x_max:.6g} < x0 + {LIGHT_CONE_MARGIN}*c*T = "
                f"{config.x0 + LIGHT_CONE_MARGIN * horizon:.6g}"
            )
        if g.x_min - slack > config.x0 - LIGHT_CONE_MARGIN * horizon:
            v.append(
                "light cone exits domain: x_min = "
                f"{g.x_min:.6g} > x0 - {LIGHT_CONE_MARGIN}*c*T = "
                f"{config.x0 - LIGHT_CONE_MARGIN * horizon:.6g}"
            )
        if not (g.x_min <= config.x0 <= g.x_max):
            v.append(f"initial position x0 = {config.x0} outside the domain")
    # perturbation_ratio = 0 is allowed: it is the exact-symmetry control case.
    if config.perturbation_ratio < 0:
        v.append(f"perturbation ratio must be non-negative, got {config.perturbation_ratio}")
    if config.sample_stride < 1:
        v.append(f"sample stride must be >= 1, got {config.sample_stride}")
    if config.snapshot_stride is not None and config.snapshot_stride < 1:
        v.append(f"snapshot stride must be >= 1, got {config.snapshot_stride}")
    return v


def ensure_valid(config: RunConfig) -> None:
    violations = validate(config)
    if violations:
        raise ConfigError("invalid configuration: " + "; ".join(violations))


def unit_metadata(params: PhysicalParams) -> dict:
    return {
        "c": params.c,
        "omega_c": params.omega_c,
        "lambda_c": params.lambda_c,
        "tau_c": params.tau_c,
    }


# --- flat text serialization -------------------------------------------------

_FIELD_TYPES = {
    "schema_version": int,
    "c": float,
    "omega_c": float,
    "a": float,
    "epsilon_p": float,
    "alpha": float,
    "x_min": float,
    "x_max": float,
    "nx": int,
    "dt": float,
    "nt": int,
    "seed": int,
    "perturbation_ratio": float,
    "x0": float,
    "sample_stride": int,
    "snapshot_stride": (int, type(None)),
}


def to_flat_dict(config: RunConfig) -> dict:
    p, g = config.params, config.grid
    return {
        "schema_version": SCHEMA_VERSION,
        "c": p.c,
        "omega_c": p.omega_c,
        "a": p.a,
        "epsilon_p": p.epsilon_p,
        "alpha": p.alpha,
        "x_min": g.x_min,
        "x_max": g.x_max,
        "nx": g.nx,
        "dt": g.dt,
        "nt": g.nt,
        "seed": config.seed,
        "perturbation_ratio": config.perturbation_ratio,
        "x0": config.x0,
        "sample_stride": config.sample_stride,
        "snapshot_stride": config.snapshot_stride,
    }


def from_flat_dict(d: dict) -> RunConfig:
    unknown = sorted(set(d) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    missing = sorted(set(_FIELD_TYPES) - set(d))
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(missing)}")
    if int(d["schema_version"]) != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {d['schema_version']}; expected {SCHEMA_VERSION}"
        )
    params = PhysicalParams(
        c=float(d["c"]),
        omega_c=float(d["omega_c"]),
        a=float(d["a"]),
        epsilon_p=float(d["epsilon_p"]),
        alpha=float(d["alpha"]),
    )
    grid = Grid(
        x_min=float(d["x_min"]),
        x_max=float(d["x_max"]),
        nx=int(d["nx"]),
        dt=float(d["dt"]),
        nt=int(d["nt"]),
    )
    snap = d["snapshot_stride"]
    return RunConfig(
        params=params,
        grid=grid,
        seed=int(d["seed"]),
        perturbation_ratio=float(d["perturbation_ratio"]),
        x0=float(d["x0"]),
        sample_stride=int(d["sample_stride"]),
        snapshot_stride=None if snap is None else int(snap),
    )


def _format_value(value) -> str:
    if value is None:
        return "none"
    return repr(value)


def _parse_value(key: str, text: str):
    spec = _FIELD_TYPES[key]
    if text == "none":
        if spec is not int and not isinstance(spec, tuple):
            raise ConfigError(f"key {key!r} may not be none")
        if isinstance(spec, tuple):
            return None
        raise ConfigError(f"key {key!r} may not be none")
    target = int if spec is int or (isinstance(spec, tuple) and int in spec) else float
    try:
        return target(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {text!r}") from exc


def dumps_config(config: RunConfig) -> str:
    lines = [f"{k} = {_format_value(v)}" for k, v in to_flat_dict(config).items()]
    return "\n".join(lines) + "\n"


def loads_config(text: str) -> RunConfig:
    d: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in d:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        d[key] = _parse_value(key, value)
    return from_flat_dict(d)


def save_config(config: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_config(config))


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_config(fh.read())


def config_digest(config: RunConfig) -> str:
    """Content hash of the canonical serialization (hex)."""
    return hashlib.sha256(dumps_config(config).encode("utf-8")).hexdigest()
