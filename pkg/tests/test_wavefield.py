import math

import numpy as np
import pytest
from scipy.integrate import quad

from kgpilot.config import Grid, PhysicalParams, default_config, node_coords
from kgpilot.errors import DivergenceError, OutOfDomainError, ParameterError
from kgpilot.wavefield import (
    FieldState,
    SourceSpec,
    energy,
    first_step,
    forcing,
    gradient_at,
    gradient_offset,
    modified_delta,
    random_perturbation,
    step,
    zero_field,
)

P = PhysicalParams()
P_FREE = PhysicalParams(epsilon_p=0.0)


def _periodic_grid(nx=200, dx=0.05, dt=0.025, nt=100):
    return Grid(0.0, (nx - 1) * dx, nx, dt, nt)


def _dirichlet_grid(half=6.0, dx=0.05, horizon=2.0):
    j = int(round(half / dx))
    dt = dx / 2
    return Grid(-j * dx, j * dx, 2 * j + 1, dt, int(round(horizon / dt)))


# --- source terms ------------------------------------------------------------

def test_modified_delta_unit_mass():
    # quadrature oracle: integral of the modified delta is 1 for any width
    for a in (0.25, 0.5, 2.0):
        val, err = quad(lambda x: modified_delta(x, 0.3, a), -50, 50)
        assert val == pytest.approx(1.0, abs=1e-10)


def test_modified_delta_peak_and_symmetry():
    a = 0.5
    assert modified_delta(1.2, 1.2, a) == pytest.approx(1.0 / (a * math.sqrt(math.pi)))
    assert modified_delta(1.2 + 0.3, 1.2, a) == modified_delta(1.2 - 0.3, 1.2, a)


def test_forcing_is_second_harmonic():
    assert forcing(0.0, P) == 0.0
    t_quarter = (2 * math.pi / P.omega_c) / 8  # quarter period of 2*omega_c
    assert forcing(t_quarter, P) == pytest.approx(P.epsilon_p)
    assert forcing(0.25, P) == pytest.approx(P.epsilon_p * math.sin(2 * P.omega_c * 0.25))


# --- time stepping -----------------------------------------------------------

def test_null_solution_stays_zero():
    grid = _dirichlet_grid()
    f = zero_field(grid, P_FREE)
    f = first_step(f, np.zeros(grid.nx), None)
    for _ in range(40):
        f = step(f, None)
    assert np.all(f.phi_curr == 0.0)


def test_forced_field_grows_then_oscillates():
    grid = _dirichlet_grid(half=4.0, horizon=3.0)
    f = zero_field(grid, P)
    src = SourceSpec(0.0, 0.0, P)
    f = first_step(f, np.zeros(grid.nx), src)
    peak = 0.0
    for _ in range(1, grid.nt):
        f = step(f, SourceSpec(0.0, f.t, P))
        peak = max(peak, np.abs(f.phi_curr).max())
    assert peak > 0.0
    assert np.all(np.isfinite(f.phi_curr))


def test_source_time_mismatch_rejected():
    grid = _dirichlet_grid(half=2.0, horizon=1.0)
    f = zero_field(grid, P)
    f = first_step(f, np.zeros(grid.nx), SourceSpec(0.0, 0.0, P))
    with pytest.raises(ParameterError):
        step(f, SourceSpec(0.0, f.t + 0.5, P))


def test_divergence_guard_triggers():
    grid = _periodic_grid(nx=64, nt=10)
    phi = np.full(64, 10.0)
    f = FieldState(phi, phi.copy(), 0.0, grid, P_FREE, bc="periodic")
    with pytest.raises(DivergenceError):
        step(f, None, limit=1.0)


def test_dirichlet_boundary_nodes_stay_zero():
    grid = _dirichlet_grid(half=3.0, horizon=2.0)
    f = zero_field(grid, P)
    f = first_step(f, np.zeros(grid.nx), SourceSpec(0.0, 0.0, P))
    for _ in range(1, grid.nt):
        f = step(f, SourceSpec(0.0, f.t, P))
        assert f.phi_curr[0] == 0.0 and f.phi_curr[-1] == 0.0


def test_mirror_symmetry_is_bitwise():
    # an exactly mirrored initial state evolves into its exact mirror
    grid = _dirichlet_grid(half=4.0, horizon=2.0)
    rng = np.random.default_rng(7)
    bump = np.zeros(grid.nx)
    bump[1:-1] = rng.normal(size=grid.nx - 2)
    sym = bump + bump[::-1]
    f = FieldState(sym.copy(), np.zeros(grid.nx), 0.0, grid, P_FREE)
    f = first_step(f, np.zeros(grid.nx), None)
    for _ in range(60):
        f = step(f, None)
        assert np.array_equal(f.phi_curr, f.phi_curr[::-1])

    anti = bump - bump[::-1]
    g = FieldState(anti.copy(), np.zeros(grid.nx), 0.0, grid, P_FREE)
    g = first_step(g, np.zeros(grid.nx), None)
    for _ in range(60):
        g = step(g, None)
        assert np.array_equal(g.phi_curr, -g.phi_curr[::-1])


# --- dispersion and energy ---------------------------------------------------

def _discrete_omega(k, dx, dt, params):
    s = dt * dt * ((params.c**2) * (2 - 2 * math.cos(k * dx)) / (dx * dx) + params.omega_c**2)
    return math.acos(1 - s / 2) / dt


def _travelling_wave_field(k, grid, params):
    xs = np.arange(grid.nx) * grid.dx
    om = _discrete_omega(k, grid.dx, grid.dt, params)
    return FieldState(np.cos(k * xs), np.cos(k * xs + om * grid.dt), 0.0, grid, params,
                      bc="periodic")


@pytest.mark.parametrize("k", [2 * math.pi, 4 * math.pi])
def test_plane_wave_dispersion_within_one_percent(k):
    grid = _periodic_grid(nx=200, nt=int(round(20 / 0.025)))
    f = _travelling_wave_field(k, grid, P_FREE)
    trace = np.empty(grid.nt)
    for n in range(grid.nt):
        f = step(f, None)
        trace[n] = f.phi_curr[0]
    tgrid = (1 + np.arange(grid.nt)) * grid.dt
    sgn = np.sign(trace)
    idx = np.flatnonzero(sgn[:-1] * sgn[1:] < 0)
    crossings = tgrid[idx] + grid.dt * trace[idx] / (trace[idx] - trace[idx + 1])
    omega_measured = 2 * math.pi / (2 * np.mean(np.diff(crossings)))
    omega_exact = math.sqrt(P.c**2 * k * k + P.omega_c**2)
    assert abs(omega_measured - omega_exact) / omega_exact < 0.01


def test_energy_zero_field():
    grid = _periodic_grid(nx=32, nt=1)
    assert energy(zero_field(grid, P_FREE)) == 0.0


def test_energy_positive_and_conserved_on_plane_wave():
    grid = _periodic_grid(nx=200, nt=400)
    f = _travelling_wave_field(2 * math.pi, grid, P_FREE)
    e0 = energy(f)
    assert e0 > 0.0
    worst = 0.0
    for _ in range(grid.nt):
        f = step(f, None)
        worst = max(worst, abs(energy(f) - e0) / e0)
    assert worst < 1e-12


def test_energy_drift_small_for_standing_gaussian():
    grid = _dirichlet_grid(half=8.0, horizon=5.0)
    xs = node_coords(grid)
    f = FieldState(np.exp(-xs * xs), np.zeros(grid.nx), 0.0, grid, P_FREE)
    f = first_step(f, np.zeros(grid.nx), None)
    e0 = energy(f)
    for _ in range(1, grid.nt):
        f = step(f, None)
    # naive functional oscillates at O((omega dt)^2) for standing waves
    assert abs(energy(f) - e0) / e0 < 0.02


# --- gradients ---------------------------------------------------------------

def test_gradient_matches_analytic_sine():
    grid = _dirichlet_grid(half=4.0)
    xs = node_coords(grid)
    k = 2 * math.pi
    f = FieldState(np.sin(k * xs), np.zeros(grid.nx), 0.0, grid, P_FREE)
    for x in (0.0, 0.013, -1.27, 2.501):
        exact = k * math.cos(k * x)
        # 4th-order truncation: |err| ~ k*(k*dx)^4/30 ~ 2e-3 at dx = 0.05
        assert gradient_at(f, x) == pytest.approx(exact, abs=5e-4 * k)


def test_gradient_convergence_fourth_order():
    k = 2 * math.pi
    errs = []
    for dx in (0.05, 0.025):
        grid = _dirichlet_grid(half=4.0, dx=dx)
        xs = node_coords(grid)
        f = FieldState(np.sin(k * xs), np.zeros(grid.nx), 0.0, grid, P_FREE)
        pts = np.linspace(-2.0, 2.0, 41)
        errs.append(max(abs(gradient_at(f, x) - k * math.cos(k * x)) for x in pts))
    order = math.log2(errs[0] / errs[1])
    assert order > 3.5


def test_gradient_odd_under_mirror():
    grid = _dirichlet_grid(half=4.0)
    rng = np.random.default_rng(3)
    bump = np.zeros(grid.nx)
    bump[1:-1] = rng.normal(size=grid.nx - 2)
    sym = bump + bump[::-1]
    f = FieldState(sym, np.zeros(grid.nx), 0.0, grid, P_FREE)
    for xi in (0.0, 0.31, 1.07, 2.499):
        assert gradient_offset(f, xi) == -gradient_offset(f, -xi)  # bitwise


def test_gradient_out_of_domain_raises():
    grid = _dirichlet_grid(half=2.0)
    f = zero_field(grid, P_FREE)
    with pytest.raises(OutOfDomainError):
        gradient_at(f, grid.x_max - grid.dx)  # inside the 5-node margin


# --- perturbations -----------------------------------------------------------

def test_perturbation_deterministic_and_interior():
    grid = _dirichlet_grid(half=3.0)
    a = random_perturbation(11, 1e-4, grid)
    b = random_perturbation(11, 1e-4, grid)
    c = random_perturbation(12, 1e-4, grid)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a[0] == 0.0 and a[-1] == 0.0
    assert np.abs(a).max() <= 1e-4
    assert np.abs(a).max() > 0.0


def test_perturbation_zero_amplitude_is_zero():
    grid = _dirichlet_grid(half=3.0)
    assert np.all(random_perturbation(5, 0.0, grid) == 0.0)


def test_perturbation_negative_amplitude_rejected():
    grid = _dirichlet_grid(half=3.0)
    with pytest.raises(ParameterError):
        random_perturbation(5, -1.0, grid)


# --- solver vs analytic (unforced Gaussian) ----------------------------------

def test_unforced_gaussian_second_order_convergence():
    from kgpilot.analytic import AnalyticParams, ModeSet, psi_grid

    ap = AnalyticParams(beta_amp=1.0, a=1.0, x_p0=0.0, L=20.0, n_modes=1024)
    modes = ModeSet(ap)
    errs = {}
    for dx in (0.05, 0.025):
        grid = _dirichlet_grid(half=12.0, dx=dx, horizon=5.0)
        xs = node_coords(grid)
        f = FieldState(np.exp(-xs * xs), np.zeros(grid.nx), 0.0, grid, P_FREE)
        f = first_step(f, np.zeros(grid.nx), None)
        for _ in range(1, grid.nt):
            f = step(f, None)
        ref = psi_grid(xs, [f.t], ap, modes=modes)[0].real
        errs[dx] = np.abs(f.phi_curr - ref).max()
    factor = errs[0.05] / errs[0.025]
    assert 3.5 <= factor <= 4.5
