"""Closed-form Gaussian response of the unforced Klein-Gordon equation.

The field is expanded in the orthonormal Fourier series on [-L, L] with
k_n = n*pi/L and coefficient factor 1/(2L); with a cosine time factor per
mode the t = 0 reconstruction of the initial Gaussian is exact up to
truncation.  Coefficients involve the error function of complex argument,
implemented in-house (power series near the axis, Faddeeva-style rational
evaluation of the scaled complementary function elsewhere).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DataError, OutOfDomainError, ParameterError

_SQRT_PI = math.sqrt(math.pi)
_TWO_OVER_SQRT_PI = 2.0 / _SQRT_PI

IM_LIMIT = 30.0
_TAIL_TOL = 1e-12
_TRIM_REL = 1e-18


# --- complex error function --------------------------------------------------

def _weideman_coeffs(n_terms: int) -> tuple[float, np.ndarray]:
    # Rational expansion of the Faddeeva function w(z) for Im z >= 0
    # (Weideman 1994).  Coefficients are real; computed once at import.
    m = 2 * n_terms
    ind = np.arange(-m + 1, m)
    big_l = math.sqrt(n_terms / math.sqrt(2.0))
    theta = (math.pi / m) * ind
    t = big_l * np.tan(0.5 * theta)
    fn = np.zeros(ind.size + 1)
    fn[1:] = np.exp(-t * t) * (big_l * big_l + t * t)
    coefs = np.fft.fft(np.fft.fftshift(fn)).real / (2.0 * m)
    return big_l, np.flipud(coefs[1 : n_terms + 1])


_WEIDEMAN_L, _WEIDEMAN_A = _weideman_coeffs(48)


def _faddeeva_upper(z: complex) -> complex:
    """w(z) = exp(-z^2) erfc(-iz) for Im z >= 0."""
    big_l = _WEIDEMAN_L
    r = (big_l + 1j * z) / (big_l - 1j * z)
    poly = 0.0 + 0.0j
    for a in _WEIDEMAN_A:
        poly = poly * r + a
    denom = big_l - 1j * z
    return 2.0 * poly / (denom * denom) + (1.0 / _SQRT_PI) / denom


def erfcx_complex(z: complex) -> complex:
    """Scaled complementary error function exp(z^2) erfc(z), Re z >= 0."""
    if z.real < 0:
        raise ParameterError("erfcx_complex requires Re z >= 0")
    return _faddeeva_upper(1j * z)


def _erf_series(z: complex) -> complex:
    total = 0.0 + 0.0j
    u = z
    zz = z * z
    k = 0
    while True:
        term = u / (2 * k + 1)
        total += term
        k += 1
        u *= -zz / k
        if abs(term) <= 1e-18 * max(1.0, abs(total)) or k > 3000:
            break
    return _TWO_OVER_SQRT_PI * total


def erf_complex(z: complex) -> complex:
    """Error function of complex argument, absolute error < 1e-10.

    Odd and conjugate-symmetric by construction.  |Im z| must not exceed 30;
    past that the result magnitude leaves double range.
    """
    z = complex(z)
    if abs(z.imag) > IM_LIMIT:
        raise ParameterError(f"|Im z| = {abs(z.imag):.3g} exceeds the overflow guard {IM_LIMIT}")
    if z.imag < 0.0:
        return erf_complex(z.conjugate()).conjugate()
    if z.real < 0.0:
        return -erf_complex(-z)
    # First quadrant from here on.
    if z.real <= 2.0:
        return _erf_series(z)
    if z.imag * z.imag - z.real * z.real > 700.0:
        raise ParameterError(f"erf({z}) overflows double precision")
    return 1.0 - cmath.exp(-z * z) * erfcx_complex(z)


# --- Gaussian-response mode sum ----------------------------------------------

@dataclass(frozen=True)
class AnalyticParams:
    """Initial Gaussian disturbance and series truncation."""

    beta_amp: float = 1.0
    a: float = 2.0
    x_p0: float = 0.0
    L: float = 40.0
    n_modes: int = 4096
    c: float = 1.0
    omega_c: float = 2.0 * math.pi

    def __post_init__(self):
        if self.L <= 0:
            raise ParameterError(f"half-domain must be positive, got L = {self.L}")
        if self.a <= 0:
            raise ParameterError(f"Gaussian width must be positive, got a = {self.a}")
        if self.n_modes < 2 or self.n_modes % 2:
            raise ParameterError(f"n_modes must be an even integer >= 2, got {self.n_modes}")
        if abs(self.x_p0) >= self.L:
            raise ParameterError("disturbance center must lie strictly inside (-L, L)")
        k_max = (self.n_modes // 2) * math.pi / self.L
        tail = math.exp(-((k_max * self.a / 2.0) ** 2))
        if tail > _TAIL_TOL:
            raise ParameterError(
                f"truncation too coarse: spectral tail {tail:.3g} > {_TAIL_TOL:g} "
                f"(raise n_modes or shrink L)"
            )


def fourier_coefficient(n: int, params: AnalyticParams) -> complex:
    """Series coefficient C_n of the initial Gaussian on [-L, L].

    Evaluated through exp(z^2)-scaled complementary error functions so that
    large-|n| coefficients underflow gracefully instead of producing inf*0.
    """
    if abs(n) > params.n_modes // 2:
        raise ParameterError(f"|n| = {abs(n)} exceeds n_modes/2 = {params.n_modes // 2}")
    a, L, xp = params.a, params.L, params.x_p0
    k = n * math.pi / L
    y = k * a / 2.0
    x1 = (L + xp) / a
    x2 = (L - xp) / a
    # exp(-y^2) * [erf(x1 - iy) + erf(x2 + iy)], stably:
    combined = 2.0 * math.exp(-y * y)
    combined -= math.exp(-x1 * x1) * cmath.exp(2j * x1 * y) * erfcx_complex(complex(x1, -y))
    combined -= math.exp(-x2 * x2) * cmath.exp(-2j * x2 * y) * erfcx_complex(complex(x2, y))
    return (params.beta_amp * _SQRT_PI * a / (4.0 * L)) * cmath.exp(-1j * k * xp) * combined


class ModeSet:
    """Cached coefficients, wavenumbers, and frequencies for fast evaluation."""

    def __init__(self, params: AnalyticParams):
        self.params = params
        half = params.n_modes // 2
        ns = np.arange(-half, half + 1)
        coeffs = np.array([fourier_coefficient(int(n), params) for n in ns])
        keep = np.abs(coeffs) > _TRIM_REL * np.abs(coeffs).max()
        self.ns = ns[keep]
        self.coeffs = coeffs[keep]
        self.k = self.ns * math.pi / params.L
        self.omega = np.sqrt(params.c**2 * self.k**2 + params.omega_c**2)

    def evaluate(self, xs: np.ndarray, ts: np.ndarray) -> np.ndarray:
        """Complex psi on the (t, x) product grid; rows are times."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if np.any(np.abs(xs) > self.params.L * (1 + 1e-12)):
            raise OutOfDomainError("evaluation point outside [-L, L]")
        basis = np.exp(1j * np.outer(xs, self.k))          # (nx, n_modes)
        time_part = self.coeffs[:, None] * np.cos(np.outer(self.omega, ts))
        return (basis @ time_part).T                       # (nt, nx)


def psi(x, t, params: AnalyticParams) -> complex:
    """Mode-sum solution at a single point (convenience wrapper)."""
    modes = ModeSet(params)
    return complex(modes.evaluate(np.array([x]), np.array([t]))[0, 0])


def psi_grid(xs, ts, params: AnalyticParams, modes: ModeSet | None = None) -> np.ndarray:
    if modes is None:
        modes = ModeSet(params)
    return modes.evaluate(xs, ts)


def initial_profile(xs, params: AnalyticParams) -> np.ndarray:
    arg = (np.asarray(xs) - params.x_p0) / params.a
    return params.beta_amp * np.exp(-arg * arg)


def born_density(xs, t: float, params: AnalyticParams, modes: ModeSet | None = None) -> np.ndarray:
    """|psi|^2 at time t, normalized to unit trapezoidal integral over xs."""
    xs = np.asarray(xs, dtype=float)
    values = psi_grid(xs, np.array([t]), params, modes=modes)[0]
    dens = np.abs(values) ** 2
    total = np.trapezoid(dens, xs)
    if total <= 0.0:
        raise DataError(f"all-zero field at t = {t}: cannot normalize density")
    return dens / total
