"""1D Fourier operator kit on a periodic window.

The line is truncated to a periodic window of length L with decaying data.
This module owns the horizontal transform conventions used everywhere else:
grids, fractional derivatives realized as Fourier multipliers, half-space
Poisson extension, space-time decay weights, ghost-weight factors, and the
dealiased product helper for quadratic nonlinearities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

MU_LO, MU_HI = 0.5, 0.6

__all__ = [
    "Grid1D", "SpectralField1D", "WeightSpec",
    "fractional_derivative", "poisson_extension", "weight_samples",
    "ghost_factor", "mass_constant", "commutator_ratio",
    "mul_dealias", "deriv", "spectral_shift", "support_edge_fraction",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid: n points x = -L/2 + j*L/n, j = 0..n-1."""

    n: int
    length: float = 64.0

    def __post_init__(self):
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not self.length > 0:
            raise ValueError("window length must be positive")

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def points(self) -> np.ndarray:
        return -0.5 * self.length + self.spacing * np.arange(self.n)

    @property
    def wavenumbers(self) -> np.ndarray:
        """rfft wavenumbers xi_m = 2*pi*m/L, m = 0..n/2."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.spacing)


@dataclass
class SpectralField1D:
    """Real samples on a Grid1D with lazily cached rfft coefficients."""

    grid: Grid1D
    samples: np.ndarray
    _coeffs: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.shape != (self.grid.n,):
            raise ValueError("samples shape does not match grid")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("non-finite samples")

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = np.fft.rfft(self.samples)
        return self._coeffs

    @classmethod
    def from_coeffs(cls, grid: Grid1D, coeffs: np.ndarray) -> "SpectralField1D":
        s = np.fft.irfft(coeffs, n=grid.n)
        f = cls(grid, s)
        f._coeffs = np.asarray(coeffs, dtype=complex)
        return f

    def norm2(self) -> float:
        """Discrete L2 norm over the window."""
        return float(np.sqrt(self.grid.spacing * np.sum(self.samples ** 2)))


def _apply_multiplier(g: SpectralField1D, mult: np.ndarray) -> SpectralField1D:
    return SpectralField1D.from_coeffs(g.grid, g.coeffs * mult)


def fractional_derivative(g: SpectralField1D, s: float) -> SpectralField1D:
    """Inhomogeneous fractional derivative of order s: multiplier (1+xi^2)^(s/2).

    Negative s gives the smoothing (potential) direction. Caller keeps the top
    third of the spectrum empty when s > 0; the multiplier itself is exact on
    the resolved band.
    """
    if not np.all(np.isfinite(g.samples)):
        raise ValueError("non-finite input")
    xi = g.grid.wavenumbers
    return _apply_multiplier(g, (1.0 + xi * xi) ** (0.5 * s))


def poisson_extension(phi: SpectralField1D, depth: float) -> SpectralField1D:
    """Harmonic (half-space Poisson) extension evaluated at distance depth.

    Multiplier exp(-depth*|xi|); depth 0 is the identity.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    xi = phi.grid.wavenumbers
    return _apply_multiplier(phi, np.exp(-depth * np.abs(xi)))


def deriv(samples: np.ndarray, grid: Grid1D, order: int = 1) -> np.ndarray:
    """Spectral x1-derivative along the last axis (works on nD arrays)."""
    xi = grid.wavenumbers
    c = np.fft.rfft(samples, axis=-1) * (1j * xi) ** order
    return np.fft.irfft(c, n=grid.n, axis=-1)


def spectral_shift(samples: np.ndarray, grid: Grid1D, delta: float) -> np.ndarray:
    """Exact translation x -> x - delta of band-limited periodic data."""
    xi = grid.wavenumbers
    c = np.fft.rfft(samples, axis=-1) * np.exp(-1j * xi * delta)
    return np.fft.irfft(c, n=grid.n, axis=-1)


def mul_dealias(a: np.ndarray, b: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Product with 2/3-rule zero padding along the last (periodic) axis."""
    n = grid.n
    m = 3 * n // 2
    fa = np.fft.rfft(a, axis=-1)
    fb = np.fft.rfft(b, axis=-1)
    pa = np.zeros(fa.shape[:-1] + (m // 2 + 1,), dtype=complex)
    pb = np.zeros_like(pa)
    pa[..., : n // 2 + 1] = fa
    pb[..., : n // 2 + 1] = fb
    prod = np.fft.rfft(np.fft.irfft(pa, n=m, axis=-1) * np.fft.irfft(pb, n=m, axis=-1), axis=-1)
    # two upsample factors (m/n each) and one downsample (n/m) leave m/n
    return np.fft.irfft(prod[..., : n // 2 + 1] * (m / n), n=n, axis=-1)


@dataclass(frozen=True)
class WeightSpec:
    """Decay-weight parameters: exponent mu in (1/2, 3/5], time t, trust window."""

    mu: float
    t: float = 0.0
    window: float = 32.0

    def __post_init__(self):
        if not (MU_LO < self.mu <= MU_HI):
            raise ValueError(
                f"mu = {self.mu} outside the admissible range ({MU_LO}, {MU_HI}]")
        if self.t < 0:
            raise ValueError("t must be >= 0")


def _bracket(a: np.ndarray) -> np.ndarray:
    """Japanese bracket <a> = (1 + a^2)^(1/2)."""
    return np.sqrt(1.0 + a * a)


def weight_samples(grid: Grid1D, spec: WeightSpec, sign: int, power: float) -> np.ndarray:
    """<x1 +/- t>^power at the grid points (sign = +1 or -1).

    Weights are trusted only while the caller's field stays inside
    [-window, window]; see support_edge_fraction for the monitor.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    w = grid.points + sign * spec.t
    return _bracket(w) ** power


def support_edge_fraction(samples: np.ndarray, grid: Grid1D, edge: float = 0.05) -> float:
    """Fraction of |field| mass within `edge`*L of the window boundary.

    The support monitor flags a field when this exceeds 1e-8: the window
    truncation (and hence the weight calculus) is then no longer trustworthy.
    """
    x = grid.points
    m = np.abs(np.asarray(samples))
    while m.ndim > 1:
        m = m.sum(axis=0)
    total = m.sum()
    if total == 0.0:
        return 0.0
    near = np.abs(x) >= (0.5 - edge) * grid.length
    return float(m[near].sum() / total)


# -- ghost weights ------------------------------------------------------------

@lru_cache(maxsize=8)
def _q_spline(mu: float):
    """Cumulative antiderivative table for q(theta) = int_0^theta <tau>^(-2mu).

    Log-spaced nodes with cubic interpolation; q is odd, so only theta >= 0 is
    tabulated. Max interpolation error checked below 1e-9 in the tests.
    """
    nodes = np.concatenate(([0.0], np.logspace(-4, 4, 1600)))
    integrand = lambda tau: (1.0 + tau * tau) ** (-mu)
    incr = [quad(integrand, nodes[i], nodes[i + 1], epsabs=1e-13, epsrel=1e-12)[0]
            for i in range(len(nodes) - 1)]
    qvals = np.concatenate(([0.0], np.cumsum(incr)))
    return CubicSpline(nodes, qvals), nodes[-1], qvals[-1]


def q_of(theta: np.ndarray, mu: float) -> np.ndarray:
    """Bounded ghost phase q(theta); odd in theta, |q| <= Q_inf < inf for mu > 1/2."""
    spline, tmax, qmax = _q_spline(round(float(mu), 12))
    a = np.abs(theta)
    out = np.where(a <= tmax, spline(np.minimum(a, tmax)), qmax)
    return np.sign(theta) * out


def ghost_factor(grid: Grid1D, spec: WeightSpec, sign: int) -> np.ndarray:
    """Ghost multiplier samples: e^{q(w-)} for sign +, e^{q(-w+)} for sign -."""
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    x = grid.points
    theta = (x - spec.t) if sign == +1 else -(x + spec.t)
    return np.exp(q_of(theta, spec.mu))


def mass_constant(spec: WeightSpec) -> float:
    """M = int_R <z>^(-2mu) dz by adaptive quadrature (relative error <= 1e-8)."""
    mu = spec.mu
    if mu <= 0.5:
        raise ValueError("mass integral diverges for mu <= 1/2")
    val, err = quad(lambda z: (1.0 + z * z) ** (-mu), -np.inf, np.inf,
                    epsabs=0.0, epsrel=1e-10)
    return float(val)


def commutator_ratio(g: SpectralField1D, s: float, spec: WeightSpec,
                     sign: int, power: float) -> float:
    """||[<d1>^s, <w+/->^power] g||_2 / ||<w+/->^power g||_2.

    Property tests assert this stays bounded under grid refinement and in time.
    """
    if not (0.0 < s < 1.0):
        raise ValueError("s must lie in (0, 1)")
    w = weight_samples(g.grid, spec, sign, power)
    wg = SpectralField1D(g.grid, w * g.samples)
    denom = wg.norm2()
    if denom == 0.0:
        raise ValueError("zero denominator: weighted field vanishes")
    lhs = fractional_derivative(wg, s).samples
    rhs = w * fractional_derivative(g, s).samples
    num = float(np.sqrt(g.grid.spacing * np.sum((lhs - rhs) ** 2)))
    return num / denom
