"""Interface geometry for the two-layer channel.

The moving interface is the graph x2 = f(t, x1) inside the horizontal
channel |x2| <= 1 with rigid walls at x2 = -1 and x2 = +1.  This module
holds the surface state, reference-strip coordinate maps for the fluid
layers below and above the interface, the metric bookkeeping needed to
take physical derivatives on mapped grids, the near-surface tangential
lifting field, and the pointwise planar stability margin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Grid1D, SpectralField1D, deriv

JACOBIAN_FLOOR = 1e-6
DEFAULT_CLEARANCE = 0.2


# ---------------------------------------------------------------------------
# Chebyshev collocation utilities for the vertical direction


def cheb_nodes(n2: int, a: float, b: float) -> np.ndarray:
    """Gauss-Lobatto nodes on [a, b], ascending, endpoints included."""
    if n2 < 2:
        raise ValueError("need at least two vertical points")
    z = np.cos(np.pi * np.arange(n2 - 1, -1, -1) / (n2 - 1))
    return 0.5 * (a + b) + 0.5 * (b - a) * z


def cheb_diff(n2: int, a: float, b: float) -> np.ndarray:
    """First-derivative collocation matrix on the ascending nodes."""
    m = n2 - 1
    z = np.cos(np.pi * np.arange(m + 1) / m)  # descending standard order
    c = np.ones(m + 1)
    c[0] = c[m] = 2.0
    c *= (-1.0) ** np.arange(m + 1)
    dz = z[:, None] - z[None, :]
    d = np.outer(c, 1.0 / c) / (dz + np.eye(m + 1))
    d -= np.diag(d.sum(axis=1))
    d = d[::-1, ::-1]  # ascending node order
    return d * (2.0 / (b - a))


def cheb_weights(n2: int, a: float, b: float) -> np.ndarray:
    """Clenshaw-Curtis quadrature weights on [a, b], ascending node order."""
    m = n2 - 1
    theta = np.pi * np.arange(m + 1) / m
    w = np.zeros(m + 1)
    ii = np.arange(1, m)
    v = np.ones(m - 1)
    if m % 2 == 0:
        w[0] = w[m] = 1.0 / (m * m - 1)
        for k in range(1, m // 2):
            v -= 2.0 * np.cos(2 * k * theta[ii]) / (4 * k * k - 1)
        v -= np.cos(m * theta[ii]) / (m * m - 1)
    else:
        w[0] = w[m] = 1.0 / (m * m)
        for k in range(1, (m - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[ii]) / (4 * k * k - 1)
    w[ii] = 2.0 * v / m
    return w[::-1] * 0.5 * (b - a)


# ---------------------------------------------------------------------------
# Surface state


@dataclass(frozen=True)
class SurfaceState:
    """Interface height f and its time derivative v on a shared grid."""

    f: SpectralField1D
    v: SpectralField1D
    clearance: float = DEFAULT_CLEARANCE

    def __post_init__(self):
        if not 0.0 < self.clearance < 0.5:
            raise ValueError("clearance must lie in (0, 1/2)")
        if self.f.grid != self.v.grid:
            raise ValueError("f and v must share a grid")
        cap = 1.0 - self.clearance / 2.0
        amp = float(np.max(np.abs(self.f.samples)))
        if amp > cap:
            raise ValueError(
                f"interface amplitude {amp:.6g} exceeds wall clearance cap {cap:.6g}")

    @property
    def grid(self) -> Grid1D:
        return self.f.grid

    def slope(self) -> np.ndarray:
        return deriv(self.f.samples, self.grid)


def normal_vector(surface: SurfaceState) -> tuple[SpectralField1D, SpectralField1D]:
    """Outward (upward) non-unit normal N = (-f', 1) along the interface."""
    g = surface.grid
    return (SpectralField1D(g, -surface.slope()),
            SpectralField1D(g, np.ones(g.n)))


# ---------------------------------------------------------------------------
# Layer maps


@dataclass(frozen=True)
class MappedStrip:
    """Coordinate map from a reference strip onto one fluid layer.

    Reference coordinates are (y1, y2) with y1 on the periodic grid and
    y2 on Chebyshev nodes spanning [-1, 0] (lower layer) or [0, 1]
    (upper layer); y2 = 0 is always the interface side.  The map keeps
    x1 = y1 and stores the physical height x2(y1, y2) row-major with y2
    along axis 0.
    """

    which: str
    f_snapshot: SpectralField1D
    n2: int
    kind: str
    y2: np.ndarray
    x2: np.ndarray
    dvert: np.ndarray
    vweights: np.ndarray

    @property
    def grid(self) -> Grid1D:
        return self.f_snapshot.grid

    def d_y1(self, u: np.ndarray) -> np.ndarray:
        return deriv(u, self.grid)

    def d_y2(self, u: np.ndarray) -> np.ndarray:
        return self.dvert @ u


def _harmonic_profile(f: SpectralField1D, y2: np.ndarray, which: str) -> np.ndarray:
    # harmonic extension of f into the reference strip, zero on the wall side
    g = f.grid
    coeffs = f.coeffs
    k = g.wavenumbers
    if which == "lower":
        s = y2[:, None] + 1.0  # 0 at wall, 1 at interface
    else:
        s = 1.0 - y2[:, None]
    prof = np.empty((y2.size, k.size))
    prof[:, :1] = s
    # sinh(s k)/sinh(k) written with non-positive exponents only
    kk = k[None, 1:]
    prof[:, 1:] = np.exp(kk * (s - 1.0)) * (1.0 - np.exp(-2.0 * s * kk)) \
        / (1.0 - np.exp(-2.0 * kk))
    ext = coeffs[None, :] * prof
    return np.fft.irfft(ext, n=g.n, axis=-1)


def build_map(surface: SurfaceState, which: str, n2: int,
              kind: str = "vertical-stretch") -> MappedStrip:
    """Map the reference strip onto the layer below or above the interface."""
    if which not in ("lower", "upper"):
        raise ValueError("which must be 'lower' or 'upper'")
    if kind not in ("vertical-stretch", "harmonic"):
        raise ValueError("kind must be 'vertical-stretch' or 'harmonic'")
    cap = 1.0 - surface.clearance / 2.0
    if float(np.max(np.abs(surface.f.samples))) > cap:
        raise ValueError("degenerate layer: interface too close to a wall")

    a, b = (-1.0, 0.0) if which == "lower" else (0.0, 1.0)
    y2 = cheb_nodes(n2, a, b)
    dvert = cheb_diff(n2, a, b)
    vweights = cheb_weights(n2, a, b)
    f = surface.f.samples[None, :]

    if kind == "vertical-stretch":
        if which == "lower":
            x2 = -1.0 + (y2[:, None] + 1.0) * (1.0 + f)
        else:
            x2 = f + y2[:, None] * (1.0 - f)
    else:
        x2 = y2[:, None] + _harmonic_profile(surface.f, y2, which)
    # snap boundary rows: interface side carries f exactly, wall side the wall
    if which == "lower":
        x2[0, :] = -1.0
        x2[-1, :] = surface.f.samples
    else:
        x2[0, :] = surface.f.samples
        x2[-1, :] = 1.0

    strip = MappedStrip(which, surface.f, n2, kind, y2, x2, dvert, vweights)
    jac = dvert @ x2
    if float(np.min(np.abs(jac))) <= JACOBIAN_FLOOR:
        raise ValueError("coordinate map folds: Jacobian below floor")
    return strip


def map_velocity(strip: MappedStrip, v: SpectralField1D) -> np.ndarray:
    """Vertical node velocity dx2/dt at fixed reference coordinates.

    Both map kinds are linear in the interface height, so the node
    velocity under an interface velocity v is the map applied to v.
    Steppers add (node velocity) * d2(field) when integrating grid-held
    fields, otherwise the moving mesh masquerades as physical transport.
    """
    if strip.kind == "vertical-stretch":
        if strip.which == "lower":
            return (strip.y2[:, None] + 1.0) * v.samples[None, :]
        return (1.0 - strip.y2[:, None]) * v.samples[None, :]
    return _harmonic_profile(v, strip.y2, strip.which)


# ---------------------------------------------------------------------------
# Metric terms and physical derivatives


@dataclass(frozen=True)
class MetricTerms:
    """Chain-rule data for one mapped strip.

    inverse_metric[i, j] holds dy_j/dx_i on the reference grid, so
    d/dx1 = d/dy1 + inverse_metric[0, 1] * d/dy2 and
    d/dx2 = inverse_metric[1, 1] * d/dy2.  The owning strip is kept so
    downstream operators can reach its differentiation stencils.
    """

    jacobian: np.ndarray
    inverse_metric: np.ndarray
    surface_measure: np.ndarray
    strip: MappedStrip


def metric_terms(strip: MappedStrip) -> MetricTerms:
    jac = strip.d_y2(strip.x2)
    if float(np.min(np.abs(jac))) <= JACOBIAN_FLOOR:
        raise ValueError("degenerate map: Jacobian below floor")
    x2_y1 = strip.d_y1(strip.x2)
    n2, n1 = strip.x2.shape
    im = np.zeros((2, 2, n2, n1))
    im[0, 0] = 1.0
    im[0, 1] = -x2_y1 / jac
    im[1, 1] = 1.0 / jac
    slope = deriv(strip.f_snapshot.samples, strip.grid)
    return MetricTerms(jac, im, np.sqrt(1.0 + slope * slope), strip)


def dx1(u: np.ndarray, strip: MappedStrip, metric: MetricTerms) -> np.ndarray:
    """Physical horizontal derivative of a scalar sampled on the strip."""
    return strip.d_y1(u) + metric.inverse_metric[0, 1] * strip.d_y2(u)


def dx2(u: np.ndarray, strip: MappedStrip, metric: MetricTerms) -> np.ndarray:
    """Physical vertical derivative of a scalar sampled on the strip."""
    return metric.inverse_metric[1, 1] * strip.d_y2(u)


def laplacian_coeffs(strip: MappedStrip, metric: MetricTerms):
    """Coefficients (B, C, D) of the mapped Laplacian.

    In reference coordinates the physical Laplacian reads
    u_y1y1 + B u_y1y2 + C u_y2y2 + D u_y2 with B = 2a, C = a^2 + b^2,
    D = a_y1 + a a_y2 + b b_y2, where a = dy2/dx1 and b = dy2/dx2.
    """
    a = metric.inverse_metric[0, 1]
    b = metric.inverse_metric[1, 1]
    cb = 2.0 * a
    cc = a * a + b * b
    cd = strip.d_y1(a) + a * strip.d_y2(a) + b * strip.d_y2(b)
    return cb, cc, cd


# ---------------------------------------------------------------------------
# Near-surface cutoff and tangential lift


def zeta_cutoff(x2: np.ndarray, clearance: float = DEFAULT_CLEARANCE) -> np.ndarray:
    """Vertical bump: 1 on |x2| <= 1 - c0, 0 on |x2| >= 1 - c0/2, quintic ramp."""
    lo = 1.0 - clearance
    hi = 1.0 - clearance / 2.0
    t = np.clip((np.abs(x2) - lo) / (hi - lo), 0.0, 1.0)
    return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def tangential_lift(surface: SurfaceState, strip: MappedStrip) -> np.ndarray:
    """Lift of the interface slope into the layer.

    Returns Phi on the mapped grid: the decaying horizontal-smoothing
    extension of f' evaluated at the physical depth below (lower) or
    above (upper) the interface, shaped by the wall cutoff.  Its trace
    on y2 = 0 is f' and it vanishes near the fixed walls, so
    d/dx1 + Phi d/dx2 differentiates along curves parallel to the
    interface near the interface.
    """
    g = surface.grid
    df = surface.slope()
    xi = 2.0 * np.pi * np.fft.fftfreq(g.n, d=g.spacing)
    # amplitudes for the physical phases exp(i xi x), x = points[0] + j dx
    coeffs = np.fft.fft(df) / g.n * np.exp(-1j * xi * g.points[0])
    if strip.which == "lower":
        depth = surface.f.samples[None, :] - strip.x2
    else:
        depth = strip.x2 - surface.f.samples[None, :]
    depth = np.maximum(depth, 0.0)  # roundoff at the interface row
    phase = coeffs[None, :] * np.exp(1j * xi[None, :] * g.points[:, None])
    decay = np.exp(-depth[:, :, None] * np.abs(xi)[None, None, :])
    psi = np.einsum("jk,ijk->ij", phase, decay).real
    return zeta_cutoff(strip.x2, surface.clearance) * psi


# ---------------------------------------------------------------------------
# Planar stability margin


def stability_margin(traces) -> SpectralField1D:
    """Pointwise margin 2(|h|^2 + |h_hat|^2) - |[u]|^2 along the interface.

    Velocity and field are reconstructed from the first components of
    the four Elsasser trace perturbations (attributes lam_plus1,
    lam_minus1, hat_plus1, hat_minus1 of the bundle): the horizontal field is
    1 + (plus - minus)/2 per side and the velocity jump is the
    difference of (plus + minus)/2 across the interface.  Positive
    margin means the planar stability condition holds.
    """
    lp, lm = traces.lam_plus1, traces.lam_minus1
    hp, hm = traces.hat_plus1, traces.hat_minus1
    grid = lp.grid
    h1 = 1.0 + 0.5 * (lp.samples - lm.samples)
    h1_hat = 1.0 + 0.5 * (hp.samples - hm.samples)
    jump = 0.5 * (lp.samples + lm.samples) - 0.5 * (hp.samples + hm.samples)
    return SpectralField1D(grid, 2.0 * (h1 * h1 + h1_hat * h1_hat) - jump * jump)
