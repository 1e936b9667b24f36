"""Shared builders for admissible test states and surfaces."""

import numpy as np

from cvsheet.spectral import Grid1D, SpectralField1D, deriv
from cvsheet.geometry import SurfaceState, build_map
from cvsheet.fields import ElsasserState, div_curl_reconstruct


def band_noise(grid, kmax=6, seed=0, amp=1.0):
    """Random real field with Fourier support in modes 1..kmax."""
    rng = np.random.default_rng(seed)
    c = np.zeros(grid.n // 2 + 1, dtype=complex)
    c[1:kmax + 1] = rng.normal(size=kmax) + 1j * rng.normal(size=kmax)
    return amp * np.fft.irfft(c, n=grid.n) * grid.n / kmax ** 0.5


def surface_of(samples, grid, v=None):
    vv = np.zeros(grid.n) if v is None else v
    return SurfaceState(SpectralField1D(grid, samples), SpectralField1D(grid, vv))


def flat(n=64, L=2 * np.pi):
    g = Grid1D(n, L)
    return surface_of(np.zeros(n), g)


def make_state(surface, n2=33, amp=0.0, seed=0, flux=(0.0, 0.0, 0.0, 0.0)):
    """Admissible state: reconstruct all four fields from smooth vorticity."""
    g = surface.grid
    lo = build_map(surface, "lower", n2)
    up = build_map(surface, "upper", n2)
    rng = np.random.default_rng(seed)
    k0 = 2 * np.pi / g.length
    slope = surface.slope()
    v = surface.v.samples

    def vort(strip):
        y = strip.x2
        c = rng.normal(size=3) * amp
        return (c[0] * np.sin(k0 * g.points[None, :]) * np.cos(y)
                + c[1] * np.cos(2 * k0 * g.points[None, :]) * y
                + c[2] * np.sin(k0 * g.points[None, :] + 0.3) * y * y)

    def trace(sign):
        tr = v + sign * slope
        return SpectralField1D(g, tr - tr.mean())

    lam_p = div_curl_reconstruct(vort(lo), surface, "lower", trace(+1),
                                 mean_flux=flux[0], strip=lo)
    lam_m = div_curl_reconstruct(vort(lo), surface, "lower", trace(-1),
                                 mean_flux=flux[1], strip=lo)
    hat_p = div_curl_reconstruct(vort(up), surface, "upper", trace(+1),
                                 mean_flux=flux[2], strip=up)
    hat_m = div_curl_reconstruct(vort(up), surface, "upper", trace(-1),
                                 mean_flux=flux[3], strip=up)
    return ElsasserState(lam_p, lam_m, hat_p, hat_m, lo, up)
