"""Elsasser field containers and vector calculus on mapped strips.

Fields live on the reference rectangles of the two layer maps as
arrays shaped (2, n2, n1) for vectors and (n2, n1) for scalars, with
the vertical index outermost.  Divergence-free velocity-type fields
are reconstructed from scalar vorticity and interface/wall trace data
through a stream function, which reduces the two-dimensional div-curl
system to one Poisson solve per layer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spectral import Grid1D, SpectralField1D, deriv
from .geometry import (
    MappedStrip, MetricTerms, SurfaceState, build_map, dx1, dx2, metric_terms,
)
from .elliptic import StripProblem, solve_mixed_bvp

TRACE_MEAN_TOL = 1e-10


def _check_vector(v: np.ndarray, strip: MappedStrip, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (2, strip.n2, strip.grid.n):
        raise ValueError(f"{name}: expected shape (2, {strip.n2}, {strip.grid.n})")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name}: non-finite samples")
    return v


@dataclass(frozen=True)
class ElsasserState:
    """The four Elsasser perturbation fields on their strips."""

    lam_plus: np.ndarray
    lam_minus: np.ndarray
    hat_plus: np.ndarray
    hat_minus: np.ndarray
    lower: MappedStrip
    upper: MappedStrip
    time: float = 0.0

    def __post_init__(self):
        for name in ("lam_plus", "lam_minus"):
            object.__setattr__(self, name,
                               _check_vector(getattr(self, name), self.lower, name))
        for name in ("hat_plus", "hat_minus"):
            object.__setattr__(self, name,
                               _check_vector(getattr(self, name), self.upper, name))


@dataclass(frozen=True)
class VorticityState:
    """Scalar curls of the four Elsasser fields."""

    omega_plus: np.ndarray
    omega_minus: np.ndarray
    hat_plus: np.ndarray
    hat_minus: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        for name in ("omega_plus", "omega_minus", "hat_plus", "hat_minus"):
            a = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name}: non-finite samples")
            object.__setattr__(self, name, a)


# ---------------------------------------------------------------------------
# Elsasser / primitive conversions


def elsasser_from_primitive(u: np.ndarray, h: np.ndarray):
    """(u, h) -> (lam_plus, lam_minus) with the background field removed."""
    u = np.asarray(u, dtype=float)
    h = np.asarray(h, dtype=float)
    if u.shape != h.shape:
        raise ValueError("u and h shapes differ")
    lam_p = u + h
    lam_m = u - h
    lam_p[0] -= 1.0
    lam_m[0] += 1.0
    return lam_p, lam_m


def primitive_from_elsasser(lam_plus: np.ndarray, lam_minus: np.ndarray):
    """Inverse conversion: perturbation fields back to (u, h)."""
    zp = np.array(lam_plus, dtype=float)
    zm = np.array(lam_minus, dtype=float)
    zp[0] += 1.0
    zm[0] -= 1.0
    return 0.5 * (zp + zm), 0.5 * (zp - zm)


# ---------------------------------------------------------------------------
# Differential operators through the map


def divergence(field: np.ndarray, metric: MetricTerms) -> np.ndarray:
    strip = metric.strip
    return dx1(field[0], strip, metric) + dx2(field[1], strip, metric)


def curl(field: np.ndarray, metric: MetricTerms) -> np.ndarray:
    """Scalar curl (-d2, d1) . field in physical coordinates."""
    strip = metric.strip
    return dx1(field[1], strip, metric) - dx2(field[0], strip, metric)


def restrict_trace(field: np.ndarray, strip: MappedStrip):
    """Values along the interface grid line (no interpolation needed)."""
    row = -1 if strip.which == "lower" else 0
    g = strip.grid
    if field.ndim == 3:
        return tuple(SpectralField1D(g, comp[row].copy()) for comp in field)
    return SpectralField1D(g, field[row].copy())


# ---------------------------------------------------------------------------
# Div-curl reconstruction via a stream function


def _antiderivative(samples: np.ndarray, grid: Grid1D) -> np.ndarray:
    c = np.fft.rfft(samples)
    k = grid.wavenumbers.copy()
    k[0] = 1.0
    out = c / (1j * k)
    out[0] = 0.0
    return np.fft.irfft(out, n=grid.n)


def div_curl_reconstruct(omega: np.ndarray, surface: SurfaceState, side: str,
                         normal_trace: SpectralField1D, mean_flux: float = 0.0,
                         strip: MappedStrip | None = None,
                         tol: float = 1e-9) -> np.ndarray:
    """Divergence-free field with prescribed curl and boundary fluxes.

    Solves curl v = omega, div v = 0 with v . N = normal_trace on the
    interface and no penetration through the wall, via the stream
    function psi: Laplace(psi) = omega, psi gauged to zero on the wall,
    and psi on the interface the x1-antiderivative of normal_trace.
    The periodic window leaves the layer-mean horizontal flux free;
    mean_flux pins it (flux = mean over x1 of the column integral of
    v1).
    """
    omega = np.asarray(omega, dtype=float)
    if strip is None:
        strip = build_map(surface, side, omega.shape[0])
    metric = metric_terms(strip)
    g = surface.grid
    mean = abs(float(np.mean(normal_trace.samples)))
    if mean > TRACE_MEAN_TOL:
        raise ValueError(
            f"normal trace mean {mean:.3e} breaks flux compatibility")
    psi_surf = _antiderivative(normal_trace.samples, g)
    psi_surf = psi_surf + (-mean_flux if side == "lower" else mean_flux)
    psi = solve_mixed_bvp(StripProblem(
        strip, metric, omega, ("dirichlet", np.zeros(g.n)),
        ("dirichlet", psi_surf), tol))
    return np.stack([-dx2(psi, strip, metric), dx1(psi, strip, metric)])


# ---------------------------------------------------------------------------
# Invariant reporting


def compatibility_check(state: ElsasserState, surface: SurfaceState) -> dict:
    """Max-norm residuals of the state invariants (reporting only)."""
    mlo = metric_terms(state.lower)
    mup = metric_terms(state.upper)
    slope = surface.slope()
    v = surface.v.samples
    report = {}
    report["divergence"] = max(
        float(np.max(np.abs(divergence(state.lam_plus, mlo)))),
        float(np.max(np.abs(divergence(state.lam_minus, mlo)))),
        float(np.max(np.abs(divergence(state.hat_plus, mup)))),
        float(np.max(np.abs(divergence(state.hat_minus, mup)))))
    report["wall"] = max(
        float(np.max(np.abs(state.lam_plus[1][0]))),
        float(np.max(np.abs(state.lam_minus[1][0]))),
        float(np.max(np.abs(state.hat_plus[1][-1]))),
        float(np.max(np.abs(state.hat_minus[1][-1]))))

    def kin(vec, strip, sign):
        n_dot = restrict_trace(vec[1], strip).samples \
            - slope * restrict_trace(vec[0], strip).samples
        return float(np.max(np.abs(n_dot - (v + sign * slope))))

    report["kinematic_plus"] = kin(state.lam_plus, state.lower, +1.0)
    report["kinematic_minus"] = kin(state.lam_minus, state.lower, -1.0)
    report["kinematic_hat_plus"] = kin(state.hat_plus, state.upper, +1.0)
    report["kinematic_hat_minus"] = kin(state.hat_minus, state.upper, -1.0)
    return report


# ---------------------------------------------------------------------------
# Snapshot format


def write_snapshot(path, data: np.ndarray, name: str, map_kind: str,
                   time: float) -> None:
    """Flat little-endian float64 dump, vertical index outermost."""
    path = Path(path)
    arr = np.ascontiguousarray(np.asarray(data, dtype="<f8"))
    path.write_bytes(arr.tobytes())
    sidecar = {"shape": list(arr.shape), "map_kind": map_kind,
               "time": time, "field": name}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=1))


def read_snapshot(path):
    """Returns (data, header) for a snapshot written by write_snapshot."""
    path = Path(path)
    header = json.loads(Path(str(path) + ".json").read_text())
    data = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(header["shape"])
    return data.copy(), header
