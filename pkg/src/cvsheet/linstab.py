"""Planar linear stability of the two-layer current-vortex sheet.

For a flat interface separating two layers with constant tangential
velocities and magnetic fields, each normal mode couples the interface
displacement to one harmonic potential per layer.  Eliminating the
potentials through the flat-layer Dirichlet-to-Neumann symbols leaves a
quadratic pencil in the mode frequency; its roots decide stability.
The pencil is assembled from the same flat-strip symbols the nonlinear
solver uses for preconditioning, and solved as a companion-matrix
eigenvalue problem rather than through a quoted closed form.

``matrix_free_check`` closes the loop with the nonlinear code: it
applies the full simulator right-hand side to a small single-mode
perturbation of a planar background and compares the interface
acceleration against the action of the planar operator.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dataclass_fields, replace

import numpy as np

from .evolution import SimState, rhs_full

__all__ = [
    "PlanarParams",
    "ModeResult",
    "dn_symbol",
    "dispersion_roots",
    "neutral_threshold",
    "matrix_free_check",
    "sweep_parameter",
    "write_sweep_csv",
]


def dn_symbol(k: float, depth: float) -> float:
    """Flat-layer Dirichlet-to-Neumann symbol |k| tanh(|k| depth).

    Symbol of the map taking interface Dirichlet data of a harmonic
    function to its outward conormal derivative, for a layer of the
    given depth closed by a rigid wall.
    """
    return abs(k) * np.tanh(abs(k) * depth)


@dataclass(frozen=True)
class PlanarParams:
    """Constant two-layer background for the planar eigenproblem.

    Velocities and magnetic fields are the tangential components; the
    fields are totals (the quiescent reference background has
    ``b_lower = b_upper = 1``).  Depths are the layer heights.
    """

    u_lower: float
    u_upper: float
    b_lower: float
    b_upper: float
    depth_lower: float = 1.0
    depth_upper: float = 1.0
    k: float = 1.0

    def __post_init__(self):
        if not (self.depth_lower > 0 and self.depth_upper > 0):
            raise ValueError("layer depths must be positive")
        if self.k == 0:
            raise ValueError("wavenumber k must be nonzero")


PARAM_FIELDS = tuple(f.name for f in dataclass_fields(PlanarParams))


@dataclass(frozen=True)
class ModeResult:
    """Frequencies and amplitudes of one planar mode.

    ``frequencies`` holds both roots sorted by imaginary part, then
    real part, so a growing root always comes second.  ``eigenvectors``
    has one row per root with columns ``(f, phi_lower, phi_upper)`` —
    the interface displacement (normalized to 1) and the two potential
    amplitudes at the interface.
    """

    frequencies: tuple
    growth_rate: float
    eigenvectors: np.ndarray

    def __post_init__(self):
        if len(self.frequencies) != 2:
            raise ValueError("frequencies must hold the two pencil roots")
        expected = max(w.imag for w in self.frequencies)
        if abs(self.growth_rate - expected) > 1e-14 * max(1.0, abs(expected)):
            raise ValueError(
                "growth_rate must be the largest imaginary part")


def _pencil(params: PlanarParams):
    """Monic-quadratic data of the per-mode frequency pencil.

    Each layer contributes ``[(w - k u)^2 - k^2 b^2] / T`` to the
    pressure balance at the interface, with T its flat DN symbol;
    collecting powers of w gives the quadratic ``a w^2 + b w + c``.
    """
    k = params.k
    sig_l = 1.0 / dn_symbol(k, params.depth_lower)
    sig_u = 1.0 / dn_symbol(k, params.depth_upper)
    a = sig_l + sig_u
    b = -2.0 * k * (sig_l * params.u_lower + sig_u * params.u_upper)
    c = k * k * (sig_l * (params.u_lower ** 2 - params.b_lower ** 2)
                 + sig_u * (params.u_upper ** 2 - params.b_upper ** 2))
    return a, b, c


def dispersion_roots(params: PlanarParams) -> ModeResult:
    """Eigen-solve of the per-mode pencil for one planar background."""
    a, b, c = _pencil(params)
    companion = np.array([[0.0, -c / a], [1.0, -b / a]])
    roots = sorted(np.linalg.eigvals(companion),
                   key=lambda w: (w.imag, w.real))
    freqs = (complex(roots[0]), complex(roots[1]))
    growth = max(w.imag for w in freqs)
    k = params.k
    t_l = dn_symbol(k, params.depth_lower)
    t_u = dn_symbol(k, params.depth_upper)
    vecs = np.empty((2, 3), dtype=complex)
    for i, w in enumerate(freqs):
        vecs[i] = (1.0,
                   -1j * (w - k * params.u_lower) / t_l,
                   1j * (w - k * params.u_upper) / t_u)
    return ModeResult(freqs, growth, vecs)


def neutral_threshold(params: PlanarParams, sweep: str, lo: float,
                      hi: float, tol: float = 1e-10) -> float:
    """Bisect one parameter to the edge of the stable region.

    ``sweep`` names the PlanarParams field to vary; the bracket
    ``[lo, hi]`` must contain exactly one change between stable
    (growth within tol of zero) and unstable.  Returns the swept value
    on the stable side of the final bracket, where the growth rate is
    at most tol.
    """
    if sweep not in PARAM_FIELDS:
        raise ValueError(f"unknown parameter {sweep!r}")

    def stable(x: float) -> bool:
        probe = replace(params, **{sweep: float(x)})
        return dispersion_roots(probe).growth_rate <= tol

    lo, hi = float(lo), float(hi)
    s_lo, s_hi = stable(lo), stable(hi)
    if s_lo == s_hi:
        raise ValueError(
            "no stability change inside the bracket; cannot bisect")
    scale = max(1.0, abs(lo), abs(hi))
    while hi - lo > 1e-14 * scale:
        mid = 0.5 * (lo + hi)
        if stable(mid) == s_lo:
            lo = mid
        else:
            hi = mid
    return lo if s_lo else hi


def _background_from_fluxes(fluxes) -> tuple:
    """Recover (u_lower, u_upper, b_lower, b_upper) from layer means.

    The stored fluxes are the horizontal means of the four combined
    fields u ± (b - 1) per layer, so velocity is the half-sum and the
    field deviation from the unit background is the half-difference.
    """
    fpl, fml, fpu, fmu = fluxes
    u_lower = 0.5 * (fpl + fml)
    u_upper = 0.5 * (fpu + fmu)
    b_lower = 1.0 + 0.5 * (fpl - fml)
    b_upper = 1.0 + 0.5 * (fpu - fmu)
    return u_lower, u_upper, b_lower, b_upper


def matrix_free_check(state: SimState, rhs=rhs_full,
                      mode: int | None = None) -> float:
    """Relative deviation of the simulator rhs from the planar operator.

    ``state`` should be a small perturbation of a planar background
    (flat-mean interface, zero curls); the background speeds and fields
    are recovered from its stored layer means, and the layers have unit
    depth.  The interface acceleration produced by ``rhs`` is compared
    against the planar pencil acting on the perturbation's dominant
    Fourier mode (or ``mode`` if given).  The quadratic remainder makes
    the deviation first order in the perturbation amplitude.
    """
    g = state.grid
    f_hat = np.fft.rfft(state.surface.f.samples) / g.n
    v_hat = np.fft.rfft(state.surface.v.samples) / g.n
    if mode is None:
        mode = int(np.argmax(np.abs(f_hat[1:]))) + 1
    if not 1 <= mode < f_hat.size:
        raise ValueError("mode must name a resolved nonzero wavenumber")
    k = g.wavenumbers[mode]
    u_l, u_u, b_l, b_u = _background_from_fluxes(state.fluxes)
    sig_l = 1.0 / dn_symbol(k, 1.0)
    sig_u = 1.0 / dn_symbol(k, 1.0)
    predicted = -(2j * k * (sig_l * u_l + sig_u * u_u) * v_hat[mode]
                  + k * k * (sig_l * (b_l ** 2 - u_l ** 2)
                             + sig_u * (b_u ** 2 - u_u ** 2))
                  * f_hat[mode]) / (sig_l + sig_u)
    measured = np.fft.rfft(rhs(state).v_dot)[mode] / g.n
    scale = max(abs(predicted), np.finfo(float).tiny)
    return float(abs(measured - predicted) / scale)


def sweep_parameter(params: PlanarParams, field: str, values) -> list:
    """Dispersion results along one parameter axis.

    Returns ``(params, result)`` pairs, one per swept value.
    """
    if field not in PARAM_FIELDS:
        raise ValueError(f"unknown parameter {field!r}")
    out = []
    for x in values:
        p = replace(params, **{field: float(x)})
        out.append((p, dispersion_roots(p)))
    return out


SWEEP_HEADER = ("k", "u_lower", "u_upper", "b_lower", "b_upper",
                "depth_lower", "depth_upper", "re_omega_1", "im_omega_1",
                "re_omega_2", "im_omega_2", "growth_rate")


def write_sweep_csv(rows, path) -> None:
    """Write (params, result) pairs as CSV with full-precision reals."""
    lines = [",".join(SWEEP_HEADER)]
    for params, result in rows:
        w1, w2 = result.frequencies
        vals = (params.k, params.u_lower, params.u_upper, params.b_lower,
                params.b_upper, params.depth_lower, params.depth_upper,
                w1.real, w1.imag, w2.real, w2.imag, result.growth_rate)
        lines.append(",".join(format(v, ".17g") for v in vals))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
