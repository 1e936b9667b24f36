"""Canonical initial states for runs, validation, and benchmarks.

Every preset builds a fully consistent simulation state on the periodic
window (length 64 by default, matching the trusted weight half-width of
32).  Background velocities and magnetic fields enter through the layer
means of the two combined families, u ± (b − 1): the quiescent reference
background has b = 1 and zero velocity, i.e. all four means vanish.

The shear presets seed interface mode 4 with the growing normal-mode
shape of the unmagnetized problem, so the kh run grows cleanly like
exp(sigma t) from the start and the alfven run carries the identical
initial data with the background field switched back on.  Their default
horizontal resolution is deliberately coarse: with no field every mode
grows at its own linear rate, so the largest resolved wavenumber sets
how fast solver-level noise amplifies, and keeping it small preserves a
long clean window for the seeded mode.
"""

from __future__ import annotations

import numpy as np

from .evolution import SimState, make_sim_state
from .fields import VorticityState
from .geometry import SurfaceState, build_map
from .linstab import PlanarParams, dispersion_roots
from .spectral import Grid1D, SpectralField1D, deriv

__all__ = ["PRESETS", "build_preset", "preset_defaults", "shear_fluxes"]

LENGTH_DEFAULT = 64.0


def shear_fluxes(jump: float, b: float) -> tuple:
    """Layer means for a symmetric velocity jump under field strength b."""
    u_lower, u_upper = -0.5 * jump, 0.5 * jump
    return (u_lower + b - 1.0, u_lower - b + 1.0,
            u_upper + b - 1.0, u_upper - b + 1.0)


def _zero_vorticity(n2: int, n: int) -> VorticityState:
    z = np.zeros((n2, n))
    return VorticityState(z, z.copy(), z.copy(), z.copy())


def _surface(grid: Grid1D, f: np.ndarray, v: np.ndarray) -> SurfaceState:
    return SurfaceState(SpectralField1D(grid, f), SpectralField1D(grid, v))


def steady(n1: int = 128, n2: int = 33, length: float = LENGTH_DEFAULT,
           tol: float = 1e-9) -> SimState:
    """Exact background: flat interface, zero fields, unit magnetic field."""
    g = Grid1D(n1, length)
    zero = np.zeros(n1)
    return make_sim_state(_surface(g, zero, zero.copy()),
                          _zero_vorticity(n2, n1), n2=n2, tol=tol)


def linear_wave(n1: int = 64, n2: int = 17, length: float = LENGTH_DEFAULT,
                amplitude: float = 1e-3, mode: int = 1,
                tol: float = 1e-9) -> SimState:
    """Small single-mode interface displacement on the quiescent background.

    The two neutral oscillations it excites have frequencies ±k, so the
    displacement evolves as a standing wave cos(k x1) cos(k t) in the
    linear regime.
    """
    g = Grid1D(n1, length)
    k = 2.0 * np.pi * mode / length
    f = amplitude * np.cos(k * g.points)
    return make_sim_state(_surface(g, f, np.zeros(n1)),
                          _zero_vorticity(n2, n1), n2=n2, tol=tol)


def alfven_packet(n1: int = 256, n2: int = 33,
                  length: float = LENGTH_DEFAULT, amplitude: float = 0.3,
                  width: float = 2.0, f_amp: float = 0.05,
                  f_width: float = 4.0, tol: float = 1e-9) -> SimState:
    """One-sided packet: only the plus family is excited, f rides along.

    Minus-family data vanishes identically: its vorticity and layer
    means are zero, and choosing v = d/dx1 f makes the minus kinematic
    trace v - f' zero too, so the recovered minus fields are exactly
    zero.  Quadratic interactions then vanish, the pressure stays
    constant, and the whole state (surface bump and plus packet alike)
    translates rigidly at the background speed toward negative x1.
    """
    g = Grid1D(n1, length)
    f = f_amp * np.exp(-((g.points / f_width) ** 2))
    surf = _surface(g, f, deriv(f, g))
    # interior bump in the reference vertical coordinate of the strip
    y2 = build_map(surf, "lower", n2).y2
    shape = np.cos(np.pi * (y2 + 0.5))[:, None]
    omega = amplitude * np.exp(-((g.points / width) ** 2))[None, :] * shape
    zero2 = np.zeros((n2, n1))
    vort = VorticityState(omega, zero2, zero2.copy(), zero2.copy())
    return make_sim_state(surf, vort, n2=n2, tol=tol)


SHEAR_JUMP = 0.4
SHEAR_EPS = 1e-4
SHEAR_MODE = 4


def _shear_state(b: float, n1: int, n2: int, length: float, eps: float,
                 mode: int, jump: float, tol: float) -> SimState:
    g = Grid1D(n1, length)
    k = 2.0 * np.pi * mode / length
    sigma = dispersion_roots(
        PlanarParams(-0.5 * jump, 0.5 * jump, 0.0, 0.0, k=k)).growth_rate
    f = eps * np.cos(k * g.points)
    v = sigma * f
    return make_sim_state(_surface(g, f, v), _zero_vorticity(n2, n1),
                          shear_fluxes(jump, b), n2=n2, tol=tol)


def kh_unstable(n1: int = 32, n2: int = 17, length: float = LENGTH_DEFAULT,
                eps: float = SHEAR_EPS, mode: int = SHEAR_MODE,
                jump: float = SHEAR_JUMP, tol: float = 1e-9) -> SimState:
    """Unmagnetized shear layer seeded with its growing mode-4 shape."""
    return _shear_state(0.0, n1, n2, length, eps, mode, jump, tol)


def alfven_stable(n1: int = 32, n2: int = 17,
                  length: float = LENGTH_DEFAULT, eps: float = SHEAR_EPS,
                  mode: int = SHEAR_MODE, jump: float = SHEAR_JUMP,
                  tol: float = 1e-9) -> SimState:
    """Identical data to kh_unstable but with the unit field restored.

    The jump 0.4 sits far below the stability threshold |[u]|^2 = 4, so
    the seeded mode oscillates neutrally instead of growing.
    """
    return _shear_state(1.0, n1, n2, length, eps, mode, jump, tol)


def large_amplitude_flat(n1: int = 64, n2: int = 17,
                         length: float = LENGTH_DEFAULT,
                         height: float = 0.6, packet_amp: float = 1e-3,
                         tol: float = 1e-9) -> SimState:
    """Order-one interface height with tiny derivatives and a small packet.

    The initial displacement reaches 0.6 — well outside any smallness
    regime in amplitude — while its slope stays below 0.06 because the
    profile varies over the whole window.  A weak one-sided packet keeps
    the dynamics (and the amplitude envelope it certifies) nontrivial.
    """
    g = Grid1D(n1, length)
    k = 2.0 * np.pi / length
    f = height * np.cos(k * g.points)
    surf = _surface(g, f, np.zeros(n1))
    # interior bump in the reference vertical coordinate of the curved strip
    y2 = build_map(surf, "lower", n2).y2
    shape = np.cos(np.pi * (y2 + 0.5))[:, None]
    omega = packet_amp * np.exp(-((g.points / 2.0) ** 2))[None, :] * shape
    zero2 = np.zeros((n2, n1))
    vort = VorticityState(omega, zero2, zero2.copy(), zero2.copy())
    return make_sim_state(surf, vort, n2=n2, tol=tol)


PRESETS = {
    "steady": steady,
    "linear-wave": linear_wave,
    "alfven-packet": alfven_packet,
    "kh-unstable": kh_unstable,
    "alfven-stable": alfven_stable,
    "large-amplitude-flat": large_amplitude_flat,
}

_DEFAULTS = {
    "steady": {"n1": 128, "n2": 33, "horizon": 10.0},
    "linear-wave": {"n1": 64, "n2": 17, "horizon": 10.0},
    "alfven-packet": {"n1": 256, "n2": 33, "horizon": 5.0},
    "kh-unstable": {"n1": 32, "n2": 17, "horizon": 150.0},
    "alfven-stable": {"n1": 32, "n2": 17, "horizon": 20.0},
    "large-amplitude-flat": {"n1": 64, "n2": 17, "horizon": 10.0},
}


def preset_defaults(name: str) -> dict:
    """Recommended grid and horizon for a named preset."""
    if name not in _DEFAULTS:
        raise ValueError(f"unknown preset {name!r}")
    return dict(_DEFAULTS[name], length=LENGTH_DEFAULT)


def build_preset(name: str, n1: int | None = None, n2: int | None = None,
                 length: float | None = None, tol: float = 1e-9) -> SimState:
    """Build a named preset, overriding its recommended grid if asked."""
    if name not in PRESETS:
        known = ", ".join(sorted(PRESETS))
        raise ValueError(f"unknown preset {name!r} (known: {known})")
    d = preset_defaults(name)
    return PRESETS[name](n1=n1 or d["n1"], n2=n2 or d["n2"],
                         length=length or d["length"], tol=tol)
