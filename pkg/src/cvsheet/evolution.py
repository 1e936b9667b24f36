"""Coupled time integration of interface, vorticity, and bulk fields.

The prognostic variables are the interface height and velocity, the four
scalar curls, and the four per-layer mean horizontal fluxes.  Bulk
Elsasser fields and the pressure pair are derived data, rebuilt from the
prognostics after every update so the divergence-free structure and the
kinematic coupling can never drift.

The mean fluxes close the system: the curl plus trace data determine each
field only up to a horizontal mean, whose evolution follows from
integrating the momentum balance over a layer.  All interior terms cancel
through the kinematic condition, leaving the interface pressure working
against the interface slope (with opposite signs for the two layers).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .spectral import Grid1D, SpectralField1D, deriv
from .geometry import (MetricTerms, SurfaceState, build_map, dx2,
                       map_velocity, metric_terms)
from .fields import ElsasserState, VorticityState, div_curl_reconstruct
from .elliptic import EllipticError, PressurePair, solve_pressure
from .surface import extract_traces, surface_rhs
from .vorticity import curl_transport_rhs

CHECKPOINT_MAGIC = "cvsheet-checkpoint"
CHECKPOINT_VERSION = 1


class BlowUpError(RuntimeError):
    """The step left the admissible regime (NaN, wall contact, solver loss).

    Carries the last valid state so drivers can dump a diagnostic snapshot.
    """

    def __init__(self, reason: str, state=None):
        super().__init__(reason)
        self.reason = reason
        self.state = state


class PicardError(RuntimeError):
    """The successive-approximation iteration failed to contract."""


class CheckpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class StepperConfig:
    """Time stepping choices shared by the drivers."""

    scheme: str = "rk4"
    dt: float | None = None
    cfl_safety: float = 0.4
    picard_tol: float = 1e-10
    picard_max: int = 30

    def __post_init__(self):
        if self.scheme not in ("rk4", "picard"):
            raise ValueError("scheme must be 'rk4' or 'picard'")
        if self.dt is not None and not self.dt > 0.0:
            raise ValueError("dt must be positive when given")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if not self.picard_tol > 0.0 or self.picard_max < 1:
            raise ValueError("picard parameters out of range")


@dataclass(frozen=True)
class SimState:
    """Full simulation state with derived caches.

    elsasser and pressure are always consistent with (surface, vort,
    fluxes): they are rebuilt when the state is constructed and never
    mutated afterwards.
    """

    surface: SurfaceState
    vort: VorticityState
    elsasser: ElsasserState
    pressure: PressurePair
    metric_lower: MetricTerms
    metric_upper: MetricTerms
    fluxes: tuple
    time: float = 0.0
    step: int = 0

    @property
    def grid(self) -> Grid1D:
        return self.surface.grid

    @property
    def n2(self) -> int:
        return self.elsasser.lower.n2


def make_sim_state(surface: SurfaceState, vort: VorticityState,
                   fluxes=(0.0, 0.0, 0.0, 0.0), n2: int = 33,
                   time: float = 0.0, step: int = 0, tol: float = 1e-9,
                   kind: str = "vertical-stretch") -> SimState:
    """Assemble a consistent state from the prognostic variables.

    Rebuilds both layer maps for the current interface, reconstructs the
    four Elsasser fields from their curls, kinematic traces, and mean
    fluxes, and solves for the pressure pair.
    """
    g = surface.grid
    lo = build_map(surface, "lower", n2, kind=kind)
    up = build_map(surface, "upper", n2, kind=kind)
    ml, mu_ = metric_terms(lo), metric_terms(up)
    slope = surface.slope()
    v = surface.v.samples
    trace_p = SpectralField1D(g, v + slope)
    trace_m = SpectralField1D(g, v - slope)

    lam_p = div_curl_reconstruct(vort.omega_plus, surface, "lower", trace_p,
                                 mean_flux=fluxes[0], strip=lo, tol=tol)
    lam_m = div_curl_reconstruct(vort.omega_minus, surface, "lower", trace_m,
                                 mean_flux=fluxes[1], strip=lo, tol=tol)
    hat_p = div_curl_reconstruct(vort.hat_plus, surface, "upper", trace_p,
                                 mean_flux=fluxes[2], strip=up, tol=tol)
    hat_m = div_curl_reconstruct(vort.hat_minus, surface, "upper", trace_m,
                                 mean_flux=fluxes[3], strip=up, tol=tol)
    els = ElsasserState(lam_p, lam_m, hat_p, hat_m, lo, up, time=time)
    press = solve_pressure(els, surface, tol=tol)
    vt = VorticityState(vort.omega_plus, vort.omega_minus, vort.hat_plus,
                        vort.hat_minus, time=time)
    return SimState(surface, vt, els, press, ml, mu_, tuple(float(x) for x in fluxes),
                    time=time, step=step)


# ---------------------------------------------------------------------------
# Right-hand side of the coupled system


@dataclass(frozen=True)
class RhsBundle:
    """Time derivatives of the prognostic variables."""

    f_dot: np.ndarray
    v_dot: np.ndarray
    vort_dot: VorticityState
    flux_dot: tuple


def rhs_full(state: SimState) -> RhsBundle:
    """Derivatives of (f, v, curls, fluxes) using the cached derived data.

    The mean of dv/dt is projected out: the horizontal average of the
    interface acceleration vanishes identically (layer areas are
    conserved), and removing the solver-tolerance remnant keeps the
    stream-function reconstruction well posed over long runs.
    """
    surf = state.surface
    traces = extract_traces(state.elsasser, surf, state.pressure,
                            state.metric_lower, state.metric_upper)
    v_dot = surface_rhs(surf, traces).samples
    v_dot = v_dot - v_dot.mean()
    vort_dot = curl_transport_rhs(state.vort, state.elsasser,
                                  state.metric_lower, state.metric_upper)
    # the curls are held on the layer maps, whose nodes ride the moving
    # interface; add the node-velocity advection so grid values evolve
    # consistently with the physical transport law
    mesh_lo = map_velocity(state.elsasser.lower, surf.v)
    mesh_up = map_velocity(state.elsasser.upper, surf.v)

    def ride(field, strip, metric, mesh):
        return mesh * dx2(field, strip, metric)

    lo_s, up_s = state.elsasser.lower, state.elsasser.upper
    vort_dot = VorticityState(
        vort_dot.omega_plus + ride(state.vort.omega_plus, lo_s,
                                   state.metric_lower, mesh_lo),
        vort_dot.omega_minus + ride(state.vort.omega_minus, lo_s,
                                    state.metric_lower, mesh_lo),
        vort_dot.hat_plus + ride(state.vort.hat_plus, up_s,
                                 state.metric_upper, mesh_up),
        vort_dot.hat_minus + ride(state.vort.hat_minus, up_s,
                                  state.metric_upper, mesh_up),
        time=vort_dot.time)
    slope = surf.slope()
    lower = float(np.mean(state.pressure.p[-1] * slope))
    upper = -float(np.mean(state.pressure.p_hat[0] * slope))
    return RhsBundle(f_dot=surf.v.samples.copy(), v_dot=v_dot,
                     vort_dot=vort_dot,
                     flux_dot=(lower, lower, upper, upper))


def cfl_dt(state: SimState, safety: float) -> float:
    """Characteristic step limit safety * dx1 / (speed scale).

    The speed scale is 1 (background) plus the largest Elsasser component
    plus the interface slope amplified by the worst vertical compression
    of the two layer maps.
    """
    g = state.grid
    dx = g.length / g.n
    lam = max(float(np.max(np.abs(f))) for f in
              (state.elsasser.lam_plus, state.elsasser.lam_minus,
               state.elsasser.hat_plus, state.elsasser.hat_minus))
    squeeze = max(1.0 / float(np.min(np.abs(state.metric_lower.jacobian))),
                  1.0 / float(np.min(np.abs(state.metric_upper.jacobian))))
    slope = float(np.max(np.abs(state.surface.slope())))
    return safety * dx / (1.0 + lam + slope * squeeze)


# ---------------------------------------------------------------------------
# Steppers


def _prognostics(state: SimState):
    return (state.surface.f.samples, state.surface.v.samples,
            state.vort.omega_plus, state.vort.omega_minus,
            state.vort.hat_plus, state.vort.hat_minus,
            np.asarray(state.fluxes))


def _bundle_parts(b: RhsBundle):
    return (b.f_dot, b.v_dot, b.vort_dot.omega_plus, b.vort_dot.omega_minus,
            b.vort_dot.hat_plus, b.vort_dot.hat_minus,
            np.asarray(b.flux_dot))


def _combine(state: SimState, terms, new_time: float, step: int,
             tol: float) -> SimState:
    """state + sum(coef * bundle), rebuilt into a consistent SimState."""
    parts = [p.copy() for p in _prognostics(state)]
    for coef, b in terms:
        for p, d in zip(parts, _bundle_parts(b)):
            p += coef * d
    f, v, wp, wm, hp, hm, fx = parts
    if not all(np.all(np.isfinite(p)) for p in parts):
        raise BlowUpError("non-finite prognostic data", state)
    g = state.grid
    try:
        surf = SurfaceState(SpectralField1D(g, f), SpectralField1D(g, v),
                            clearance=state.surface.clearance)
        vort = VorticityState(wp, wm, hp, hm, time=new_time)
        return make_sim_state(surf, vort, fx, n2=state.n2, time=new_time,
                              step=step, tol=tol,
                              kind=state.elsasser.lower.kind)
    except (ValueError, EllipticError) as exc:
        raise BlowUpError(str(exc), state) from exc


def advance_rk4(state: SimState, dt: float, tol: float = 1e-9) -> SimState:
    """One classical four-stage step with per-stage derived-data rebuilds.

    dt may be negative (time reversal); its magnitude must respect the
    characteristic limit.  Blow-up (NaN, wall contact, elliptic failure)
    raises BlowUpError carrying the pre-step state.
    """
    if abs(dt) > cfl_dt(state, 1.0) * (1.0 + 1e-12):
        raise ValueError("dt exceeds the characteristic step limit")
    t0, n = state.time, state.step
    k1 = rhs_full(state)
    s2 = _combine(state, [(0.5 * dt, k1)], t0 + 0.5 * dt, n, tol)
    k2 = rhs_full(s2)
    s3 = _combine(state, [(0.5 * dt, k2)], t0 + 0.5 * dt, n, tol)
    k3 = rhs_full(s3)
    s4 = _combine(state, [(dt, k3)], t0 + dt, n, tol)
    k4 = rhs_full(s4)
    return _combine(state, [(dt / 6.0, k1), (dt / 3.0, k2),
                            (dt / 3.0, k3), (dt / 6.0, k4)],
                    t0 + dt, n + 1, tol)


def _picard_norm(parts) -> float:
    return float(np.sqrt(sum(np.mean(np.square(p)) for p in parts)))


def _implicit_background(f, v, wp, wm, hp, hm, half: float, g: Grid1D):
    """Solve (I - half*A) U = R for the constant-coefficient part A.

    A holds the linear wave operator for (f, v) and unit-speed background
    transport for the curls, both diagonal in the horizontal Fourier basis.
    """
    xi = g.wavenumbers
    fh = np.fft.rfft(f)
    vh = np.fft.rfft(v)
    k2 = xi * xi
    vh_new = (vh - half * k2 * fh) / (1.0 + half * half * k2)
    fh_new = fh + half * vh_new
    out_f = np.fft.irfft(fh_new, n=g.n)
    out_v = np.fft.irfft(vh_new, n=g.n)

    def transport(w, sign):
        wh = np.fft.rfft(w, axis=-1)
        wh /= (1.0 - sign * half * 1j * xi)
        return np.fft.irfft(wh, n=g.n, axis=-1)

    return (out_f, out_v, transport(wp, +1), transport(wm, -1),
            transport(hp, +1), transport(hm, -1))


def _nonlinear_parts(state: SimState):
    """rhs_full minus the constant-coefficient background operator."""
    b = rhs_full(state)
    g = state.grid
    nv = b.v_dot - deriv(state.surface.f.samples, g, 2)
    nwp = b.vort_dot.omega_plus - deriv(state.vort.omega_plus, g)
    nwm = b.vort_dot.omega_minus + deriv(state.vort.omega_minus, g)
    nhp = b.vort_dot.hat_plus - deriv(state.vort.hat_plus, g)
    nhm = b.vort_dot.hat_minus + deriv(state.vort.hat_minus, g)
    return (nv, nwp, nwm, nhp, nhm, np.asarray(b.flux_dot))


def advance_picard(state: SimState, dt: float, cfg: StepperConfig,
                   tol: float = 1e-9, stats: dict | None = None,
                   _depth: int = 0) -> SimState:
    """Successive-approximation step (trapezoidal in time).

    The constant-coefficient background (wave operator and unit transport)
    is integrated implicitly and exactly per Fourier mode; the
    variable-coefficient and quadratic remainder is frozen at the previous
    iterate and updated until successive iterates differ by less than
    picard_tol in a quadratic norm.  Three consecutive difference growths,
    or a state rebuild failing on an unconverged iterate, halve the step
    (two half-steps); a second failure raises PicardError.  A rebuild
    failure on a converged iterate is reported as blow-up, since then the
    solution itself has left the admissible set.

    When given, stats accumulates {"iterations", "halvings"} across any
    internal halving recursion.
    """
    if cfg.picard_tol <= 0.0:
        raise ValueError("picard_tol must be positive")
    if stats is not None:
        stats.setdefault("iterations", 0)
        stats.setdefault("halvings", 0)
    g = state.grid
    half = 0.5 * dt
    f0, v0, wp0, wm0, hp0, hm0, fx0 = (p.copy() for p in _prognostics(state))
    n0 = _nonlinear_parts(state)

    # right-hand side R = U_n + half*(A U_n) + half*N_n, with N_m added later
    rf = f0 + half * v0
    rv0 = v0 + half * deriv(f0, g, 2)
    rwp0 = wp0 + half * deriv(wp0, g)
    rwm0 = wm0 - half * deriv(wm0, g)
    rhp0 = hp0 + half * deriv(hp0, g)
    rhm0 = hm0 - half * deriv(hm0, g)

    nm = n0
    prev_parts = (f0, v0, wp0, wm0, hp0, hm0, fx0)
    diffs = []
    for it in range(cfg.picard_max):
        if stats is not None:
            stats["iterations"] = stats["iterations"] + 1
        rv = rv0 + half * (n0[0] + nm[0])
        rwp = rwp0 + half * (n0[1] + nm[1])
        rwm = rwm0 + half * (n0[2] + nm[2])
        rhp = rhp0 + half * (n0[3] + nm[3])
        rhm = rhm0 + half * (n0[4] + nm[4])
        fx = fx0 + half * (n0[5] + nm[5])
        f, v, wp, wm, hp, hm = _implicit_background(rf, rv, rwp, rwm, rhp,
                                                    rhm, half, g)
        parts = (f, v, wp, wm, hp, hm, fx)
        if not all(np.all(np.isfinite(p)) for p in parts):
            raise BlowUpError("non-finite picard iterate", state)
        diffs.append(_picard_norm([a - b for a, b in
                                   zip(parts, prev_parts)]))
        converged = diffs[-1] <= cfg.picard_tol * max(1.0,
                                                      _picard_norm(parts))
        diverging = (not converged and len(diffs) >= 3
                     and diffs[-1] > diffs[-2] > diffs[-3])
        current = None
        if not diverging:
            try:
                surf = SurfaceState(SpectralField1D(g, f),
                                    SpectralField1D(g, v),
                                    clearance=state.surface.clearance)
                vort = VorticityState(wp, wm, hp, hm, time=state.time + dt)
                current = make_sim_state(surf, vort, fx, n2=state.n2,
                                         time=state.time + dt,
                                         step=state.step, tol=tol,
                                         kind=state.elsasser.lower.kind)
            except (ValueError, EllipticError) as exc:
                if converged:
                    raise BlowUpError(str(exc), state) from exc
                diverging = True
        if diverging:
            if _depth >= 2:
                raise PicardError("iteration not contracting after two "
                                  "step halvings")
            if stats is not None:
                stats["halvings"] = stats["halvings"] + 1
            mid = advance_picard(state, 0.5 * dt, cfg, tol, stats, _depth + 1)
            out = advance_picard(mid, 0.5 * dt, cfg, tol, stats, _depth + 1)
            return replace(out, step=state.step + 1)
        if converged:
            return replace(current, step=state.step + 1)
        prev_parts = parts
        nm = _nonlinear_parts(current)
    raise PicardError(f"no convergence in {cfg.picard_max} iterations")


# ---------------------------------------------------------------------------
# Monitors


def hyperbolicity_monitor(state: SimState) -> float:
    """Smallest normalized discriminant of the surface principal symbol.

    The wave part of the interface equation reads
    dt^2 f + A d1 dt f + B d1^2 f = (lower order) with A the mean of the
    four first-component traces and B collecting the linear and quadratic
    trace terms.  Returns min_x (A^2/4 - B); positive means the operator
    stays strictly hyperbolic (1 for zero traces).
    """
    lp = state.elsasser.lam_plus[0][-1]
    lm = state.elsasser.lam_minus[0][-1]
    hp = state.elsasser.hat_plus[0][0]
    hm = state.elsasser.hat_minus[0][0]
    a = 0.5 * (lp + lm + hp + hm)
    b = -1.0 - 0.5 * (lp - lm + hp - hm) + 0.5 * (lp * lm + hp * hm)
    return float(np.min(0.25 * a * a - b))


# ---------------------------------------------------------------------------
# Checkpointing


_ARRAY_ORDER = ("f", "v", "omega_plus", "omega_minus", "omega_hat_plus",
                "omega_hat_minus", "lam_plus", "lam_minus", "hat_plus",
                "hat_minus", "p", "p_hat")


def _state_arrays(state: SimState):
    return {
        "f": state.surface.f.samples, "v": state.surface.v.samples,
        "omega_plus": state.vort.omega_plus,
        "omega_minus": state.vort.omega_minus,
        "omega_hat_plus": state.vort.hat_plus,
        "omega_hat_minus": state.vort.hat_minus,
        "lam_plus": state.elsasser.lam_plus,
        "lam_minus": state.elsasser.lam_minus,
        "hat_plus": state.elsasser.hat_plus,
        "hat_minus": state.elsasser.hat_minus,
        "p": state.pressure.p, "p_hat": state.pressure.p_hat,
    }


def checkpoint(state: SimState, path) -> None:
    """Bit-exact dump: one JSON header line then raw little-endian blobs."""
    arrays = _state_arrays(state)
    header = {
        "magic": CHECKPOINT_MAGIC,
        "version": CHECKPOINT_VERSION,
        "grid_n": state.grid.n,
        "grid_length": state.grid.length,
        "n2": state.n2,
        "kind": state.elsasser.lower.kind,
        "clearance": state.surface.clearance,
        "time": state.time,
        "step": state.step,
        "fluxes": list(state.fluxes),
        "report": {k: float(v) for k, v in state.pressure.report.items()},
        "shapes": {k: list(arrays[k].shape) for k in _ARRAY_ORDER},
    }
    blob = b"".join(np.ascontiguousarray(arrays[k], dtype="<f8").tobytes()
                    for k in _ARRAY_ORDER)
    Path(path).write_bytes(json.dumps(header, sort_keys=True).encode()
                           + b"\n" + blob)


def restore(path) -> SimState:
    """Inverse of checkpoint; validates header and payload length."""
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise CheckpointError("missing header line")
    try:
        header = json.loads(raw[:nl].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable header: {exc}") from exc
    if header.get("magic") != CHECKPOINT_MAGIC:
        raise CheckpointError("not a checkpoint file")
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported version {header.get('version')}")

    arrays = {}
    offset = nl + 1
    for name in _ARRAY_ORDER:
        shape = tuple(header["shapes"][name])
        count = int(np.prod(shape))
        end = offset + 8 * count
        if end > len(raw):
            raise CheckpointError("truncated payload")
        arrays[name] = np.frombuffer(raw[offset:end],
                                     dtype="<f8").reshape(shape).copy()
        offset = end
    if offset != len(raw):
        raise CheckpointError("trailing bytes after payload")

    g = Grid1D(int(header["grid_n"]), float(header["grid_length"]))
    surf = SurfaceState(SpectralField1D(g, arrays["f"]),
                        SpectralField1D(g, arrays["v"]),
                        clearance=float(header["clearance"]))
    n2, kind = int(header["n2"]), header["kind"]
    lo = build_map(surf, "lower", n2, kind=kind)
    up = build_map(surf, "upper", n2, kind=kind)
    time = float(header["time"])
    vort = VorticityState(arrays["omega_plus"], arrays["omega_minus"],
                          arrays["omega_hat_plus"], arrays["omega_hat_minus"],
                          time=time)
    els = ElsasserState(arrays["lam_plus"], arrays["lam_minus"],
                        arrays["hat_plus"], arrays["hat_minus"], lo, up,
                        time=time)
    press = PressurePair(arrays["p"], arrays["p_hat"],
                         dict(header.get("report", {})))
    return SimState(surf, vort, els, press, metric_terms(lo),
                    metric_terms(up), tuple(header["fluxes"]),
                    time=time, step=int(header["step"]))
