"""Weighted energy functionals and run-level budget reporting.

Every functional here measures the deviation of a state from the quiescent
background (flat interface, unit horizontal field, fluid at rest) in norms
weighted by the space-time decay factors <x1 +/- t>.  Each Elsasser family
carries the weight centred on its own characteristic: the plus family pairs
with <x1 + t> and the minus family with <x1 - t>.  "Ghost" variants divide
the integrand by the *opposite* family's weight, so they are small exactly
where that family has already passed -- their time integral is what the
energy budget controls.

Weights are evaluated at the time stored in the WeightSpec argument; the
report builder stamps the simulation time into the spec so callers never
mix a state at time t with weights at time zero.

Discrete honesty: spatial derivative orders inside bulk-type energies are
capped at ORDER_CAP = 3 regardless of the bookkeeping order s, and the cap
is recorded in every report row.  Desk-scale grids do not support clean
fourth spectral derivatives of transient data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields as dataclass_fields
from pathlib import Path

import numpy as np

from .evolution import SimState, hyperbolicity_monitor
from .fields import ElsasserState, curl
from .geometry import (MappedStrip, MetricTerms, SurfaceState, dx1, dx2,
                       metric_terms, zeta_cutoff)
from .spectral import (Grid1D, SpectralField1D, WeightSpec, deriv,
                       fractional_derivative, weight_samples)

ORDER_CAP = 3
S_DEFAULT = 4


# ---------------------------------------------------------------------------
# Report row


@dataclass(frozen=True)
class EnergyReport:
    """One diagnostic sample: the energy decomposition at a single time.

    e_bulk_low   -- layer fields, derivative orders <= 3, strong (5 mu) weight
    e_bulk_high  -- layer fields, orders <= min(s, cap), standard (2 mu) weight
    e_surface    -- interface characteristics (d/dt +/- d/dx1) through the
                    half-derivative smoothing, standard weight
    e_ghost      -- sum of the ghost (cross-family damped) versions of the
                    three parts above
    e_vorticity  -- curls of the layer fields, orders <= min(s - 1, cap)
    e_tangential -- interface-parallel derivatives of the layer fields,
                    orders <= 3, strong weight
    """

    time: float
    e_bulk_low: float
    e_bulk_high: float
    e_surface: float
    e_ghost: float
    e_vorticity: float
    e_tangential: float
    stability_min: float
    amplitude: float
    order_cap: int = ORDER_CAP

    def __post_init__(self):
        for name in ("e_bulk_low", "e_bulk_high", "e_surface", "e_ghost",
                     "e_vorticity", "e_tangential", "amplitude"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative (sum of squares)")
        if self.order_cap < 0:
            raise ValueError("order_cap must be nonnegative")

    @property
    def total_energy(self) -> float:
        """The budgeted energy: both bulk parts plus the surface part."""
        return self.e_bulk_low + self.e_bulk_high + self.e_surface


REPORT_FIELDS = tuple(f.name for f in dataclass_fields(EnergyReport))


# ---------------------------------------------------------------------------
# Quadrature and derivative stacks


def _check_order(max_order: int) -> None:
    if max_order < 0:
        raise ValueError("derivative order must be nonnegative")
    if max_order > ORDER_CAP:
        raise ValueError(
            f"derivative order {max_order} beyond the discrete cap {ORDER_CAP}")


def _layer_integral(vals: np.ndarray, strip: MappedStrip,
                    metric: MetricTerms) -> float:
    """Integral over the physical layer of a scalar sampled on the strip."""
    rows = np.sum(np.abs(metric.jacobian) * vals, axis=1)
    return float(strip.grid.spacing * np.dot(strip.vweights, rows))


def _derivative_stack(comp: np.ndarray, strip: MappedStrip,
                      metric: MetricTerms, max_order: int) -> dict:
    """All physical derivatives d^(a1, a2) of one component, |a| <= max_order.

    Mixed derivatives are taken vertical-last; the discrete operators
    commute to truncation accuracy, so the canonical order only fixes
    roundoff.
    """
    stack = {(0, 0): comp}
    for total in range(1, max_order + 1):
        for a1 in range(total, -1, -1):
            a2 = total - a1
            if a1 > 0:
                stack[(a1, a2)] = dx1(stack[(a1 - 1, a2)], strip, metric)
            else:
                stack[(0, a2)] = dx2(stack[(0, a2 - 1)], strip, metric)
    return stack


def _family_weight(grid: Grid1D, spec: WeightSpec, sign: int, power: float,
                   ghost: bool) -> np.ndarray:
    """Squared weight for one family, with the cross-family ghost divisor."""
    w = weight_samples(grid, spec, sign, 2.0 * power)
    if ghost:
        w = w * weight_samples(grid, spec, -sign, -2.0 * spec.mu)
    return w


def _sum_of_squares(stacks) -> np.ndarray:
    acc = None
    for d in stacks:
        acc = d * d if acc is None else acc + d * d
    return acc


# ---------------------------------------------------------------------------
# Bulk energies


def _bulk(state: ElsasserState, spec: WeightSpec, max_order: int,
          power: float, ghost: bool) -> float:
    _check_order(max_order)
    g = state.lower.grid
    metrics = (metric_terms(state.lower), metric_terms(state.upper))
    total = 0.0
    for sign, pair in ((+1, (state.lam_plus, state.hat_plus)),
                       (-1, (state.lam_minus, state.hat_minus))):
        w = _family_weight(g, spec, sign, power, ghost)
        for field, strip, metric in zip(pair, (state.lower, state.upper),
                                        metrics):
            squares = _sum_of_squares(
                d for comp in (field[0], field[1])
                for d in _derivative_stack(comp, strip, metric,
                                           max_order).values())
            total += _layer_integral(w[None, :] * squares, strip, metric)
    return total


def bulk_energy(state: ElsasserState, spec: WeightSpec, max_order: int,
                power: float) -> float:
    """Sum over families, layers, and |a| <= max_order of
    the squared layer norm of <w>^power times the a-th derivative."""
    return _bulk(state, spec, max_order, power, ghost=False)


def ghost_bulk_energy(state: ElsasserState, spec: WeightSpec, max_order: int,
                      power: float) -> float:
    """bulk_energy with the opposite family's <w>^mu divided out."""
    return _bulk(state, spec, max_order, power, ghost=True)


# ---------------------------------------------------------------------------
# Surface energies


def _surface(surface: SurfaceState, spec: WeightSpec, s: int,
             power: float | None, ghost: bool) -> float:
    if s < 1:
        raise ValueError("s must be at least 1")
    g = surface.grid
    p = 2.0 * spec.mu if power is None else power
    v = surface.v.samples
    slope = surface.slope()
    cap_a = min(s - 1, ORDER_CAP)
    total = 0.0
    for sign in (+1, -1):
        w = _family_weight(g, spec, sign, p, ghost)
        base = v + sign * slope  # the height's own characteristic derivative
        for a in range(cap_a + 1):
            da = deriv(base, g, a) if a else base
            qa = fractional_derivative(SpectralField1D(g, da), 0.5).samples
            total += float(g.spacing * np.sum(w * qa * qa))
    return total


def surface_energy(surface: SurfaceState, spec: WeightSpec,
                   s: int = S_DEFAULT, power: float | None = None) -> float:
    """Weighted squared norms of (d/dt +/- d/dx1) <d1>^(1/2) d1^a f, a < s.

    The height's time derivative is the stored v; power defaults to the
    standard 2 mu exponent.
    """
    return _surface(surface, spec, s, power, ghost=False)


def ghost_surface_energy(surface: SurfaceState, spec: WeightSpec,
                         s: int = S_DEFAULT,
                         power: float | None = None) -> float:
    """surface_energy with the opposite family's <w>^mu divided out."""
    return _surface(surface, spec, s, power, ghost=True)


# ---------------------------------------------------------------------------
# Vorticity and tangential energies


def vorticity_energy(state: ElsasserState, spec: WeightSpec,
                     s: int = S_DEFAULT) -> float:
    """Weighted squared norms of derivatives of the four curls.

    Orders run to min(s - 1, cap) with the standard 2 mu weight; this is
    the part of the field energy that the transport equations control
    directly.
    """
    if s < 1:
        raise ValueError("s must be at least 1")
    max_order = min(s - 1, ORDER_CAP)
    g = state.lower.grid
    metrics = (metric_terms(state.lower), metric_terms(state.upper))
    total = 0.0
    for sign, pair in ((+1, (state.lam_plus, state.hat_plus)),
                       (-1, (state.lam_minus, state.hat_minus))):
        w = _family_weight(g, spec, sign, 2.0 * spec.mu, ghost=False)
        for field, strip, metric in zip(pair, (state.lower, state.upper),
                                        metrics):
            omega = curl(field, metric)
            squares = _sum_of_squares(
                _derivative_stack(omega, strip, metric, max_order).values())
            total += _layer_integral(w[None, :] * squares, strip, metric)
    return total


def tangential_derivative(u: np.ndarray, strip: MappedStrip,
                          metric: MetricTerms,
                          surface: SurfaceState) -> np.ndarray:
    """Derivative along the interface direction, cut off at the walls.

    The coefficient is the interface slope spread vertically with the wall
    cutoff, so at the interface this reproduces the derivative of the
    trace (d/dx1 of g restricted equals the restriction of this operator)
    while near the walls it degenerates to the plain horizontal derivative.
    """
    psi = zeta_cutoff(strip.x2, surface.clearance) \
        * surface.slope()[None, :]
    return dx1(u, strip, metric) + psi * dx2(u, strip, metric)


def tangential_energy(state: ElsasserState, surface: SurfaceState,
                      spec: WeightSpec, max_order: int = ORDER_CAP) -> float:
    """Strong-weight squared norms of repeated tangential derivatives."""
    _check_order(max_order)
    g = state.lower.grid
    metrics = (metric_terms(state.lower), metric_terms(state.upper))
    total = 0.0
    for sign, pair in ((+1, (state.lam_plus, state.hat_plus)),
                       (-1, (state.lam_minus, state.hat_minus))):
        w = _family_weight(g, spec, sign, 5.0 * spec.mu, ghost=False)
        for field, strip, metric in zip(pair, (state.lower, state.upper),
                                        metrics):
            squares = None
            for comp in (field[0], field[1]):
                term = comp
                for m in range(max_order + 1):
                    if m:
                        term = tangential_derivative(term, strip, metric,
                                                     surface)
                    squares = term * term if squares is None \
                        else squares + term * term
            total += _layer_integral(w[None, :] * squares, strip, metric)
    return total


# ---------------------------------------------------------------------------
# Mode amplitude (growth-rate measurements)


def mode_amplitude(field: SpectralField1D, mode: int) -> float:
    """Real amplitude of one Fourier mode of a sampled profile."""
    n = field.grid.n
    if not 0 <= mode <= n // 2:
        raise ValueError("mode outside the resolved range")
    coeff = np.fft.rfft(field.samples)[mode]
    scale = 1.0 if mode in (0, n // 2) else 2.0
    return scale * float(np.abs(coeff)) / n


# ---------------------------------------------------------------------------
# Report assembly and the energy budget


def energy_report(state: SimState, spec: WeightSpec,
                  s: int = S_DEFAULT, travel: bool = True) -> EnergyReport:
    """Evaluate the full energy decomposition of one simulation state.

    With ``travel`` the decay weights ride the characteristics (they are
    evaluated at the state's own time), which is the faithful convention
    for data that decays along the line and stays inside the window.
    Periodic presets that fill the whole window never decay, so a
    travelling weight sweeps ever-larger values across them and the
    report series loses meaning; run-level tracking therefore anchors
    the weights by passing ``travel=False`` and the spec's own time.
    """
    at = (WeightSpec(mu=spec.mu, t=state.time, window=spec.window)
          if travel else spec)
    els = state.elsasser
    surf = state.surface
    high_order = min(s, ORDER_CAP)
    strong = 5.0 * spec.mu
    standard = 2.0 * spec.mu
    return EnergyReport(
        time=state.time,
        e_bulk_low=bulk_energy(els, at, ORDER_CAP, strong),
        e_bulk_high=bulk_energy(els, at, high_order, standard),
        e_surface=surface_energy(surf, at, s),
        e_ghost=(ghost_bulk_energy(els, at, ORDER_CAP, strong)
                 + ghost_bulk_energy(els, at, high_order, standard)
                 + ghost_surface_energy(surf, at, s)),
        e_vorticity=vorticity_energy(els, at, s),
        e_tangential=tangential_energy(els, surf, at, ORDER_CAP),
        stability_min=hyperbolicity_monitor(state),
        amplitude=float(np.max(np.abs(surf.f.samples))),
        order_cap=ORDER_CAP,
    )


@dataclass(frozen=True)
class BudgetCheck:
    """Outcome of the energy-budget inequality over one run.

    running[i] = [E(t_i) + trapezoid integral of G up to t_i] / E(0); the
    run respects the budget while running stays below the cap.
    """

    cap: float
    exceeded: bool
    crossing_time: float | None
    times: np.ndarray
    running: np.ndarray


def energy_budget(reports, cap: float = 4.0) -> tuple[float, BudgetCheck]:
    """Measured budget constant sup_t [E(t) + int_0^t G] / E(0) and its flag.

    E is the total energy (both bulk parts plus the surface part) and G its
    ghost counterpart; the time integral uses the trapezoid rule on the
    report cadence.
    """
    rows = list(reports)
    if len(rows) < 2:
        raise ValueError("energy budget needs at least two reports")
    t = np.array([r.time for r in rows], dtype=float)
    if np.any(np.diff(t) <= 0.0):
        raise ValueError("report times must increase strictly")
    e = np.array([r.total_energy for r in rows], dtype=float)
    ghost = np.array([r.e_ghost for r in rows], dtype=float)
    if not e[0] > 0.0:
        raise ValueError("initial energy vanishes; the budget ratio is "
                         "undefined")
    integral = np.concatenate(
        ([0.0], np.cumsum(0.5 * (ghost[1:] + ghost[:-1]) * np.diff(t))))
    running = (e + integral) / e[0]
    over = running > cap
    crossing = float(t[int(np.argmax(over))]) if bool(np.any(over)) else None
    return float(np.max(running)), BudgetCheck(
        cap=cap, exceeded=bool(np.any(over)), crossing_time=crossing,
        times=t, running=running)


# ---------------------------------------------------------------------------
# CSV round trip


def write_report_csv(reports, path) -> None:
    """One row per report; floats carry 17 significant digits."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_FIELDS)
        for r in reports:
            row = []
            for name in REPORT_FIELDS:
                value = getattr(r, name)
                row.append(str(value) if name == "order_cap"
                           else format(value, ".17g"))
            writer.writerow(row)


def read_report_csv(path) -> list[EnergyReport]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != REPORT_FIELDS:
            raise ValueError("unrecognized report header")
        out = []
        for row in reader:
            if len(row) != len(REPORT_FIELDS):
                raise ValueError("malformed report row")
            kwargs = {name: (int(cell) if name == "order_cap"
                             else float(cell))
                      for name, cell in zip(REPORT_FIELDS, row)}
            out.append(EnergyReport(**kwargs))
    return out
