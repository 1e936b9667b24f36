"""Interface wave dynamics driven by Elsasser traces and layer pressures.

The interface height f and its velocity v = df/dt satisfy a forced wave
equation whose coefficients are the first components of the four Elsasser
traces and whose forcing is the pair of conormal pressure gradients.  The
stepper treats traces as derived quantities re-extracted from the bulk
fields at every stage; the transport form of the trace evolution kept here
is a consistency diagnostic only.

The amplitude bound at the end of the module certifies max|f(t)| from the
time history of weighted trace sup norms: contributions along either
characteristic family integrate to at most half the mass of the decay
weight, per unit of weighted field size.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .spectral import (
    Grid1D, SpectralField1D, WeightSpec, deriv, mass_constant, mul_dealias,
    weight_samples,
)
from .geometry import MetricTerms, SurfaceState, dx1, dx2, metric_terms
from .fields import ElsasserState, restrict_trace
from .elliptic import PressurePair


@dataclass(frozen=True)
class TraceBundle:
    """Interface data feeding the surface wave equation.

    First components of the four Elsasser traces along the interface plus
    the conormal pressure gradients N.grad(p) from below and N.grad(phat)
    from above, all on the shared interface grid.
    """

    lam_plus1: SpectralField1D
    lam_minus1: SpectralField1D
    hat_plus1: SpectralField1D
    hat_minus1: SpectralField1D
    grad_p_n: SpectralField1D
    grad_phat_n: SpectralField1D

    def __post_init__(self):
        g = self.lam_plus1.grid
        for name in ("lam_minus1", "hat_plus1", "hat_minus1",
                     "grad_p_n", "grad_phat_n"):
            field = getattr(self, name)
            if field.grid != g:
                raise ValueError("trace bundle fields must share one grid")
            if not np.all(np.isfinite(field.samples)):
                raise ValueError(f"trace bundle field {name} is not finite")

    @property
    def grid(self) -> Grid1D:
        return self.lam_plus1.grid

    def swapped_layers(self) -> "TraceBundle":
        """Bundle with the lower and upper layer roles exchanged."""
        return TraceBundle(
            lam_plus1=self.hat_plus1, lam_minus1=self.hat_minus1,
            hat_plus1=self.lam_plus1, hat_minus1=self.lam_minus1,
            grad_p_n=self.grad_phat_n, grad_phat_n=self.grad_p_n)


def extract_traces(state: ElsasserState, surface: SurfaceState,
                   pressure: PressurePair,
                   metric_lower: MetricTerms | None = None,
                   metric_upper: MetricTerms | None = None) -> TraceBundle:
    """Pull the interface trace bundle out of bulk fields and a pressure pair.

    The trace rows coincide with grid lines of the layer maps, so no
    interpolation is involved; the conormal pressure gradients use the
    mapped physical derivatives of each layer.
    """
    lo, up = state.lower, state.upper
    ml = metric_lower if metric_lower is not None else metric_terms(lo)
    mu_ = metric_upper if metric_upper is not None else metric_terms(up)
    g = surface.grid
    slope = surface.slope()

    def conormal(p: np.ndarray, strip, metric) -> SpectralField1D:
        row = -1 if strip.which == "lower" else 0
        px = dx1(p, strip, metric)[row]
        py = dx2(p, strip, metric)[row]
        return SpectralField1D(g, py - mul_dealias(slope, px, g))

    return TraceBundle(
        lam_plus1=restrict_trace(state.lam_plus, lo)[0],
        lam_minus1=restrict_trace(state.lam_minus, lo)[0],
        hat_plus1=restrict_trace(state.hat_plus, up)[0],
        hat_minus1=restrict_trace(state.hat_minus, up)[0],
        grad_p_n=conormal(pressure.p, lo, ml),
        grad_phat_n=conormal(pressure.p_hat, up, mu_))


# ---------------------------------------------------------------------------
# Wave equation right-hand side


def surface_rhs(surface: SurfaceState, traces: TraceBundle) -> SpectralField1D:
    """Interface acceleration dv/dt, grouped by characteristic pairs.

    dv/dt = f'' - (lp+hp)/2 * d1(v - f') - (lm+hm)/2 * d1(v + f')
            - (lp*lm + hp*hm)/2 * f'' - (grad_p_n + grad_phat_n)/2,

    where lp, lm, hp, hm are the four first-component traces and primes are
    x1-derivatives.  The mixed derivative d1(dt f) is formed by
    differentiating v, never by finite differencing in time.  Products are
    dealiased.  Swapping the hatted and unhatted layer data leaves the
    result unchanged.
    """
    g = surface.grid
    f2 = deriv(surface.f.samples, g, 2)
    dv = deriv(surface.v.samples, g)
    lp, lm = traces.lam_plus1.samples, traces.lam_minus1.samples
    hp, hm = traces.hat_plus1.samples, traces.hat_minus1.samples

    out = f2.copy()
    out -= 0.5 * mul_dealias(lp + hp, dv - f2, g)
    out -= 0.5 * mul_dealias(lm + hm, dv + f2, g)
    pair = mul_dealias(lp, lm, g) + mul_dealias(hp, hm, g)
    out -= 0.5 * mul_dealias(pair, f2, g)
    out -= 0.5 * (traces.grad_p_n.samples + traces.grad_phat_n.samples)
    return SpectralField1D(g, out)


def surface_rhs_expanded(surface: SurfaceState, traces: TraceBundle) -> SpectralField1D:
    """Same acceleration with the advective terms regrouped by derivative.

    dv/dt = f'' - (lp+lm+hp+hm)/2 * d1(v) + (lp-lm+hp-hm)/2 * f''
            - (lp*lm + hp*hm)/2 * f'' - (grad_p_n + grad_phat_n)/2.

    Kept as an independent expansion: agreement with surface_rhs to
    roundoff is a structural check on the characteristic grouping.
    """
    g = surface.grid
    f2 = deriv(surface.f.samples, g, 2)
    dv = deriv(surface.v.samples, g)
    lp, lm = traces.lam_plus1.samples, traces.lam_minus1.samples
    hp, hm = traces.hat_plus1.samples, traces.hat_minus1.samples

    out = f2 - 0.5 * mul_dealias(lp + lm + hp + hm, dv, g)
    out += 0.5 * mul_dealias(lp - lm + hp - hm, f2, g)
    pair = mul_dealias(lp, lm, g) + mul_dealias(hp, hm, g)
    out -= 0.5 * mul_dealias(pair, f2, g)
    out -= 0.5 * (traces.grad_p_n.samples + traces.grad_phat_n.samples)
    return SpectralField1D(g, out)


# ---------------------------------------------------------------------------
# Kinematic residuals


def kinematic_residual(surface: SurfaceState, state: ElsasserState):
    """Mismatch between surface motion and the four normal traces.

    Returns (plus, minus, hat_plus, hat_minus) where the plus entries are
    (v + f') - N.trace and the minus entries (v - f') - N.trace.  All four
    vanish (to solver tolerance) for admissible states; the hatted entries
    double as the cross-layer consistency check since both layers must
    drive the same interface.
    """
    g = surface.grid
    slope = surface.slope()
    v = surface.v.samples
    out = []
    for field, strip, sign in ((state.lam_plus, state.lower, +1),
                               (state.lam_minus, state.lower, -1),
                               (state.hat_plus, state.upper, +1),
                               (state.hat_minus, state.upper, -1)):
        t1, t2 = restrict_trace(field, strip)
        normal = t2.samples - mul_dealias(slope, t1.samples, g)
        out.append(SpectralField1D(g, v + sign * slope - normal))
    return tuple(out)


# ---------------------------------------------------------------------------
# Trace transport (diagnostic only)


def trace_transport_rhs(traces: TraceBundle,
                        pressure_traces: tuple[SpectralField1D, SpectralField1D]):
    """Advective time derivatives of the four first-component traces.

    Each family is transported along the opposite family's characteristic:

        dt(lm) = -(1 + lp) * d1(lm) - d1p,    dt(lp) = +(1 - lm) * d1(lp) - d1p,

    and likewise for the hatted traces with the upper pressure.
    `pressure_traces` supplies the traces of d1(p) and d1(phat).  This is a
    cross-check for the stepper, which re-extracts traces from bulk fields
    instead of integrating these equations.
    """
    g = traces.grid
    d1p, d1phat = pressure_traces
    lp, lm = traces.lam_plus1.samples, traces.lam_minus1.samples
    hp, hm = traces.hat_plus1.samples, traces.hat_minus1.samples

    def advect(q: np.ndarray, own_sign: int, other: np.ndarray,
               forcing: np.ndarray) -> SpectralField1D:
        dq = deriv(q, g)
        return SpectralField1D(
            g, own_sign * dq - mul_dealias(other, dq, g) - forcing)

    return {
        "lam_plus1": advect(lp, +1, lm, d1p.samples),
        "lam_minus1": advect(lm, -1, lp, d1p.samples),
        "hat_plus1": advect(hp, +1, hm, d1phat.samples),
        "hat_minus1": advect(hm, -1, hp, d1phat.samples),
    }


# ---------------------------------------------------------------------------
# Characteristic amplitude bound


@dataclass(frozen=True)
class SurfaceHistory:
    """Sup-norm time series of the interface height and slope."""

    times: np.ndarray
    f_sup: np.ndarray
    slope_sup: np.ndarray
    spacing: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("history must hold at least one sample")
        if t.size > 1 and np.any(np.diff(t) <= 0.0):
            raise ValueError("history times must increase strictly")
        for name in ("f_sup", "slope_sup"):
            if np.asarray(getattr(self, name)).shape != t.shape:
                raise ValueError(f"{name} must match the times array")
        if not self.spacing > 0.0:
            raise ValueError("spacing must be positive")


@dataclass(frozen=True)
class WeightedSupSeries:
    """Per-family weighted trace sup norms over the same time samples."""

    plus: np.ndarray
    minus: np.ndarray
    mu: float

    def __post_init__(self):
        if np.asarray(self.plus).shape != np.asarray(self.minus).shape:
            raise ValueError("family series must share a shape")
        if not 0.5 < self.mu <= 0.6:
            raise ValueError("mu must lie in (1/2, 3/5]")


def weighted_trace_sup(state: ElsasserState, spec: WeightSpec) -> tuple[float, float]:
    """Interface sup norms of <x1 +/- t>^(2 mu) |trace|, per family.

    The plus family pairs with the weight centred at x1 = -t and the minus
    family with x1 = +t, matching each family's own propagation; hatted and
    unhatted traces are combined by max since either layer's trace feeds the
    same kinematic condition.
    """
    g = state.lower.grid
    at_time = WeightSpec(mu=spec.mu, t=state.time, window=spec.window)
    out = []
    for sign, pair in ((+1, (state.lam_plus, state.hat_plus)),
                       (-1, (state.lam_minus, state.hat_minus))):
        w = weight_samples(g, at_time, sign, 2.0 * spec.mu)
        best = 0.0
        for field, strip in zip(pair, (state.lower, state.upper)):
            t1, t2 = restrict_trace(field, strip)
            mag = np.hypot(t1.samples, t2.samples)
            best = max(best, float(np.max(w * mag)))
        out.append(best)
    return out[0], out[1]


def amplitude_bound(history: SurfaceHistory,
                    state_sup: WeightedSupSeries) -> tuple[np.ndarray, np.ndarray]:
    """Measured max|f(t)| against its certified characteristic envelope.

    rhs(t) = max|f(0)| + (M/2) * min over families of the running sup of
    (1 + max|d1 f|) * W, where W is the family's weighted trace sup norm
    and M the mass of the decay weight.  Integrating a trace along either
    characteristic family sweeps the weight argument at rate 2, which is
    where the factor M/2 comes from; the bound holds for each family
    separately, so the envelope may take the smaller of the two.

    Returns (lhs, rhs) as arrays over the history times.  The sup over
    intermediate times is only trustworthy when the sampling interval does
    not exceed the interface grid spacing; sparser histories warn.
    """
    t = np.asarray(history.times, dtype=float)
    if np.asarray(state_sup.plus).shape != t.shape:
        raise ValueError("state_sup series must match the history times")
    if t.size > 1 and float(np.max(np.diff(t))) > history.spacing * (1 + 1e-12):
        warnings.warn("surface history is sparser than the grid spacing; "
                      "the running sup may miss intermediate growth",
                      stacklevel=2)
    grow = 1.0 + np.asarray(history.slope_sup, dtype=float)
    env_plus = np.maximum.accumulate(grow * np.asarray(state_sup.plus, dtype=float))
    env_minus = np.maximum.accumulate(grow * np.asarray(state_sup.minus, dtype=float))
    half_mass = 0.5 * mass_constant(WeightSpec(mu=state_sup.mu))
    lhs = np.asarray(history.f_sup, dtype=float).copy()
    rhs = lhs[0] + half_mass * np.minimum(env_plus, env_minus)
    return lhs, rhs
