"""Transport of the scalar Elsasser curls in both layers.

Each family's curl is advected by the opposite family's full velocity
(perturbation plus unit background) and forced by a bilinear gradient
source; there is no vortex stretching beyond that source in two
dimensions.  Everything is evaluated in mapped coordinates with
dealiased products, so the right-hand sides are valid on moving
interfaces as long as the metric matches the state's strips.
"""

from __future__ import annotations

import numpy as np

from .spectral import mul_dealias
from .geometry import MappedStrip, MetricTerms, dx1, dx2
from .fields import ElsasserState, VorticityState


def _advection(omega: np.ndarray, carrier: np.ndarray, background: float,
               strip: MappedStrip, metric: MetricTerms) -> np.ndarray:
    """-(carrier + background e1) . grad(omega) in physical coordinates."""
    g = strip.grid
    wx = dx1(omega, strip, metric)
    wy = dx2(omega, strip, metric)
    out = -background * wx
    out -= mul_dealias(carrier[0], wx, g)
    out -= mul_dealias(carrier[1], wy, g)
    return out


def _gradient_source(adv: np.ndarray, carried: np.ndarray,
                     strip: MappedStrip, metric: MetricTerms) -> np.ndarray:
    """sum_j d_j(carried) x grad(adv_j) with the planar cross product.

    `carried` is the family whose curl is being forced, `adv` the opposite
    family; the j-sum runs over the two components of the opposite family.
    """
    g = strip.grid
    c1x, c1y = dx1(carried[0], strip, metric), dx2(carried[0], strip, metric)
    c2x, c2y = dx1(carried[1], strip, metric), dx2(carried[1], strip, metric)
    a1x, a1y = dx1(adv[0], strip, metric), dx2(adv[0], strip, metric)
    a2x, a2y = dx1(adv[1], strip, metric), dx2(adv[1], strip, metric)
    out = mul_dealias(c1x, a1y, g) - mul_dealias(c2x, a1x, g)
    out += mul_dealias(c1y, a2y, g) - mul_dealias(c2y, a2x, g)
    return out


def curl_transport_rhs(vort: VorticityState, state: ElsasserState,
                       metric_lower: MetricTerms,
                       metric_upper: MetricTerms) -> VorticityState:
    """Time derivatives of the four curls (advection plus source).

    The plus-family curl rides on the full minus velocity, whose
    background part is -e1, and vice versa; with zero perturbation the
    curls translate at unit speed along the background field.  Sources
    are the bilinear gradient couplings of the two families, evaluated
    pointwise and dealiased.
    """
    lo, up = state.lower, state.upper
    d_plus = _advection(vort.omega_plus, state.lam_minus, -1.0, lo, metric_lower)
    d_plus += _gradient_source(state.lam_minus, state.lam_plus, lo, metric_lower)
    d_minus = _advection(vort.omega_minus, state.lam_plus, +1.0, lo, metric_lower)
    d_minus += _gradient_source(state.lam_plus, state.lam_minus, lo, metric_lower)
    d_hat_plus = _advection(vort.hat_plus, state.hat_minus, -1.0, up, metric_upper)
    d_hat_plus += _gradient_source(state.hat_minus, state.hat_plus, up, metric_upper)
    d_hat_minus = _advection(vort.hat_minus, state.hat_plus, +1.0, up, metric_upper)
    d_hat_minus += _gradient_source(state.hat_plus, state.hat_minus, up, metric_upper)
    return VorticityState(d_plus, d_minus, d_hat_plus, d_hat_minus,
                          time=vort.time)
