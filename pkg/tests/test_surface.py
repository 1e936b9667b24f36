import warnings

import numpy as np
import pytest

from cvsheet.spectral import Grid1D, SpectralField1D, WeightSpec, deriv
from cvsheet.geometry import build_map
from cvsheet.fields import ElsasserState
from cvsheet.elliptic import PressurePair
from cvsheet.surface import (
    TraceBundle, SurfaceHistory, WeightedSupSeries, amplitude_bound,
    extract_traces, kinematic_residual, surface_rhs, surface_rhs_expanded,
    trace_transport_rhs, weighted_trace_sup,
)

import oracles
from states import band_noise, surface_of, flat, make_state


def fld(grid, value):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (grid.n,)).copy()
    return SpectralField1D(grid, arr)


def bundle_of(grid, lp=0.0, lm=0.0, hp=0.0, hm=0.0, gp=0.0, gph=0.0):
    return TraceBundle(fld(grid, lp), fld(grid, lm), fld(grid, hp),
                       fld(grid, hm), fld(grid, gp), fld(grid, gph))


def zero_state(surface, n2=9, time=0.0):
    lo = build_map(surface, "lower", n2)
    up = build_map(surface, "upper", n2)
    z = np.zeros((2, n2, surface.grid.n))
    return ElsasserState(z, z.copy(), z.copy(), z.copy(), lo, up, time=time)


class TestBundle:
    def test_grid_mismatch_rejected(self):
        g = Grid1D(32, 2 * np.pi)
        h = Grid1D(64, 2 * np.pi)
        with pytest.raises(ValueError):
            bundle = TraceBundle(fld(g, 0.0), fld(h, 0.0), fld(g, 0.0),
                                 fld(g, 0.0), fld(g, 0.0), fld(g, 0.0))

    def test_non_finite_rejected(self):
        g = Grid1D(32, 2 * np.pi)
        bad = np.zeros(g.n)
        bad[3] = np.nan
        with pytest.raises(ValueError):
            TraceBundle(fld(g, 0.0), fld(g, 0.0), fld(g, 0.0), fld(g, 0.0),
                        SpectralField1D(g, bad), fld(g, 0.0))

    def test_swap_is_involution(self):
        g = Grid1D(32, 2 * np.pi)
        b = bundle_of(g, lp=band_noise(g, seed=1), lm=0.2, hp=-0.1,
                      hm=band_noise(g, seed=2), gp=0.3, gph=-0.4)
        back = b.swapped_layers().swapped_layers()
        for name in ("lam_plus1", "lam_minus1", "hat_plus1", "hat_minus1",
                     "grad_p_n", "grad_phat_n"):
            assert np.array_equal(getattr(back, name).samples,
                                  getattr(b, name).samples)


class TestSurfaceRhs:
    def test_zero_traces_wave_equation(self):
        g = Grid1D(64, 2 * np.pi)
        s = surface_of(0.3 * np.sin(3 * g.points), g, v=band_noise(g, seed=3))
        rhs = surface_rhs(s, bundle_of(g))
        assert np.max(np.abs(rhs.samples - deriv(s.f.samples, g, 2))) < 1e-13

    def test_constant_traces_closed_form(self):
        g = Grid1D(64, 2 * np.pi)
        c = 0.3
        s = surface_of(0.2 * np.sin(2 * g.points), g,
                       v=0.1 * np.cos(5 * g.points))
        rhs = surface_rhs(s, bundle_of(g, lp=c, lm=c, hp=c, hm=c))
        f2 = deriv(s.f.samples, g, 2)
        dv = deriv(s.v.samples, g)
        expect = (1.0 - c * c) * f2 - 2.0 * c * dv
        assert np.max(np.abs(rhs.samples - expect)) < 1e-12

    def test_groupings_agree_on_random_data(self):
        g = Grid1D(128, 4 * np.pi)
        for seed in range(20):
            rng = np.random.default_rng(seed)
            s = surface_of(0.3 * band_noise(g, seed=seed + 100, amp=0.05), g,
                           v=band_noise(g, seed=seed + 200, amp=0.1))
            b = bundle_of(g,
                          lp=band_noise(g, seed=seed, amp=0.2),
                          lm=band_noise(g, seed=seed + 1, amp=0.2),
                          hp=band_noise(g, seed=seed + 2, amp=0.2),
                          hm=band_noise(g, seed=seed + 3, amp=0.2),
                          gp=band_noise(g, seed=seed + 4, amp=0.2),
                          gph=band_noise(g, seed=seed + 5, amp=0.2))
            a = surface_rhs(s, b).samples
            c = surface_rhs_expanded(s, b).samples
            scale = max(1.0, np.max(np.abs(a)))
            assert np.max(np.abs(a - c)) / scale < 1e-12

    def test_exchange_symmetry(self):
        g = Grid1D(64, 2 * np.pi)
        s = surface_of(0.2 * np.sin(2 * g.points), g,
                       v=band_noise(g, seed=7, amp=0.1))
        b = bundle_of(g, lp=band_noise(g, seed=11, amp=0.3),
                      lm=band_noise(g, seed=12, amp=0.3),
                      hp=band_noise(g, seed=13, amp=0.3),
                      hm=band_noise(g, seed=14, amp=0.3),
                      gp=band_noise(g, seed=15, amp=0.3),
                      gph=band_noise(g, seed=16, amp=0.3))
        a = surface_rhs(s, b).samples
        c = surface_rhs(s, b.swapped_layers()).samples
        assert np.max(np.abs(a - c)) < 1e-15 * max(1.0, np.max(np.abs(a)))

    def test_linear_remainder_scales_quadratically(self):
        g = Grid1D(64, 2 * np.pi)
        f1 = band_noise(g, seed=21)
        v1 = band_noise(g, seed=22)
        unit = {k: band_noise(g, seed=23 + i)
                for i, k in enumerate(("lp", "lm", "hp", "hm", "gp", "gph"))}

        def remainder(eps):
            s = surface_of(eps * f1, g, v=eps * v1)
            b = bundle_of(g, **{k: eps * u for k, u in unit.items()})
            linear = (deriv(s.f.samples, g, 2)
                      - 0.5 * (b.grad_p_n.samples + b.grad_phat_n.samples))
            return np.max(np.abs(surface_rhs(s, b).samples - linear))

        eps = 1e-2
        ratio = remainder(eps) / remainder(eps / 2)
        assert 3.5 < ratio < 4.5


class TestKinematicResidual:
    def test_steady_zero_state(self):
        s = flat(n=64)
        res = kinematic_residual(s, zero_state(s))
        for r in res:
            assert np.max(np.abs(r.samples)) == 0.0

    def test_epsilon_injection_linear_response(self):
        s = flat(n=64)
        st = zero_state(s)
        eps = 1e-3
        lam_p = st.lam_plus.copy()
        lam_p[1] += eps
        st = ElsasserState(lam_p, st.lam_minus, st.hat_plus, st.hat_minus,
                           st.lower, st.upper)
        plus, minus, hat_plus, hat_minus = kinematic_residual(s, st)
        assert np.allclose(plus.samples, -eps, atol=1e-15)
        for r in (minus, hat_plus, hat_minus):
            assert np.max(np.abs(r.samples)) == 0.0

    def test_reconstructed_state_residuals_small(self):
        g = Grid1D(64, 2 * np.pi)
        s = surface_of(0.2 * np.sin(g.points), g,
                       v=0.05 * np.cos(2 * g.points))
        st = make_state(s, n2=33, amp=0.3, seed=5, flux=(0.1, -0.2, 0.05, 0.0))
        for r in kinematic_residual(s, st):
            assert np.max(np.abs(r.samples)) < 1e-8


class TestExtractTraces:
    def test_zero_state_zero_bundle(self):
        s = flat(n=32)
        st = zero_state(s)
        pp = PressurePair(np.zeros((9, 32)), np.zeros((9, 32)), {})
        b = extract_traces(st, s, pp)
        for name in ("lam_plus1", "lam_minus1", "hat_plus1", "hat_minus1",
                     "grad_p_n", "grad_phat_n"):
            assert np.max(np.abs(getattr(b, name).samples)) == 0.0

    def test_conormal_pressure_gradients(self):
        g = Grid1D(64, 2 * np.pi)
        s = surface_of(0.2 * np.sin(g.points), g)
        st = zero_state(s, n2=33)
        p = np.broadcast_to(st.lower.x2, (33, g.n)).copy()
        p_hat = st.upper.x2 ** 2
        b = extract_traces(st, s, PressurePair(p, p_hat, {}))
        assert np.max(np.abs(b.grad_p_n.samples - 1.0)) < 1e-9
        assert np.max(np.abs(b.grad_phat_n.samples - 2.0 * s.f.samples)) < 1e-8

    def test_first_components_match_rows(self):
        g = Grid1D(64, 2 * np.pi)
        s = surface_of(0.1 * np.sin(g.points), g, v=0.02 * np.cos(g.points))
        st = make_state(s, n2=17, amp=0.2, seed=9)
        pp = PressurePair(np.zeros((17, g.n)), np.zeros((17, g.n)), {})
        b = extract_traces(st, s, pp)
        assert np.array_equal(b.lam_plus1.samples, st.lam_plus[0][-1])
        assert np.array_equal(b.hat_minus1.samples, st.hat_minus[0][0])


class TestTraceTransport:
    def test_all_zero(self):
        g = Grid1D(32, 2 * np.pi)
        out = trace_transport_rhs(bundle_of(g), (fld(g, 0.0), fld(g, 0.0)))
        for v in out.values():
            assert np.max(np.abs(v.samples)) == 0.0

    def test_minus_advected_by_plus_constant(self):
        g = Grid1D(64, 2 * np.pi)
        c = 0.25
        prof = band_noise(g, seed=31)
        b = bundle_of(g, lp=c, lm=prof)
        out = trace_transport_rhs(b, (fld(g, 0.0), fld(g, 0.0)))
        expect = -(1.0 + c) * deriv(prof, g)
        assert np.max(np.abs(out["lam_minus1"].samples - expect)) < 1e-12
        # plus family moves the other way at unit speed when lm = prof
        expect_p = (1.0 - prof) * 0.0
        assert np.max(np.abs(out["lam_plus1"].samples - expect_p)) < 1e-12

    def test_plus_advected_by_minus_constant(self):
        g = Grid1D(64, 2 * np.pi)
        c = -0.4
        prof = band_noise(g, seed=32)
        b = bundle_of(g, lm=c, lp=prof, hm=c, hp=prof)
        out = trace_transport_rhs(b, (fld(g, 0.0), fld(g, 0.0)))
        expect = (1.0 - c) * deriv(prof, g)
        assert np.max(np.abs(out["lam_plus1"].samples - expect)) < 1e-12
        assert np.max(np.abs(out["hat_plus1"].samples - expect)) < 1e-12

    def test_pressure_forcing_is_additive(self):
        g = Grid1D(64, 2 * np.pi)
        phi = band_noise(g, seed=33)
        psi = band_noise(g, seed=34)
        out = trace_transport_rhs(bundle_of(g), (SpectralField1D(g, phi),
                                                 SpectralField1D(g, psi)))
        assert np.allclose(out["lam_plus1"].samples, -phi, atol=1e-14)
        assert np.allclose(out["lam_minus1"].samples, -phi, atol=1e-14)
        assert np.allclose(out["hat_plus1"].samples, -psi, atol=1e-14)
        assert np.allclose(out["hat_minus1"].samples, -psi, atol=1e-14)


class TestAmplitudeBound:
    def test_zero_perturbation_equality(self):
        times = np.linspace(0.0, 2.0, 21)
        hist = SurfaceHistory(times, np.full(21, 0.6), np.full(21, 0.4),
                              spacing=0.25)
        sup = WeightedSupSeries(np.zeros(21), np.zeros(21), mu=0.55)
        lhs, rhs = amplitude_bound(hist, sup)
        assert np.allclose(lhs, rhs)
        assert np.all(lhs <= rhs + 1e-15)

    def test_half_mass_factor_matches_oracle(self):
        hist = SurfaceHistory(np.array([0.0]), np.array([0.0]),
                              np.array([0.0]), spacing=1.0)
        sup = WeightedSupSeries(np.array([1.0]), np.array([1.0]), mu=0.55)
        _, rhs = amplitude_bound(hist, sup)
        assert abs(rhs[0] - oracles.QINF_REF) < 1e-8

    def test_family_minimum_is_used(self):
        times = np.array([0.0, 0.1])
        hist = SurfaceHistory(times, np.zeros(2), np.zeros(2), spacing=0.2)
        sup = WeightedSupSeries(np.array([3.0, 3.0]), np.array([1.0, 1.0]),
                                mu=0.55)
        _, rhs = amplitude_bound(hist, sup)
        assert abs(rhs[-1] - oracles.QINF_REF) < 1e-8

    def test_envelope_monotone_and_slope_growth(self):
        times = np.linspace(0.0, 1.0, 11)
        f_sup = np.full(11, 0.1)
        slope = np.linspace(0.0, 0.5, 11)
        sup = WeightedSupSeries(np.full(11, 0.2), np.full(11, 0.3), mu=0.55)
        hist = SurfaceHistory(times, f_sup, slope, spacing=0.2)
        lhs, rhs = amplitude_bound(hist, sup)
        assert np.all(np.diff(rhs) >= -1e-15)
        assert abs(rhs[-1] - (0.1 + oracles.QINF_REF * 1.5 * 0.2)) < 1e-8

    def test_sparse_history_warns(self):
        times = np.array([0.0, 0.5, 1.0])
        hist = SurfaceHistory(times, np.zeros(3), np.zeros(3), spacing=0.1)
        sup = WeightedSupSeries(np.zeros(3), np.zeros(3), mu=0.55)
        with pytest.warns(UserWarning):
            amplitude_bound(hist, sup)

    def test_dense_history_silent(self):
        times = np.linspace(0.0, 1.0, 21)
        hist = SurfaceHistory(times, np.zeros(21), np.zeros(21), spacing=0.05)
        sup = WeightedSupSeries(np.zeros(21), np.zeros(21), mu=0.55)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            amplitude_bound(hist, sup)

    def test_history_validation(self):
        with pytest.raises(ValueError):
            SurfaceHistory(np.array([0.0, 0.0]), np.zeros(2), np.zeros(2),
                           spacing=0.1)
        with pytest.raises(ValueError):
            WeightedSupSeries(np.zeros(3), np.zeros(3), mu=0.7)
        hist = SurfaceHistory(np.array([0.0]), np.zeros(1), np.zeros(1),
                              spacing=0.1)
        sup = WeightedSupSeries(np.zeros(2), np.zeros(2), mu=0.55)
        with pytest.raises(ValueError):
            amplitude_bound(hist, sup)


class TestWeightedTraceSup:
    def test_zero_state(self):
        s = flat(n=32)
        assert weighted_trace_sup(zero_state(s), WeightSpec(0.55)) == (0.0, 0.0)

    def test_matches_direct_computation(self):
        g = Grid1D(64, 32.0)
        s = surface_of(np.zeros(g.n), g)
        st = zero_state(s, n2=9, time=1.5)
        lam_p = st.lam_plus.copy()
        lam_p[0][-1] = np.exp(-g.points ** 2)
        lam_p[1][-1] = 0.3 * np.exp(-g.points ** 2)
        st = ElsasserState(lam_p, st.lam_minus, st.hat_plus, st.hat_minus,
                           st.lower, st.upper, time=1.5)
        mu = 0.55
        sup_p, sup_m = weighted_trace_sup(st, WeightSpec(mu))
        w = (1.0 + (g.points + 1.5) ** 2) ** mu
        mag = np.hypot(lam_p[0][-1], lam_p[1][-1])
        assert sup_m == 0.0
        assert abs(sup_p - np.max(w * mag)) < 1e-14
