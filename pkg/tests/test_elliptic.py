import numpy as np
import pytest

from cvsheet.spectral import Grid1D, SpectralField1D, deriv
from cvsheet.geometry import build_map, metric_terms
from cvsheet.elliptic import (
    StripProblem, solve_mixed_bvp, solve_two_layer, assemble_jump,
    solve_pressure, pressure_identity_residual, decompose_pressure,
    dirichlet_neumann, PressurePair,
)
from cvsheet.fields import ElsasserState

import oracles
from states import surface_of, flat, make_state


class TestStripSolver:
    def test_laplace_zero_data(self):
        s = flat()
        strip = build_map(s, "lower", 17)
        m = metric_terms(strip)
        z = np.zeros(s.grid.n)
        u = solve_mixed_bvp(StripProblem(strip, m, np.zeros((17, s.grid.n)),
                                         ("neumann", z), ("dirichlet", z)))
        assert np.max(np.abs(u)) < 1e-13

    def test_flat_harmonic_extension(self):
        s = flat()
        g = s.grid
        strip = build_map(s, "lower", 33)
        m = metric_terms(strip)
        k = 3.0
        exact = np.cos(k * g.points[None, :]) * np.cosh(k * (strip.x2 + 1.0))
        u = solve_mixed_bvp(StripProblem(
            strip, m, np.zeros_like(exact), ("neumann", np.zeros(g.n)),
            ("dirichlet", exact[-1].copy()), tol=1e-9))
        assert np.max(np.abs(u - exact)) < 1e-8

    def test_flat_poisson_manufactured(self):
        s = flat()
        g = s.grid
        strip = build_map(s, "lower", 33)
        m = metric_terms(strip)
        k = 2.0
        exact = np.cos(k * g.points[None, :]) * np.cos(np.pi * (strip.x2 + 1.0))
        rhs = -(k * k + np.pi ** 2) * exact
        u = solve_mixed_bvp(StripProblem(
            strip, m, rhs, ("neumann", np.zeros(g.n)),
            ("dirichlet", exact[-1].copy()), tol=1e-9))
        assert np.max(np.abs(u - exact)) < 1e-8

    @pytest.mark.parametrize("which", ["lower", "upper"])
    def test_curved_strip_manufactured(self, which):
        g = Grid1D(64, 8.0)
        s = surface_of(0.3 * np.sin(2 * np.pi * g.points / 8.0), g)
        strip = build_map(s, which, 33)
        m = metric_terms(strip)
        k = 2 * np.pi / 8.0
        wall = -1.0 if which == "lower" else 1.0

        def exact_fn(x1, x2):
            return np.cos(k * x1) * np.cos(np.pi * (x2 - wall))

        exact = exact_fn(g.points[None, :], strip.x2)
        rhs = -(k * k + np.pi ** 2) * exact
        surf_row = -1 if which == "lower" else 0
        u = solve_mixed_bvp(StripProblem(
            strip, m, rhs, ("neumann", np.zeros(g.n)),
            ("dirichlet", exact[surf_row].copy()), tol=1e-10))
        assert np.max(np.abs(u - exact)) < 1e-7

    def test_pure_neumann_rejected(self):
        s = flat()
        strip = build_map(s, "lower", 17)
        m = metric_terms(strip)
        z = np.zeros(s.grid.n)
        with pytest.raises(ValueError):
            solve_mixed_bvp(StripProblem(strip, m, np.zeros((17, s.grid.n)),
                                         ("neumann", z), ("neumann", z)))


class TestTwoLayer:
    def test_manufactured_globally_smooth(self):
        g = Grid1D(64, 8.0)
        s = surface_of(0.25 * np.sin(2 * np.pi * g.points / 8.0), g)
        lo = build_map(s, "lower", 33)
        up = build_map(s, "upper", 33)
        k = 2 * np.pi / 8.0

        def exact_fn(x2):
            return np.cos(k * g.points[None, :]) * np.cos(np.pi * (x2 + 1.0))

        rhs_l = -(k * k + np.pi ** 2) * exact_fn(lo.x2)
        rhs_u = -(k * k + np.pi ** 2) * exact_fn(up.x2)
        p, p_hat, report = solve_two_layer(lo, up, rhs_l, rhs_u,
                                           np.zeros(g.n), tol=1e-10)
        assert np.max(np.abs(p - exact_fn(lo.x2))) < 1e-7
        assert np.max(np.abs(p_hat - exact_fn(up.x2))) < 1e-7
        assert report["continuity"] < 1e-9
        assert report["jump"] < 1e-9


class _Bundle:
    def __init__(self, grid, lp, lm, hp, hm):
        as_field = lambda a: SpectralField1D(grid, np.asarray(a, float))
        self.lam_plus1 = as_field(lp)
        self.lam_minus1 = as_field(lm)
        self.hat_plus1 = as_field(hp)
        self.hat_minus1 = as_field(hm)


class TestJump:
    def test_zero_traces(self):
        g = Grid1D(32, 2 * np.pi)
        s = surface_of(0.2 * np.sin(g.points), g, v=0.1 * np.cos(g.points))
        z = np.zeros(g.n)
        jump = assemble_jump(s, _Bundle(g, z, z, z, z))
        assert np.max(np.abs(jump.g_jump.samples)) == 0.0

    def test_equal_traces_cancel(self):
        g = Grid1D(32, 2 * np.pi)
        s = surface_of(0.2 * np.sin(g.points), g, v=0.1 * np.cos(g.points))
        tr = 0.3 * np.cos(g.points) + 0.1
        jump = assemble_jump(s, _Bundle(g, tr, 2 * tr, tr, 2 * tr))
        assert np.max(np.abs(jump.g_jump.samples)) < 1e-14

    def test_single_mode_hand_expansion(self):
        g = Grid1D(32, 2 * np.pi)
        x = g.points
        a, b, c1, c2, c3 = 0.11, 0.07, 0.5, 0.4, 0.3
        s = surface_of(a * np.cos(x), g, v=b * np.sin(x))
        lp, lm, hm = c1 * np.cos(x), c2 * np.sin(x), c3 * np.cos(x)
        jump = assemble_jump(s, _Bundle(g, lp, lm, np.zeros(g.n), hm))
        fpp = -a * np.cos(x)
        d_minus = deriv(b * np.sin(x) + a * np.sin(x), g)
        d_plus = deriv(b * np.sin(x) - a * np.sin(x), g)
        expected = -(lp * lm * fpp + lp * d_minus + (lm - hm) * d_plus)
        assert np.max(np.abs(jump.g_jump.samples - expected)) < 1e-12


class TestPressure:
    def test_zero_state(self):
        s = flat()
        st = make_state(s, n2=17)
        pp = solve_pressure(st, s)
        assert np.max(np.abs(pp.p)) < 1e-11
        assert np.max(np.abs(pp.p_hat)) < 1e-11

    def test_one_sided_data_constant_zero(self):
        # lam_minus = hat_minus = 0 kills the source and the jump when the
        # interface is flat and still, so the identity pins p = p_hat = 0
        g = Grid1D(64, 16.0)
        s = surface_of(np.zeros(g.n), g)
        lo = build_map(s, "lower", 33)
        up = build_map(s, "upper", 33)
        y = lo.x2
        bump = np.exp(-(g.points / 2.0) ** 2)
        psi = 0.3 * bump[None, :] * (y * (y + 1.0)) ** 2
        from cvsheet.geometry import dx1, dx2
        m = metric_terms(lo)
        lam_p = np.stack([-dx2(psi, lo, m), dx1(psi, lo, m)])
        zeros_l = np.zeros_like(lam_p)
        zeros_u = np.zeros((2, 33, g.n))
        st = ElsasserState(lam_p, zeros_l, zeros_u, zeros_u, lo, up)
        pp = solve_pressure(st, s)
        assert np.max(np.abs(pp.p)) < 1e-9
        assert np.max(np.abs(pp.p_hat)) < 1e-9

    def test_identity_residual_after_solve(self):
        g = Grid1D(64, 8.0)
        s = surface_of(0.15 * np.sin(2 * np.pi * g.points / 8.0), g,
                       v=0.05 * np.cos(2 * np.pi * g.points / 8.0))
        st = make_state(s, amp=0.2, seed=3, flux=(0.1, -0.05, 0.02, 0.0))
        pp = solve_pressure(st, s, tol=1e-10)
        res = pressure_identity_residual(pp, st, s)
        assert np.max(np.abs(res.samples)) < 1e-8

    def test_constant_shift_moves_residual_linearly(self):
        g = Grid1D(32, 8.0)
        s = surface_of(0.1 * np.sin(2 * np.pi * g.points / 8.0), g)
        st = make_state(s, amp=0.1, seed=1)
        pp = solve_pressure(st, s)
        base = pressure_identity_residual(pp, st, s).samples
        c = 0.37
        shifted = PressurePair(pp.p + c, pp.p_hat + c, pp.report)
        res = pressure_identity_residual(shifted, st, s).samples
        assert np.max(np.abs(res - base - 2.0 * c)) < 1e-10


class TestDecompose:
    def test_zero_state(self):
        s = flat(32)
        st = make_state(s, n2=17)
        pp = solve_pressure(st, s)
        harm, forced = decompose_pressure(pp, st, s)
        for part in (harm, forced):
            assert np.max(np.abs(part.p)) < 1e-10
            assert np.max(np.abs(part.p_hat)) < 1e-10

    def test_source_free_all_harmonic(self):
        g = Grid1D(32, 8.0)
        s = surface_of(0.1 * np.sin(2 * np.pi * g.points / 8.0), g)
        lo = build_map(s, "lower", 17)
        up = build_map(s, "upper", 17)
        zero = np.zeros((2, 17, g.n))
        st = ElsasserState(zero, zero, zero, zero, lo, up)
        jump = 0.2 * np.cos(2 * np.pi * g.points / 8.0)
        p, p_hat, _ = solve_two_layer(lo, up, np.zeros((17, g.n)),
                                      np.zeros((17, g.n)), jump, tol=1e-10)
        pp = PressurePair(p, p_hat, {})
        harm, forced = decompose_pressure(pp, st, s, tol=1e-10)
        assert np.max(np.abs(forced.p)) < 1e-10
        assert np.max(np.abs(forced.p_hat)) < 1e-10
        assert np.max(np.abs(harm.p - pp.p)) < 1e-8
        assert np.max(np.abs(harm.p_hat - pp.p_hat)) < 1e-8

    def test_parts_sum_to_whole(self):
        g = Grid1D(64, 8.0)
        s = surface_of(0.12 * np.sin(2 * np.pi * g.points / 8.0), g,
                       v=0.03 * np.cos(2 * np.pi * g.points / 8.0))
        st = make_state(s, amp=0.25, seed=7)
        pp = solve_pressure(st, s, tol=1e-10)
        harm, forced = decompose_pressure(pp, st, s, tol=1e-10)
        assert np.max(np.abs(harm.p + forced.p - pp.p)) < 1e-8
        assert np.max(np.abs(harm.p_hat + forced.p_hat - pp.p_hat)) < 1e-8


class TestDirichletNeumann:
    def test_constant_maps_to_zero(self):
        s = flat(32)
        phi = SpectralField1D(s.grid, np.full(32, 2.5))
        for side in ("lower", "upper"):
            out = dirichlet_neumann(s, phi, side, n2=17)
            assert np.max(np.abs(out.samples)) < 1e-11

    def test_flat_symbol_single_mode(self):
        s = flat(64)
        g = s.grid
        for side in ("lower", "upper"):
            for k in (1, 3, 7):
                phi = SpectralField1D(g, np.cos(k * g.points))
                out = dirichlet_neumann(s, phi, side, n2=33)
                expect = oracles.dn_flat_symbol(float(k), 1.0) * phi.samples
                assert np.max(np.abs(out.samples - expect)) < 1e-9

    def test_flat_self_adjoint(self):
        s = flat(64)
        g = s.grid
        rng = np.random.default_rng(11)
        c = np.zeros(33, complex)
        c[1:12] = rng.normal(size=11) + 1j * rng.normal(size=11)
        phi = SpectralField1D.from_coeffs(g, c)
        c2 = np.zeros(33, complex)
        c2[1:12] = rng.normal(size=11) + 1j * rng.normal(size=11)
        chi = SpectralField1D.from_coeffs(g, c2)
        nphi = dirichlet_neumann(s, phi, "lower", n2=33)
        nchi = dirichlet_neumann(s, chi, "lower", n2=33)
        lhs = np.sum(nphi.samples * chi.samples) * g.spacing
        rhs = np.sum(phi.samples * nchi.samples) * g.spacing
        assert lhs == pytest.approx(rhs, abs=1e-9)
