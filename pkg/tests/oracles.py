"""Independent numerical oracles and frozen reference values.

Everything here deliberately avoids the package's FFT code paths: kernels come
from scipy.special, integrals from adaptive quadrature, so agreement with the
implementation is a genuine two-route check.
"""

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma, kv

# -- frozen constants (generated once by this module's own routines) ----------

MU_REF = 0.55
# closed Beta-form of int_R <z>^(-2 mu) dz at mu = 0.55
M_REF = 21.35344933248003
# int_0^inf <tau>^(-2 mu) dtau at mu = 0.55
QINF_REF = 10.676724666240677

# <d1>^(1/2) of exp(-(x/2)^2), singular-integral quadrature at chosen points.
# Cross-checked against a 2^16-point whole-line transform to <= 1e-9.
FRAC_HALF_GAUSS_SIGMA = 2.0
FRAC_HALF_GAUSS_REF = {
    0.00: 1.0907306088267594,
    0.75: 0.92990975459462177,
    1.50: 0.5725572171678035,
    3.00: 0.069129714956320379,
    6.00: -0.0012467069952814443,
}


def mass_constant_closed(mu: float) -> float:
    """Closed form sqrt(pi)*Gamma(mu-1/2)/Gamma(mu) of the weight-mass integral."""
    return float(np.sqrt(np.pi) * gamma(mu - 0.5) / gamma(mu))


def q_direct(theta: float, mu: float) -> float:
    """Direct quadrature of the ghost phase, bypassing the cached table."""
    v, _ = quad(lambda tau: (1.0 + tau * tau) ** (-mu), 0.0, abs(theta),
                epsabs=1e-13, epsrel=1e-12)
    return float(np.sign(theta) * v)


# -- Bessel-potential singular-integral route for <d1>^s ----------------------

def bessel_kernel(s: float):
    """Return (B_{2-s}, d^2 B_{2-s}) as scalar callables, x != 0 handled exactly.

    B_a is the kernel with symbol (1+xi^2)^(-a/2); in closed form
    B_a(x) = |x|^nu K_nu(|x|) / (sqrt(pi) Gamma(a/2) 2^nu), nu = (a-1)/2.
    """
    nu = (1.0 - s) / 2.0
    c = 1.0 / (np.sqrt(np.pi) * gamma((2.0 - s) / 2.0) * 2.0 ** nu)
    b0 = c * 0.5 * gamma(nu) * 2.0 ** nu  # limit z->0 of z^nu K_nu(z) times c

    def B(z: float) -> float:
        z = abs(z)
        if z < 1e-12:
            return b0
        return c * z ** nu * kv(nu, z)

    def d2B(z: float) -> float:
        z = abs(z)
        return c * (-nu * z ** (nu - 1.0) * kv(nu - 1.0, z)
                    + z ** nu * (kv(nu - 2.0, z) + kv(nu, z)) / 2.0)

    return B, d2B


def fractional_derivative_quadrature(h, x: float, s: float) -> float:
    """<d1>^s h at one point via the two-term singular-integral form.

    Smooth term: convolution with B_{2-s}. Principal value handled by the
    symmetric pairing int_0^inf d2B(d) (2h(x) - h(x+d) - h(x-d)) dd, whose
    integrand is O(d^(1-s)) near zero.
    """
    B, d2B = bessel_kernel(s)
    g = lambda u: B(u) * h(x - u)
    sm_neg, _ = quad(g, -np.inf, 0.0, epsabs=1e-14, epsrel=1e-12, limit=400)
    sm_pos, _ = quad(g, 0.0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=400)
    f = lambda d: d2B(d) * (2.0 * h(x) - h(x + d) - h(x - d))
    s0, _ = quad(f, 0.0, 1e-3, epsabs=1e-15, epsrel=1e-10, limit=400,
                 points=[1e-8, 1e-5])
    s1, _ = quad(f, 1e-3, 1.0, epsabs=1e-15, epsrel=1e-12, limit=400)
    s2, _ = quad(f, 1.0, np.inf, epsabs=1e-15, epsrel=1e-12, limit=400)
    return sm_neg + sm_pos + s0 + s1 + s2


# -- separable elliptic oracles ------------------------------------------------

def dn_flat_symbol(k: float, depth: float) -> float:
    """Flat-interface Dirichlet-to-Neumann symbol for a wall-bounded layer."""
    k = abs(k)
    return k * np.tanh(k * depth)


def poisson_mode_dirichlet(k: float, a: float, b: float, g,
                           n_quad: int = 4001, dirichlet=(0.0, 0.0)):
    """Solve u'' - k^2 u = g(y) on [a, b] with Dirichlet end values, by
    dense finite differences at high resolution (independent of the
    Chebyshev route).

    Returns a callable interpolant.
    """
    y = np.linspace(a, b, n_quad)
    hgt = y[1] - y[0]
    main = -2.0 / hgt ** 2 - k * k
    rhs = np.array([g(t) for t in y])
    rhs[1] -= dirichlet[0] / hgt ** 2
    rhs[-2] -= dirichlet[1] / hgt ** 2
    # interior tridiagonal solve
    nn = n_quad - 2
    ab_ = np.zeros((3, nn))
    ab_[0, 1:] = 1.0 / hgt ** 2
    ab_[1, :] = main
    ab_[2, :-1] = 1.0 / hgt ** 2
    from scipy.linalg import solve_banded
    ui = solve_banded((1, 1), ab_, rhs[1:-1])
    u = np.zeros(n_quad)
    u[0], u[-1] = dirichlet
    u[1:-1] = ui
    from scipy.interpolate import CubicSpline
    return CubicSpline(y, u)
