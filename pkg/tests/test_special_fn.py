import mpmath as mp
import numpy as np
import pytest

from pv_elliptic.special_fn import (
    EllipticContext,
    SingularityError,
    ThetaContext,
    jacobi_sn,
    jacobi_sn_prime,
    lattice_distance,
    theta,
    theta_logderiv,
    theta_prime,
)

TAU = 0.2 + 1.1j


def mp_theta(z, tau, derivative=0):
    """Oracle: theta(z, tau) = theta_3(pi z, q) in mpmath's convention."""
    q = mp.exp(1j * mp.pi * tau)
    return complex(mp.jtheta(3, mp.pi * z, q, derivative) * mp.pi ** derivative)


@pytest.fixture
def ctx():
    return ThetaContext(TAU)


def cell_grid(tau, n=20):
    # open cell: the corners +-1/2 +- tau/2 are zeros of theta
    s = np.linspace(-0.45, 0.45, n)
    return s[:, None] + tau * s[None, :]


def test_theta_at_tau_i_matches_series_oracle():
    with mp.workdps(30):
        ref = mp.nsum(lambda n: mp.exp(-mp.pi * n * n), [-mp.inf, mp.inf])
    assert abs(theta(0.0, ThetaContext(1j)) - complex(ref)) < 1e-13
    assert abs(theta(0.0, ThetaContext(1j)) - 1.0864348112133080) < 1e-13


def test_theta_matches_mpmath_on_cell(ctx):
    for z in [0.1 + 0.05j, -0.3 + 0.4j, 0.45 - 0.5j]:
        assert abs(theta(z, ctx) - mp_theta(z, TAU)) < 1e-12


def test_theta_quasi_periodicity_grid(ctx):
    z = cell_grid(TAU)
    t = theta(z, ctx)
    r1 = np.abs(theta(z + 1, ctx) - t) / np.abs(t)
    r2 = np.abs(theta(z + TAU, ctx) - np.exp(-1j * np.pi * (TAU + 2 * z)) * t) / np.abs(t)
    assert r1.max() < 1e-10
    assert r2.max() < 1e-10


def test_theta_prime_properties(ctx):
    assert abs(theta_prime(0.0, ctx)) < 1e-13
    z = 0.3 + 0.1j
    assert abs(theta_prime(z + 1, ctx) - theta_prime(z, ctx)) < 1e-12
    with mp.workdps(30):
        fd = mp.diff(lambda s: mp.jtheta(3, mp.pi * s, mp.exp(1j * mp.pi * TAU)), z)
    assert abs(theta_prime(z, ctx) - complex(fd)) < 10 * ctx.tol


def test_theta_prime_central_difference(ctx):
    z, h = 0.3 + 0.1j, 1e-5
    fd = (theta(z + h, ctx) - theta(z - h, ctx)) / (2 * h)
    assert abs(theta_prime(z, ctx) - fd) < 1e-9


def test_logderiv_shifts(ctx):
    z = 0.21 - 0.17j
    assert abs(theta_logderiv(0.0, ctx)) < 1e-13
    assert abs(theta_logderiv(z + 1, ctx) - theta_logderiv(z, ctx)) < 1e-12
    assert abs(theta_logderiv(z + TAU, ctx) - (theta_logderiv(z, ctx) - 2j * np.pi)) < 1e-12
    assert abs(theta_logderiv(z - 3 * TAU, ctx) - (theta_logderiv(z, ctx) + 6j * np.pi)) < 1e-11


def test_logderiv_higher_orders_by_differences(ctx):
    z, h = 0.21 - 0.17j, 1e-5
    L = lambda s, o=0: theta_logderiv(s, ctx, o)
    assert abs(L(z, 1) - (L(z + h) - L(z - h)) / (2 * h)) < 1e-8
    assert abs(L(z, 2) - (L(z + h, 1) - L(z - h, 1)) / (2 * h)) < 1e-7


def test_logderiv_fuzz_near_zero(ctx):
    zero = 0.5 + 0.5 * TAU
    with pytest.raises(SingularityError):
        theta_logderiv(zero + 1e-9, ctx, fuzz=1e-6)
    theta_logderiv(zero + 0.1, ctx, fuzz=1e-6)


def test_invalid_tau_and_cap():
    with pytest.raises(ValueError):
        ThetaContext(0.3 - 0.1j)
    with pytest.raises(ValueError):
        theta(40j, ThetaContext(1j))


def test_truncation_rule():
    c = ThetaContext(1j)
    assert c.N == int(np.ceil(np.sqrt(np.log(1e-12) / np.log(abs(c.q))))) + 2


def test_sn_special_values(ell, bd):
    assert abs(jacobi_sn(0.0, ell)) < 1e-14
    assert abs(jacobi_sn_prime(0.0, ell) - 1) < 1e-12
    assert abs(jacobi_sn(bd.Omega_a / 4, ell) - 1) < 1e-12
    assert abs(jacobi_sn(bd.Omega_a / 4 + bd.Omega_b / 2, ell) - 1 / bd.k) < 1e-11
    u = 0.37 + 0.21j
    assert abs(jacobi_sn(u + bd.Omega_a / 2, ell) + jacobi_sn(u, ell)) < 1e-12


def test_sn_matches_mpmath(ell, bd):
    for u in [0.3 + 0.2j, 1.7 - 0.4j, -0.9 + 1.1j]:
        ref = complex(mp.ellipfun("sn", u, m=bd.A))
        assert abs(jacobi_sn(u, ell) - ref) < 1e-11


def test_sn_ode_residual(ell, bd):
    s = np.linspace(0.02, 0.98, 20)
    u = (s[:, None] * bd.Omega_a + s[None, :] * bd.Omega_b).ravel()
    v, tau = u / bd.Omega_a, bd.tau0
    dist = np.minimum(lattice_distance(v, 0.5 * tau, tau),
                      lattice_distance(v, 0.5 + 0.5 * tau, tau)) * abs(bd.Omega_a)
    u = u[dist > 1.0]
    assert u.size > 250
    h = 1e-5
    sn = jacobi_sn(u, ell)
    d = (jacobi_sn(u + h, ell) - jacobi_sn(u - h, ell)) / (2 * h)
    res = np.abs(d ** 2 - (1 - sn ** 2) * (1 - bd.A * sn ** 2))
    assert res.max() < 1e-8
    dq = jacobi_sn_prime(u, ell)
    assert np.max(np.abs(dq ** 2 - (1 - sn ** 2) * (1 - bd.A * sn ** 2))) < 1e-10


def test_sn_lattice_reduction(ell, bd):
    u = 0.37 + 0.21j
    shifted = u + 2 * bd.Omega_a - 3 * bd.Omega_b
    assert abs(jacobi_sn(shifted, ell) - jacobi_sn(u, ell)) < 1e-11


def test_sn_pole_is_signalled(ell, bd):
    with pytest.raises(SingularityError):
        jacobi_sn(bd.Omega_b / 2 + 1e-14, ell, fuzz=1e-10)


def test_elliptic_context_conventions(bd):
    e = EllipticContext(bd.k, bd.Omega_a, bd.Omega_b)
    assert abs(4 * e.K_quarter - bd.Omega_a) < 1e-14
    assert abs(2j * e.Kprime_half - bd.Omega_b) < 1e-14
