"""Self-checks of the special functions and closed forms, with pass thresholds.

Each check returns a maximal residual; :func:`run_identities` collects them
into ``{name: {"residual", "threshold", "passed"}}``.
"""

import numpy as np

from .leading_order import (IN_S_CHECK, StripSpec, b0, default_delta0, frak_b, make_frame,
                            psi0, psi0_prime, strip_membership)
from .primitives import KINDS, integrand, primitive
from .special_fn import jacobi_sn, lattice_distance, theta

FD_STEP = 1e-5

THRESHOLDS = {
    "theta_quasi_periodicity": 1e-10,
    "sn_ode": 1e-8,
    "psi0_equation": 1e-7,
    "b0_equation": 1e-7,
    "frak_b_double_representation": 1e-10,
    "primitive_derivative": 1e-7,
    "primitive_normalization": 1e-12,
    "cn4_identity": 1e-9,
}


def _fd(f, u, h=FD_STEP):
    return (f(u + h) - f(u - h)) / (2 * h)


def _gl_path(a, b, n=64, panels=8):
    s, w = np.polynomial.legendre.leggauss(n)
    e = np.linspace(0, 1, panels + 1)
    z = np.concatenate([a + (b - a) * (0.5 * (lo + hi) + 0.5 * (hi - lo) * s)
                        for lo, hi in zip(e[:-1], e[1:])])
    dz = np.concatenate([(b - a) * 0.5 * (hi - lo) * w for lo, hi in zip(e[:-1], e[1:])])
    return z, dz


def _cell_points(bd, n=100, clearance=0.5, seed=0):
    """Points of the ``u`` cell at distance > ``clearance`` from ``sn = +-1, +-1/k`` and poles."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(0, 1, 6 * n) * bd.Omega_a + rng.uniform(0, 1, 6 * n) * bd.Omega_b
    v, tau = u / bd.Omega_a, bd.tau0
    sing = [0.25, 0.75, 0.25 + tau / 2, 0.75 + tau / 2, tau / 2, 0.5 + tau / 2]
    d = np.min([lattice_distance(v, p, tau) for p in sing], axis=0) * abs(bd.Omega_a)
    return u[d > clearance][:n]


def _strip_points(bd, frame, n=100, seed=7):
    strip = StripSpec(bd.phi, 20.0, 2.0, default_delta0(bd), frame)
    rng = np.random.default_rng(seed)
    t = rng.uniform(25, 80, 4 * n) + 1j * rng.uniform(-1.9, 1.9, 4 * n)
    x = np.exp(1j * bd.phi) * t
    return x[strip_membership(x, strip) == IN_S_CHECK][:n]


def theta_quasi_periodicity(bd, n=20):
    """Relative residual of ``theta(z + 1) = theta(z)`` and the ``z + tau`` law on the cell."""
    ctx, tau = bd.theta_ctx, bd.tau0
    s = np.linspace(-0.45, 0.45, n)
    z = s[:, None] + tau * s[None, :]
    t = theta(z, ctx)
    r1 = np.abs(theta(z + 1, ctx) - t) / np.abs(t)
    r2 = np.abs(theta(z + tau, ctx) - np.exp(-1j * np.pi * (tau + 2 * z)) * t) / np.abs(t)
    return float(max(r1.max(), r2.max()))


def sn_ode(bd):
    """``|sn'^2 - (1 - sn^2)(1 - A sn^2)|`` with ``sn'`` by central differences."""
    u = _cell_points(bd, 300, clearance=1.0)
    sn = jacobi_sn(u, bd.ell)
    d = _fd(lambda v: jacobi_sn(v, bd.ell), u)
    return float(np.max(np.abs(d ** 2 - (1 - sn ** 2) * (1 - bd.A * sn ** 2))))


def psi0_equation(bd, frame):
    """``|4 psi0'^2 - (1 - psi0^2)(A - psi0^2)|`` on checked-strip points."""
    x = _strip_points(bd, frame)
    p = psi0(x, frame)
    dp = _fd(lambda v: psi0(v, frame), x)
    return float(np.max(np.abs(4 * dp ** 2 - (1 - p ** 2) * (bd.A - p ** 2))))


def b0_equation(bd, frame):
    """``|b0' + 2(A - psi0^2) - 4 psi0'|`` on checked-strip points."""
    x = _strip_points(bd, frame)
    db = _fd(lambda v: b0(v, frame), x)
    return float(np.max(np.abs(db + 2 * (bd.A - psi0(x, frame) ** 2) - 4 * psi0_prime(x, frame))))


def frak_b_double_representation(bd, frame):
    """``frak_b`` against ``-(Omega_a/8)(b0(x) - b0(x0))``."""
    x = _strip_points(bd, frame)
    other = -(bd.Omega_a / 8) * (b0(x, frame) - b0(frame.x0, frame))
    return float(np.max(np.abs(frak_b(x, frame) - other)))


def primitive_derivative(kind, bd, constant_shift=0.0):
    """``|d/du primitive - integrand|`` on cell points; a constant shift cancels."""
    u = _cell_points(bd)
    d = _fd(lambda v: primitive(kind, v, bd) + constant_shift, u)
    return float(np.max(np.abs(d - integrand(kind, u, bd))))


def primitive_normalization(bd, constant_shift=0.0):
    """``max |primitive(kind, 0)|``: the constants make every primitive vanish at 0."""
    return float(max(abs(primitive(kind, 0.0, bd) + constant_shift) for kind in KINDS))


def cn4_identity(bd):
    """``A^2 int_0^{Omega_a/4} (1 - sn^2)^2 du`` against its closed form."""
    z, dz = _gl_path(0.0, bd.Omega_a / 4)
    sn = jacobi_sn(z, bd.ell)
    lhs = bd.A ** 2 * np.sum((1 - sn * sn) ** 2 * dz)
    rhs = (2 * bd.A - 1) * bd.E_a / 6 + bd.A * (1 - bd.A) * bd.Omega_a / 12
    return float(abs(lhs - rhs))


def run_identities(bd, x0=1 + 0.5j, beta0=0.3 - 0.2j, constant_shift=0.0):
    """All checks.  ``constant_shift`` corrupts the primitive constants."""
    frame = make_frame(bd, x0, beta0)
    res = {
        "theta_quasi_periodicity": theta_quasi_periodicity(bd),
        "sn_ode": sn_ode(bd),
        "psi0_equation": psi0_equation(bd, frame),
        "b0_equation": b0_equation(bd, frame),
        "frak_b_double_representation": frak_b_double_representation(bd, frame),
    }
    for kind in KINDS:
        res[f"primitive_derivative:{kind}"] = primitive_derivative(kind, bd, constant_shift)
    res["primitive_normalization"] = primitive_normalization(bd, constant_shift)
    res["cn4_identity"] = cn4_identity(bd)
    out = {}
    for name, r in res.items():
        thr = THRESHOLDS[name.split(":")[0]]
        out[name] = {"residual": r, "threshold": thr, "passed": bool(r <= thr)}
    return out
