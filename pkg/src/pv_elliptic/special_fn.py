"""Theta functions, their logarithmic derivatives and Jacobi ``sn``.

The theta function is the nome series

    theta(z, tau) = sum_n exp(i*pi*tau*n**2 + 2*i*pi*z*n),   Im tau > 0,

with ``theta(z + 1) = theta(z)`` and
``theta(z + tau) = exp(-i*pi*(tau + 2z)) * theta(z)``.  Its only zeros are
at ``z = 1/2 + tau/2`` modulo the lattice ``Z + tau*Z``.

All routines accept scalars or numpy arrays and return arrays of the
broadcast shape (0-d arrays for scalar input).
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DEFAULT_TOL = 1e-12
N_CAP = 64
_CHUNK = 16384


class SingularityError(ValueError):
    """Raised when an argument lies within the fuzz radius of a zero or pole."""


@dataclass(frozen=True)
class ThetaContext:
    """Period ratio ``tau`` with the truncation used for the theta series."""

    tau: complex
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        tau = complex(self.tau)
        if not tau.imag > 0:
            raise ValueError(f"theta needs Im tau > 0, got tau={tau}")
        object.__setattr__(self, "tau", tau)

    @property
    def q(self):
        return np.exp(1j * np.pi * self.tau)

    @property
    def N(self):
        """Base truncation, ``|q|**(N**2)`` below ``tol`` plus a margin of two."""
        n = np.ceil(np.sqrt(np.log(self.tol) / np.log(abs(self.q)))) + 2
        return int(min(n, N_CAP))

    def terms_for(self, imag_bound):
        """Truncation for arguments with ``|Im z| <= imag_bound``.

        The summand modulus is ``exp(-pi Im(tau) n^2 - 2 pi n Im z)``, so the
        Gaussian peak shifts by ``|Im z| / Im tau`` terms.
        """
        shift = imag_bound / self.tau.imag
        n = int(np.ceil(self.N + shift))
        if n > N_CAP or np.pi * self.tau.imag * shift ** 2 > 600:
            raise ValueError(
                f"theta series needs {n} terms or overflows at |Im z| = {imag_bound:.3g}; "
                "reduce the argument first")
        return n


def reduce_lattice(z, tau):
    """Split ``z = zr + m + n*tau`` with ``zr`` in the cell centred at the origin."""
    z = np.asarray(z, dtype=complex)
    n = np.round(z.imag / tau.imag)
    z = z - n * tau
    m = np.round(z.real)
    return z - m, m, n


def theta_derivs(z, ctx, order=0):
    """Return ``[theta, theta', ..., theta^(order)]`` stacked on axis 0.

    Derivatives are taken termwise, ``d/dz`` bringing down ``2*pi*i*n``.
    """
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    nt = ctx.terms_for(float(np.max(np.abs(flat.imag))) if flat.size else 0.0)
    n = np.arange(-nt, nt + 1)
    quad = np.exp(1j * np.pi * ctx.tau * n * n)
    fac = [(2j * np.pi * n) ** d for d in range(order + 1)]
    out = np.empty((order + 1, flat.size), dtype=complex)
    for lo in range(0, flat.size, _CHUNK):
        blk = quad * np.exp(2j * np.pi * np.outer(flat[lo:lo + _CHUNK], n))
        for d in range(order + 1):
            out[d, lo:lo + _CHUNK] = blk @ fac[d]
    return out.reshape((order + 1,) + z.shape)


def theta(z, ctx):
    """The truncated theta series at ``z`` (argument should be lattice-reduced)."""
    return theta_derivs(z, ctx, 0)[0]


def theta_prime(z, ctx):
    """Termwise derivative of the theta series."""
    return theta_derivs(z, ctx, 1)[1]


def theta_logderiv(z, ctx, order=0, fuzz=None):
    """``L = theta'/theta`` (``order=0``) or its first/second derivative.

    The argument is reduced to the central cell; the quasi-periodicity gives
    ``L(z + m + n*tau) = L(z) - 2*pi*i*n`` while ``L'`` and ``L''`` are
    doubly periodic.  With ``fuzz`` set, raises :class:`SingularityError`
    when ``z`` is within ``fuzz`` of a theta zero.
    """
    zr, _, n = reduce_lattice(z, ctx.tau)
    if fuzz is not None:
        d = lattice_distance(zr, 0.5 + 0.5 * ctx.tau, ctx.tau)
        if np.any(d < fuzz):
            raise SingularityError("argument within fuzz of a theta zero")
    t = theta_derivs(zr, ctx, order + 1)
    l1 = t[1] / t[0]
    if order == 0:
        return l1 - 2j * np.pi * n
    l2 = t[2] / t[0]
    if order == 1:
        return l2 - l1 ** 2
    if order == 2:
        return t[3] / t[0] - 3 * l2 * l1 + 2 * l1 ** 3
    raise ValueError("order must be 0, 1 or 2")


def lattice_distance(z, p, tau):
    """Distance from ``z`` to the nearest point of ``p + Z + tau*Z``."""
    w, _, _ = reduce_lattice(np.asarray(z, dtype=complex) - p, tau)
    best = np.abs(w)
    for a in (-1, 0, 1):
        for b in (-1, 0, 1):
            if a or b:
                best = np.minimum(best, np.abs(w + a + b * tau))
    return best


@dataclass(frozen=True)
class EllipticContext:
    """Jacobi data: modulus ``k`` and periods with ``4K = Omega_a``, ``2iK' = Omega_b``.

    ``sn`` is a theta quotient in ``v = u/Omega_a`` with the shifts
    ``{1/2, nu0, nu0 + 1/2}``, ``nu0 = (1 + tau)/2``::

        sn(u) = c_sn * exp(2 pi i v) * theta(v+nu0) theta(v+nu0+1/2)
                                     / (theta(v) theta(v+1/2))

    Zeros sit at ``v = 0, 1/2`` and poles at ``v = tau/2, 1/2 + tau/2``,
    i.e. ``u = 0, 2K`` and ``u = iK', 2K + iK'``; the exponential factor
    restores invariance under ``v -> v + tau``.
    """

    k: complex
    Omega_a: complex
    Omega_b: complex
    tol: float = DEFAULT_TOL
    theta_ctx: ThetaContext = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "k", complex(self.k))
        object.__setattr__(self, "Omega_a", complex(self.Omega_a))
        object.__setattr__(self, "Omega_b", complex(self.Omega_b))
        object.__setattr__(self, "theta_ctx",
                           ThetaContext(self.Omega_b / self.Omega_a, self.tol))

    @property
    def K_quarter(self):
        return self.Omega_a / 4

    @property
    def Kprime_half(self):
        return self.Omega_b / 2j

    @property
    def tau(self):
        return self.theta_ctx.tau

    @property
    def nu0(self):
        return 0.5 * (1 + self.tau)

    @cached_property
    def c_sn(self):
        """Normalization giving ``sn'(0) = 1``."""
        ctx, nu = self.theta_ctx, self.nu0
        t0 = theta_derivs(np.array([0.0, 0.5]), ctx, 0)[0]
        tn = theta_derivs(np.array([nu, nu + 0.5]), ctx, 1)
        return complex(self.Omega_a * t0[0] * t0[1] / (tn[1, 0] * tn[0, 1]))


def _sn_parts(u, ell, fuzz):
    v, _, _ = reduce_lattice(np.asarray(u, dtype=complex) / ell.Omega_a, ell.tau)
    if fuzz is not None:
        tau = ell.tau
        d = np.minimum(lattice_distance(v, 0.5 * tau, tau),
                       lattice_distance(v, 0.5 + 0.5 * tau, tau))
        if np.any(d * abs(ell.Omega_a) < fuzz):
            raise SingularityError("argument within fuzz of a pole of sn")
    nu = ell.nu0
    ctx = ell.theta_ctx
    a = theta_derivs(v + nu, ctx, 1)
    b = theta_derivs(v + nu + 0.5, ctx, 1)
    c = theta_derivs(v, ctx, 1)
    d = theta_derivs(v + 0.5, ctx, 1)
    return v, a, b, c, d


def jacobi_sn(u, ell, fuzz=None):
    """``sn(u; k)`` for the context's complex modulus.

    ``u`` is reduced modulo ``(4K, 2iK')`` internally.  With ``fuzz`` set,
    raises :class:`SingularityError` near the pole lattice.
    """
    v, a, b, c, d = _sn_parts(u, ell, fuzz)
    return ell.c_sn * np.exp(2j * np.pi * v) * a[0] * b[0] / (c[0] * d[0])


def jacobi_sn_prime(u, ell, fuzz=None):
    """``d sn/du`` by the quotient rule on the theta quotient."""
    v, a, b, c, d = _sn_parts(u, ell, fuzz)
    num = a[0] * b[0]
    dnum = a[1] * b[0] + a[0] * b[1]
    den = c[0] * d[0]
    dden = c[1] * d[0] + c[0] * d[1]
    core = 2j * np.pi * num / den + (dnum * den - num * dden) / den ** 2
    return ell.c_sn * np.exp(2j * np.pi * v) * core / ell.Omega_a
