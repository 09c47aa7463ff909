"""The leading-order elliptic frame on the ray ``x = e^{i phi} t``.

With ``u = (x - x0)/2`` and ``z = (x - x0)/(2 Omega_a)``::

    psi0(x) = k sn(u)
    b0(x)   = beta0 - 2 E_a x / Omega_a - (8/Omega_a) L(z)
    frak_b  = (E_a/4)(x - x0) + L(z) = -(Omega_a/8)(b0(x) - b0(x0))

where ``L = theta'/theta`` at ``tau0 = Omega_b/Omega_a``.  Poles of ``psi0``
form ``P0 = x0 + Omega_a Z + Omega_b (2Z + 1)``; the points where
``sn = +-1, +-1/k`` form ``Q = x0 + (Z + 1/2) Omega_a + Omega_b Z``.
"""

from dataclasses import dataclass

import numpy as np

from .special_fn import jacobi_sn, jacobi_sn_prime, lattice_distance, theta_logderiv

IN_S_CHECK = "in_S_check"
IN_S = "in_S"
OUTSIDE = "outside"


@dataclass(frozen=True)
class Frame:
    """Integration constants of one elliptic representation.

    ``x0`` is stored reduced to ``{s1 2 Omega_a + s2 2 Omega_b : s in [0, 1)}``.
    Use :func:`make_frame` so that ``beta0`` is adjusted to keep ``b0(x)``
    unchanged under the reduction.
    """

    bd: object
    x0: complex
    beta0: complex

    @property
    def b0_at_x0(self):
        return self.beta0 - 2 * self.bd.E_a * self.x0 / self.bd.Omega_a


def reduce_x0(x0, bd):
    """``(x0_red, m, n)`` with ``x0 = x0_red + 2m Omega_a + 2n Omega_b``."""
    Oa2, Ob2 = 2 * bd.Omega_a, 2 * bd.Omega_b
    M = np.array([[Oa2.real, Ob2.real], [Oa2.imag, Ob2.imag]])
    s = np.linalg.solve(M, [complex(x0).real, complex(x0).imag])
    m, n = np.floor(s)
    return complex(x0) - m * Oa2 - n * Ob2, int(m), int(n)


def make_frame(bd, x0, beta0):
    """Frame with ``x0`` reduced to the fundamental cell.

    Undoing a shift of ``x0`` by ``2 Omega_b`` moves the theta argument by
    ``+tau0`` and ``L`` by ``-2 pi i``; ``beta0`` absorbs ``-16 pi i / Omega_a``
    per step so that ``b0(x)`` is the same function.
    """
    xr, _, n = reduce_x0(x0, bd)
    return Frame(bd, xr, complex(beta0) - 16j * np.pi * n / bd.Omega_a)


def _z(x, frame):
    return (np.asarray(x, dtype=complex) - frame.x0) / (2 * frame.bd.Omega_a)


def psi0(x, frame, fuzz=None):
    """``k sn((x - x0)/2)``."""
    u = 0.5 * (np.asarray(x, dtype=complex) - frame.x0)
    return frame.bd.k * jacobi_sn(u, frame.bd.ell, fuzz)


def psi0_prime(x, frame, fuzz=None):
    u = 0.5 * (np.asarray(x, dtype=complex) - frame.x0)
    return 0.5 * frame.bd.k * jacobi_sn_prime(u, frame.bd.ell, fuzz)


def b0(x, frame, fuzz=None):
    bd = frame.bd
    x = np.asarray(x, dtype=complex)
    L = theta_logderiv(_z(x, frame), bd.theta_ctx, 0, fuzz)
    return frame.beta0 - 2 * bd.E_a * x / bd.Omega_a - 8 * L / bd.Omega_a


def b0_prime(x, frame, fuzz=None):
    bd = frame.bd
    L1 = theta_logderiv(_z(x, frame), bd.theta_ctx, 1, fuzz)
    return -2 * bd.E_a / bd.Omega_a - 4 * L1 / bd.Omega_a ** 2


def frak_b(x, frame, fuzz=None):
    bd = frame.bd
    x = np.asarray(x, dtype=complex)
    L = theta_logderiv(_z(x, frame), bd.theta_ctx, 0, fuzz)
    return 0.25 * bd.E_a * (x - frame.x0) + L


def frak_b_prime(x, frame, fuzz=None):
    bd = frame.bd
    L1 = theta_logderiv(_z(x, frame), bd.theta_ctx, 1, fuzz)
    return 0.25 * bd.E_a + L1 / (2 * bd.Omega_a)


def _lattice_points(origin, w1, w2, window, phi):
    """Points ``origin + m w1 + n w2`` whose ``t = e^{-i phi} x`` lies in ``window``.

    ``window = (t_min, t_max, kappa)`` bounds ``Re t`` and ``|Im t|``.
    """
    t_min, t_max, kappa = window
    rot = np.exp(1j * phi)
    corners = rot * np.array([t_min - 1j * kappa, t_min + 1j * kappa,
                              t_max - 1j * kappa, t_max + 1j * kappa]) - origin
    M = np.array([[w1.real, w2.real], [w1.imag, w2.imag]])
    s = np.linalg.solve(M, np.vstack([corners.real, corners.imag]))
    lo, hi = np.floor(s.min(axis=1)) - 1, np.ceil(s.max(axis=1)) + 1
    m, n = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1))
    pts = (origin + m * w1 + n * w2).ravel()
    t = pts / rot
    keep = (t.real >= t_min) & (t.real <= t_max) & (np.abs(t.imag) <= kappa)
    pts = pts[keep]
    return pts[np.argsort((pts / rot).real, kind="stable")]


def pole_lattice(frame, window):
    """``(P0, Q)`` points inside ``window = (t_min, t_max, kappa)``."""
    bd = frame.bd
    P0 = _lattice_points(frame.x0 + bd.Omega_b, bd.Omega_a, 2 * bd.Omega_b, window, bd.phi)
    Q = _lattice_points(frame.x0 + bd.Omega_a / 2, bd.Omega_a, bd.Omega_b, window, bd.phi)
    return P0, Q


def distance_to_P0(x, frame):
    bd = frame.bd
    v = (np.asarray(x, dtype=complex) - frame.x0 - bd.Omega_b) / bd.Omega_a
    return lattice_distance(v, 0.0, 2 * bd.tau0) * abs(bd.Omega_a)


def distance_to_Q(x, frame):
    bd = frame.bd
    v = (np.asarray(x, dtype=complex) - frame.x0) / bd.Omega_a
    return lattice_distance(v, 0.5, bd.tau0) * abs(bd.Omega_a)


def min_lattice_distance(bd, reach=3):
    """Smallest distance between distinct points of ``P0 u Q`` (independent of ``x0``)."""
    r = np.arange(-reach, reach + 1)
    m, n = np.meshgrid(r, r)
    p = np.concatenate([(m * bd.Omega_a + (2 * n + 1) * bd.Omega_b).ravel(),
                        ((m + 0.5) * bd.Omega_a + n * bd.Omega_b).ravel()])
    d = np.abs(p[:, None] - p[None, :])
    return float(d[d > 1e-12].min())


@dataclass(frozen=True)
class StripSpec:
    """Half-strip ``Re t > t_inf``, ``|Im t| < kappa0`` with holes of radius ``delta0``."""

    phi: float
    t_inf: float
    kappa0: float
    delta0: float
    frame: Frame

    def __post_init__(self):
        dmin = min_lattice_distance(self.frame.bd)
        if not 0 < self.delta0 < dmin / 2:
            raise ValueError(f"delta0 must lie in (0, {dmin / 2:.4g}) so holes do not merge")
        if self.kappa0 <= 0:
            raise ValueError("kappa0 must be positive")


def strip_membership(x, strip):
    """Classify ``x`` as ``in_S_check`` (in S minus Q-holes), ``in_S`` or ``outside``.

    Returns a string for scalar input and an object array otherwise.
    """
    x = np.asarray(x, dtype=complex)
    t = x * np.exp(-1j * strip.phi)
    inside = (t.real > strip.t_inf) & (np.abs(t.imag) < strip.kappa0)
    in_S = inside & (distance_to_P0(x, strip.frame) >= strip.delta0)
    in_check = in_S & (distance_to_Q(x, strip.frame) >= strip.delta0)
    out = np.where(in_check, IN_S_CHECK, np.where(in_S, IN_S, OUTSIDE)).astype(object)
    return out.item() if out.ndim == 0 else out


def default_delta0(bd):
    """Hole radius used by the verification: a quarter of the lattice spacing."""
    return min_lattice_distance(bd) / 4
