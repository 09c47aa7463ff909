"""Closed-form primitives of rational functions of ``sn`` and the function ``g``.

With ``v = u/Omega_a``, ``nu0 = (1 + tau0)/2`` and ``L = theta'/theta``::

    G(u) = E_a u + L(v - 1/4 + nu0) + L(v + 1/4 + nu0)
    H(u) = L(v - 1/4 + nu0) - L(v + 1/4 + nu0)

    int du/(1 - sn^2)        = G / ((A - 1) Omega_a)
    int sn du/(1 - sn^2)     = H / ((A - 1) Omega_a)
    int du/(1 - A sn^2)      = (E_a u + L(v - 1/4) + L(v + 1/4)) / ((1 - A) Omega_a) + u
    int sn du/(1 - A sn^2)   = (L(v + 1/4) - L(v - 1/4)) / (k (1 - A) Omega_a)
    int du/(1 - sn^2)^2      = -(G'' + 4(1 - 2A) G) / (6 (A - 1)^2 Omega_a) - A u / (3 (A - 1))
    int sn du/(1 - sn^2)^2   = -(H'' + (1 - 5A) H) / (6 (A - 1)^2 Omega_a)

Each primitive is normalized to vanish at ``u = 0``; the subtracted value is
the constant of integration (:func:`primitive_constant`).
"""

from functools import lru_cache

import numpy as np

from .special_fn import jacobi_sn, theta_logderiv

KINDS = (
    "inv_one_minus_sn2",
    "sn_over_one_minus_sn2",
    "inv_one_minus_Asn2",
    "sn_over_one_minus_Asn2",
    "inv_one_minus_sn2_sq",
    "sn_over_one_minus_sn2_sq",
)


def _L(z, bd, order, fuzz):
    return theta_logderiv(z, bd.theta_ctx, order, fuzz)


def _raw(kind, u, bd, fuzz=None):
    u = np.asarray(u, dtype=complex)
    Oa, A, Ea, nu = bd.Omega_a, bd.A, bd.E_a, bd.nu0
    v = u / Oa
    if kind in ("inv_one_minus_Asn2", "sn_over_one_minus_Asn2"):
        lm, lp = _L(v - 0.25, bd, 0, fuzz), _L(v + 0.25, bd, 0, fuzz)
        if kind == "inv_one_minus_Asn2":
            return (Ea * u + lm + lp) / ((1 - A) * Oa) + u
        return (lp - lm) / (bd.k * (1 - A) * Oa)
    zm, zp = v - 0.25 + nu, v + 0.25 + nu
    lm, lp = _L(zm, bd, 0, fuzz), _L(zp, bd, 0, fuzz)
    G = Ea * u + lm + lp
    H = lm - lp
    if kind == "inv_one_minus_sn2":
        return G / ((A - 1) * Oa)
    if kind == "sn_over_one_minus_sn2":
        return H / ((A - 1) * Oa)
    m2, p2 = _L(zm, bd, 2, fuzz), _L(zp, bd, 2, fuzz)
    if kind == "inv_one_minus_sn2_sq":
        G2 = (m2 + p2) / Oa ** 2
        return -(G2 + 4 * (1 - 2 * A) * G) / (6 * (A - 1) ** 2 * Oa) - A * u / (3 * (A - 1))
    if kind == "sn_over_one_minus_sn2_sq":
        H2 = (m2 - p2) / Oa ** 2
        return -(H2 + (1 - 5 * A) * H) / (6 * (A - 1) ** 2 * Oa)
    raise ValueError(f"unknown primitive kind {kind!r}")


@lru_cache(maxsize=256)
def primitive_constant(kind, bd):
    """Value of the closed form at ``u = 0`` (the subtracted constant)."""
    return complex(_raw(kind, 0.0, bd))


def primitive(kind, u, bd, fuzz=None):
    """``int_0^u`` of the integrand named by ``kind``.

    ``fuzz`` (distance in the theta argument) raises
    :class:`~pv_elliptic.special_fn.SingularityError` near singularities.
    """
    return _raw(kind, u, bd, fuzz) - primitive_constant(kind, bd)


def integrand(kind, u, bd):
    """The rational function of ``sn u`` whose primitive is ``primitive(kind)``."""
    sn = jacobi_sn(u, bd.ell)
    s2 = sn * sn
    table = {
        "inv_one_minus_sn2": 1 / (1 - s2),
        "sn_over_one_minus_sn2": sn / (1 - s2),
        "inv_one_minus_Asn2": 1 / (1 - bd.A * s2),
        "sn_over_one_minus_Asn2": sn / (1 - bd.A * s2),
        "inv_one_minus_sn2_sq": 1 / (1 - s2) ** 2,
        "sn_over_one_minus_sn2_sq": sn / (1 - s2) ** 2,
    }
    if kind not in table:
        raise ValueError(f"unknown primitive kind {kind!r}")
    return table[kind]


def g(s, bd, fuzz=None):
    """``(E_a/2) s + L(s/Omega_a)``, so that ``g((x - x0)/2) = frak_b(x)``."""
    s = np.asarray(s, dtype=complex)
    return 0.5 * bd.E_a * s + _L(s / bd.Omega_a, bd, 0, fuzz)


def g_prime(s, bd, fuzz=None):
    s = np.asarray(s, dtype=complex)
    return 0.5 * bd.E_a + _L(s / bd.Omega_a, bd, 1, fuzz) / bd.Omega_a
