"""Explicit error formulas for ``h`` and the Lagrangian correction ``b - b0``.

All tail integrals below are oriented from infinity to ``x``::

    I1(x) = int_inf^x F1(psi0, b0) dxi/xi
    I2(x) = int_inf^x F1(psi0, b0)^2 dxi/xi^2
    I3(x) = int_inf^x (A - psi0^2) F1(psi0, b0)^2 dxi/xi^2

    h_asym      = -2 c2/((A - 1) x) - I1 - (3/2) I2
    b_corr_asym = b0'(x) h - 4 c2/x - I3

with ``c2 = (th0 - th1)^2 + thinf^2``.  The contour runs from ``x`` along the
ray ``e^{i phi} R+`` and passes points of ``P0 u Q`` closer than ``rho`` to the
ray on semicircles on the far side of the point.

Two evaluation routes exist.  ``parts_decomposition`` splits ``F1`` into
``sn``-rational pieces, replaces each by its closed-form primitive
(:mod:`pv_elliptic.primitives`) with the secular terms removed, and
integrates by parts once; the remaining integrands decay one power faster.
``direct_oracle`` integrates the raw integrands.  Both truncate at ``T`` and
close the tail with the end correction of :func:`_end_correction`.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre

from .leading_order import b0 as b0_fn
from .leading_order import b0_prime, frak_b, min_lattice_distance, pole_lattice, psi0
from .special_fn import reduce_lattice, theta_logderiv

PARTS = "parts_decomposition"
DIRECT = "direct_oracle"
T_MIN = 1e3
T_CAP = 1e5


class ContourError(ValueError):
    """No admissible detour: holes overlap or a point sits inside a detour."""


class TailBudgetError(RuntimeError):
    """The certified tail bound stays above tolerance up to ``T_CAP``."""


@dataclass(frozen=True)
class TailIntegralResult:
    value: complex
    T: float
    tail_bound: float
    method: str


def F1(psi, b, A, params):
    """``(4 (th0 + th1) psi - b) / (2 (A - psi^2))``."""
    psi = np.asarray(psi, dtype=complex)
    return (4 * params.Theta * psi - b) / (2 * (A - psi * psi))


def F2(psi, A, params):
    """``2 (2 (th0 - th1) thinf psi + c2) / ((1 - psi^2)(A - psi^2))``."""
    psi = np.asarray(psi, dtype=complex)
    d = params.theta0 - params.theta1
    num = 2 * (2 * d * params.theta_inf * psi + params.c2)
    return num / ((1 - psi * psi) * (A - psi * psi))


# ---------------------------------------------------------------- contour

@lru_cache(maxsize=8)
def _gauss(n):
    """Nodes, weights and the matrix ``S`` with ``int_{-1}^{s_i} q = S @ q``."""
    s, w = legendre.leggauss(n)
    V = legendre.legvander(s, n - 1)
    Vint = np.column_stack([legendre.legval(s, legendre.legint(np.eye(n)[j], lbnd=-1))
                            for j in range(n)])
    return s, w, Vint @ np.linalg.inv(V)


@dataclass(frozen=True)
class RayContour:
    """Panels of the integration path, ordered from the first mark to ``T``.

    ``xi`` and ``dxi`` (``d xi/ds``) have shape ``(panels, n)``; ``tre`` is
    ``Re t`` at the nodes.  ``mark_panel[j]`` is the first panel after mark ``j``.
    """

    phi: float
    rho: float
    T: float
    xi: np.ndarray
    dxi: np.ndarray
    tre: np.ndarray
    marks: np.ndarray
    mark_panel: np.ndarray
    detours: tuple


def default_rho(bd):
    """Detour radius: below ``dmin/8`` so sample holes of radius ``dmin/4`` are avoided."""
    return min(0.5, min_lattice_distance(bd) / 8)


def ray_contour(frame, xs, T, rho=None, panel=0.25, n_gl=8):
    """Integration path from the marks ``xs`` to ``e^{i phi} T``.

    Marks must lie on the ray, except that a single mark may sit off it; it
    is then joined to the ray by a straight leg.
    """
    bd = frame.bd
    rho = default_rho(bd) if rho is None else float(rho)
    rot = np.exp(1j * bd.phi)
    xs = np.atleast_1d(np.asarray(xs, dtype=complex))
    t = xs / rot
    off = np.abs(t.imag) > 1e-9 * np.maximum(1.0, np.abs(t))
    if off.any() and xs.size > 1:
        raise ContourError("off-ray marks are supported one at a time")
    foot = t.real
    t0 = float(foot.min())
    if T <= foot.max():
        raise ContourError("truncation point must lie beyond every mark")

    P0, Q = pole_lattice(frame, (t0 - 3 * rho, T + 3 * rho, 2 * rho))
    sing = np.concatenate([P0, Q]) / rot
    sing = sing[np.argsort(sing.real, kind="stable")]
    near = sing[np.abs(sing.imag) < rho]
    centres = near.real
    if np.any(np.diff(centres) <= 2 * rho):
        raise ContourError("detour discs overlap; reduce rho")
    if centres.size:
        j = np.clip(np.searchsorted(centres, foot), 1, centres.size) - 1
        gap = np.minimum(np.abs(foot - centres[j]),
                         np.abs(foot - centres[np.minimum(j + 1, centres.size - 1)]))
        if np.any(gap < rho):
            raise ContourError("a mark lies inside a detour; it is too close to P0 u Q")
        jT = np.argmin(np.abs(centres - T))
        if abs(centres[jT] - T) < rho:
            T = centres[jT] + rho + panel
    keep = (centres - rho >= t0) & (centres + rho <= T)
    near, centres = near[keep], centres[keep]
    sides = np.where(near.imag > 0, 1.0, np.where(near.imag < 0, -1.0, 1.0))

    s, _, _ = _gauss(n_gl)
    bps = np.concatenate([np.arange(np.ceil(t0 / panel) * panel, T, panel),
                          foot, [t0, T], centres - rho, centres + rho])
    bps = np.unique(bps[(bps >= t0) & (bps <= T)])
    a, b = bps[:-1], bps[1:]
    mid = 0.5 * (a + b)
    inside = np.zeros(mid.size, dtype=bool)
    if centres.size:
        j = np.clip(np.searchsorted(centres, mid), 1, centres.size) - 1
        for jj in (j, np.minimum(j + 1, centres.size - 1)):
            inside |= np.abs(mid - centres[jj]) < rho
    a, b = a[~inside], b[~inside]
    line_t = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * s
    line_dt = np.broadcast_to(0.5 * (b - a)[:, None], line_t.shape)

    n_arc = 8
    th = np.linspace(0.0, np.pi, n_arc + 1)
    thm, thh = 0.5 * (th[1:] + th[:-1]), 0.5 * (th[1:] - th[:-1])
    theta = thm[None, :, None] + thh[None, :, None] * s
    sg = sides[:, None, None]
    rot_arc = np.exp(1j * sg * theta)
    arc_t = (centres[:, None, None] - rho * rot_arc).reshape(-1, n_gl)
    arc_dt = (-1j * rho * sg * rot_arc * thh[None, :, None]).reshape(-1, n_gl)
    arc_key = (centres[:, None] - rho + 1e-9 * np.arange(n_arc)).ravel()

    keys = np.concatenate([a, arc_key])
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    tt = np.concatenate([line_t.astype(complex), arc_t])[order]
    dt = np.concatenate([line_dt.astype(complex), arc_dt])[order]

    _check_clearance(sing, tt, rho)
    mark_panel = np.searchsorted(keys, foot)

    if off.any():
        leg_n = max(1, int(np.ceil(abs(t[0].imag) / panel)))
        edges = t[0] + (foot[0] - t[0]) * np.linspace(0, 1, leg_n + 1)
        lt = 0.5 * (edges[1:] + edges[:-1])[:, None] + 0.5 * np.diff(edges)[:, None] * s
        ld = np.broadcast_to(0.5 * np.diff(edges)[:, None], lt.shape)
        _check_clearance(sing, lt, rho)
        tt = np.concatenate([lt, tt])
        dt = np.concatenate([ld, dt])
        mark_panel = np.array([0])

    return RayContour(phi=bd.phi, rho=rho, T=float(T), xi=rot * tt, dxi=rot * dt,
                      tre=tt.real, marks=xs, mark_panel=mark_panel,
                      detours=tuple(zip(centres.tolist(), sides.tolist())))


def _check_clearance(sing, nodes, rho):
    close = sing[np.abs(sing.imag) < 2 * rho]
    if close.size == 0:
        return
    flat = nodes.ravel()
    lo, hi = flat.real.min() - 2 * rho, flat.real.max() + 2 * rho
    close = close[(close.real > lo) & (close.real < hi)]
    order = np.argsort(flat.real)
    fr = flat.real[order]
    for p in close:
        i0, i1 = np.searchsorted(fr, [p.real - 2 * rho, p.real + 2 * rho])
        if i1 > i0 and np.min(np.abs(flat[order[i0:i1]] - p)) < 0.5 * rho:
            raise ContourError(f"contour passes within rho/2 of a singular point at t={p:.6g}")


# ---------------------------------------------------------------- tail engine

def _bump(s):
    s = np.clip(s, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        out = np.exp(-1.0 / (s * (1 - s)))
    return np.where((s > 0) & (s < 1), out, 0.0)


def _primitive_nodes(q, S, w):
    """Running integral of panel-wise values ``q = f dxi/ds`` at nodes, plus its end value."""
    tot = q @ w
    start = np.concatenate([[0.0], np.cumsum(tot)[:-1]])
    return start[:, None] + q @ S.T, start[-1] + tot[-1]


def _end_correction(ct, f, p):
    """``int_T^inf f xi^-p dxi`` for bounded ``f`` and an error bound.

    On a window ending at ``T`` write ``f = fbar + F1'`` and ``F1 = F2'``
    with ``F1``, ``F2`` of zero mean (smooth-bump averages).  Two
    integrations by parts give
    ``fbar XT^(1-p)/(p-1) - F1(T) XT^-p - p F2(T) XT^(-p-1)`` with remainder
    at most ``p sup|F2| |XT|^(-p-1)``.  For ``p = 1`` convergence forces
    ``fbar = 0``.

    Passing a pole at distance ``d`` from the ray adds about ``+-i pi c`` to
    the running primitive, with the sign set by the side of the detour, so
    window means converge only like ``1/W``.  The window is therefore most
    of the contour, and the bound adds the change of the estimate when the
    window is halved.
    """
    W = 0.8 * (ct.T - ct.tre.min())
    full, b_full = _window_tail(ct, f, p, W)
    half, _ = _window_tail(ct, f, p, W / 2)
    return full, float(b_full + abs(full - half))


def _window_tail(ct, f, p, W):
    n = f.shape[-1]
    _, w, S = _gauss(n)
    sel = ct.tre.min(axis=1) >= ct.T - W
    fw, dx = f[sel], ct.dxi[sel]
    meas = _bump((ct.tre[sel] - (ct.T - W)) / W) * dx * w
    mean = lambda F: np.sum(F * meas) / np.sum(meas)
    fbar = mean(fw) if p > 1 else 0.0
    G1, G1T = _primitive_nodes((fw - fbar) * dx, S, w)
    m1 = mean(G1)
    F1n, F1T = G1 - m1, G1T - m1
    F2n, F2T = _primitive_nodes(F1n * dx, S, w)
    m2 = mean(F2n)
    F2n, F2T = F2n - m2, F2T - m2
    XT = np.exp(1j * ct.phi) * ct.T
    tail = -F1T * XT ** -p - p * F2T * XT ** (-p - 1)
    if p > 1:
        tail += fbar * XT ** (1 - p) / (p - 1)
    return tail, p * np.max(np.abs(F2n)) / abs(XT) ** (p + 1)


def tail_to_infinity(ct, f, p):
    """``int_{mark}^inf f(xi) xi^-p dxi`` for each mark, and the tail bound."""
    _, w, _ = _gauss(f.shape[-1])
    tot = (f * ct.xi ** (-p) * ct.dxi) @ w
    cum = np.concatenate([[0.0], np.cumsum(tot)])
    tail, bound = _end_correction(ct, f, p)
    return cum[-1] - cum[ct.mark_panel] + tail, bound


# ---------------------------------------------------------------- brackets

def _transverse(u, bd):
    """``E_a u - 4 pi i Im(u/Omega_a)/Im tau0`` with the along-ray part dropped.

    The Boutroux conditions make this real-linear map vanish on ``e^{i phi}``,
    so only the component of ``u`` across the ray contributes.
    """
    rot = np.exp(1j * bd.phi)
    lam_perp = bd.E_a * 1j * rot - 4j * np.pi * (1j * rot / bd.Omega_a).imag / bd.tau0.imag
    return lam_perp * (np.asarray(u, dtype=complex) / rot).imag


def _Lb(z, bd, order=0):
    """``L(z) + 2 pi i Im z / Im tau0`` (order 0) or ``L^(order)`` (periodic)."""
    zr, _, _ = reduce_lattice(z, bd.tau0)
    L = theta_logderiv(zr, bd.theta_ctx, order)
    return L + 2j * np.pi * zr.imag / bd.tau0.imag if order == 0 else L


def g_bounded(s, bd):
    """``g(s)`` up to a constant, evaluated without secular growth."""
    return 0.5 * _transverse(s, bd) + _Lb(np.asarray(s) / bd.Omega_a, bd)


def g_prime(s, bd):
    return 0.5 * bd.E_a + _Lb(np.asarray(s) / bd.Omega_a, bd, 1) / bd.Omega_a


def brackets(u, bd):
    """Bounded primitives in ``u`` of ``1/(1-sn^2)``, ``sn/(1-sn^2)``, ``1/(1-sn^2)^2``, ``sn/(1-sn^2)^2``.

    Returned as ``(P1, P2, P5, P6)``; ``P5`` omits its secular part
    ``m5 u`` with ``m5 = -A/(3(A-1))``, the mean of ``1/(1-sn^2)^2``.
    Each agrees with :func:`pv_elliptic.primitives.primitive` up to an
    additive constant (and ``m5 u`` for ``P5``).
    """
    u = np.asarray(u, dtype=complex)
    A, Oa = bd.A, bd.Omega_a
    v = u / Oa
    zm, zp = v - 0.25 + bd.nu0, v + 0.25 + bd.nu0
    lm, lp = _Lb(zm, bd), _Lb(zp, bd)
    G = _transverse(u, bd) + lm + lp
    H = lm - lp
    m2, p2 = _Lb(zm, bd, 2), _Lb(zp, bd, 2)
    G2, H2 = (m2 + p2) / Oa ** 2, (m2 - p2) / Oa ** 2
    P1 = G / ((A - 1) * Oa)
    P2 = H / ((A - 1) * Oa)
    P5 = -(G2 + 4 * (1 - 2 * A) * G) / (6 * (A - 1) ** 2 * Oa)
    P6 = -(H2 + (1 - 5 * A) * H) / (6 * (A - 1) ** 2 * Oa)
    return P1, P2, P5, P6


def mean_inv_one_minus_sn2_sq(bd):
    return -bd.A / (3 * (bd.A - 1))


# ---------------------------------------------------------------- assembly

@dataclass(frozen=True)
class TailTable:
    """``I1``, ``I2``, ``I3`` (from infinity to ``x``) at the marks ``x``."""

    x: np.ndarray
    I1: np.ndarray
    I2: np.ndarray
    I3: np.ndarray
    bounds: dict
    T: float
    method: str


def _default_T(xs):
    return max(10 * float(np.max(np.abs(xs))), T_MIN)


def _parts_terms(ct, frame, params):
    """``int_x^inf`` of the three integrands via one integration by parts."""
    bd = frame.bd
    A, Oa, k, Th = bd.A, bd.Omega_a, bd.k, params.Theta
    c0 = frame.b0_at_x0
    m5 = mean_inv_one_minus_sn2_sq(bd)

    def fields(xi):
        sig = 0.5 * (xi - frame.x0)
        P1, P2, P5, P6 = (2 * B for B in brackets(sig, bd))
        return sig, P1, P2, P5, P6, g_bounded(sig, bd), 0.5 * g_prime(sig, bd)

    a1 = 4 * Th ** 2 / A
    a5 = 4 * Th ** 2 / A + c0 ** 2 / (4 * A ** 2)
    c6, c5, c55 = 16 * Th * k / (Oa * A ** 2), -4 * c0 / (Oa * A ** 2), 16 / (Oa ** 2 * A ** 2)
    d2, d1, d11 = 16 * Th * k / (Oa * A), -4 * c0 / (Oa * A), 16 / (Oa ** 2 * A)
    e1 = 4 * Th ** 2 + c0 ** 2 / (4 * A)

    def parts(F, xi):
        _, P1, P2, P5, P6, g, gp = F
        # each entry: (Bn, Bg, Bgg, extra order-p integrand)
        return {
            "I1": (2 * Th / k * P2 - c0 / (2 * A) * P1, 4 / (A * Oa) * P1, 0 * P1, 0 * P1, 1),
            "I2": (-a1 * P1 + a5 * P5 - 2 * Th * c0 / k ** 3 * P6,
                   c6 * P6 + c5 * P5, c55 * P5, m5 * (c5 * g + c55 * g * g), 2),
            "I3": (e1 * P1 - 2 * Th * c0 / k * P2, d2 * P2 + d1 * P1, d11 * P1, 0 * P1, 2),
        }

    F_n = fields(ct.xi)
    node = parts(F_n, ct.xi)
    xm = ct.marks
    mark = parts(fields(xm), xm)
    g_n, gp_n = F_n[5:]
    g_m = g_bounded(0.5 * (xm - frame.x0), bd)
    out, bounds = {}, {}
    for name in ("I1", "I2", "I3"):
        Bn, Bg, Bgg, extra, p = node[name]
        Bn_m, Bg_m, Bgg_m, _, _ = mark[name]
        boundary = -(Bn_m + g_m * Bg_m + g_m ** 2 * Bgg_m) / xm ** p
        r_p = -(gp_n * Bg + 2 * g_n * gp_n * Bgg) + extra
        r_p1 = p * (Bn + g_n * Bg + g_n ** 2 * Bgg)
        v1, e_1 = tail_to_infinity(ct, r_p, p)
        v2, e_2 = tail_to_infinity(ct, r_p1, p + 1)
        val = boundary + v1 + v2
        if name == "I2":
            val = val + a5 * m5 / xm
        if name == "I3":
            val = val - 4 * Th ** 2 / xm
        out[name], bounds[name] = val, e_1 + e_2
    return out, bounds


def _direct_terms(ct, frame, params):
    bd = frame.bd
    p0 = psi0(ct.xi, frame)
    f1 = F1(p0, b0_fn(ct.xi, frame), bd.A, params)
    out, bounds = {}, {}
    for name, f, p in (("I1", f1, 1), ("I2", f1 * f1, 2), ("I3", (bd.A - p0 * p0) * f1 * f1, 2)):
        out[name], bounds[name] = tail_to_infinity(ct, f, p)
    return out, bounds


def tail_integrals(xs, frame, params, tol=1e-4, method=PARTS, T=None, rho=None):
    """``I1``, ``I2``, ``I3`` at every ``x`` in ``xs`` (one shared contour).

    ``T`` defaults to ``max(10 max|x|, 1e3)`` and doubles (up to ``T_CAP``)
    until every tail bound is below ``tol``.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=complex))
    T = _default_T(xs) if T is None else float(T)
    terms = _parts_terms if method == PARTS else _direct_terms
    if method not in (PARTS, DIRECT):
        raise ValueError(f"unknown method {method!r}")
    while True:
        ct = ray_contour(frame, xs, T, rho)
        vals, bounds = terms(ct, frame, params)
        if max(bounds.values()) < tol:
            break
        if 2 * T > T_CAP:
            raise TailBudgetError(f"tail bound {max(bounds.values()):.3g} >= tol {tol:.3g} at T={T:.3g}")
        T *= 2
    # flip orientation: int_inf^x = -int_x^inf
    return TailTable(x=xs, I1=-vals["I1"], I2=-vals["I2"], I3=-vals["I3"],
                     bounds=bounds, T=ct.T, method=method)


def _single(name, x, frame, params, tol, method):
    tab = tail_integrals([x], frame, params, tol, method)
    return TailIntegralResult(complex(getattr(tab, name)[0]), tab.T, tab.bounds[name], method)


def I1(x, frame, params, tol=1e-4, method=PARTS):
    """``int_inf^x F1(psi0, b0) dxi/xi``."""
    return _single("I1", x, frame, params, tol, method)


def I2(x, frame, params, tol=1e-4, method=PARTS):
    """``int_inf^x F1^2 dxi/xi^2``."""
    return _single("I2", x, frame, params, tol, method)


def I3(x, frame, params, tol=1e-4, method=PARTS):
    """``int_inf^x (A - psi0^2) F1^2 dxi/xi^2``."""
    return _single("I3", x, frame, params, tol, method)


def I2_leading(frame, params):
    """Coefficient of ``1/x`` in ``I2``: ``(16 Th^2 A + b0(x0)^2) / (12 A (A - 1))``."""
    A, c0 = frame.bd.A, frame.b0_at_x0
    return (16 * params.Theta ** 2 * A + c0 ** 2) / (12 * A * (A - 1))


def I3_leading(params):
    """Coefficient of ``1/x`` in ``I3``: ``4 (th0 + th1)^2``."""
    return 4 * params.Theta ** 2


def h_asym(x, frame, params, tol=1e-4, table=None):
    """``-2 c2/((A - 1) x) - I1 - (3/2) I2``."""
    tab = table if table is not None else tail_integrals(x, frame, params, tol)
    A = frame.bd.A
    h = -2 * params.c2 / ((A - 1) * tab.x) - tab.I1 - 1.5 * tab.I2
    return h if np.ndim(x) else complex(h[0])


def h_budget(table):
    """Certified quadrature and tail error of :func:`h_asym`."""
    return table.bounds["I1"] + 1.5 * table.bounds["I2"]


def b_corr_asym(x, frame, params, h, tol=1e-4, table=None):
    """``b0'(x) h - 4 c2/x - I3`` with ``b0'`` in closed form."""
    tab = table if table is not None else tail_integrals(x, frame, params, tol)
    val = b0_prime(tab.x, frame) * np.asarray(h) - 4 * params.c2 / tab.x - tab.I3
    return val if np.ndim(x) else complex(val[0])


# ---------------------------------------------------------------- detailed forms

def _direct_family(xs, frame, specs, tol, T=None, rho=None):
    """``int_inf^x`` of each ``(builder, p)`` in ``specs``; ``builder(xi)`` gives the integrand."""
    xs = np.atleast_1d(np.asarray(xs, dtype=complex))
    T = _default_T(xs) if T is None else float(T)
    while True:
        ct = ray_contour(frame, xs, T, rho)
        res = [tail_to_infinity(ct, build(ct.xi), p) for build, p in specs]
        worst = max(b for _, b in res)
        if worst < tol:
            return [-v for v, _ in res], worst, ct.T
        if 2 * T > T_CAP:
            raise TailBudgetError(f"tail bound {worst:.3g} >= tol {tol:.3g} at T={T:.3g}")
        T *= 2


def h_detailed_coefficient(frame, params):
    """Explicit ``1/x`` coefficient of :func:`h_detailed`."""
    A, c0 = frame.bd.A, frame.b0_at_x0
    coef = 2 * params.theta0 ** 2 + 2 * params.theta1 ** 2 + params.theta_inf ** 2
    return -2 * coef / (A - 1) - c0 ** 2 / (8 * A * (A - 1))


def h_detailed(x, frame, params, tol=1e-4):
    """The expanded eight-term form of ``h``.

    It differs from :func:`h_asym` by replacing ``1/(A - psi0^2)^2`` in the
    ``b0(x0) frak_b`` term of ``I2`` by its mean ``-1/(3 A (A - 1))``,
    an ``O(x^-2)`` change.
    """
    A, Oa, Th = frame.bd.A, frame.bd.Omega_a, params.Theta
    c0 = frame.b0_at_x0
    p0 = lambda xi: psi0(xi, frame)
    fb = lambda xi: frak_b(xi, frame)
    D = lambda xi: A - p0(xi) ** 2
    specs = [
        (lambda xi: p0(xi) / D(xi), 1),
        (lambda xi: 1 / D(xi), 1),
        (lambda xi: fb(xi) / D(xi), 1),
        (lambda xi: fb(xi), 2),
        (lambda xi: fb(xi) * p0(xi) / D(xi) ** 2, 2),
        (lambda xi: fb(xi) ** 2 / D(xi) ** 2, 2),
    ]
    (K1, K2, K3, K4, K5, K6), _, _ = _direct_family(x, frame, specs, tol)
    xs = np.atleast_1d(np.asarray(x, dtype=complex))
    h = (h_detailed_coefficient(frame, params) / xs - 2 * Th * K1 + 0.5 * c0 * K2 - 4 / Oa * K3
         - 2 * c0 / (A * (A - 1) * Oa) * K4
         - 24 * Th / Oa * K5 - 24 / Oa ** 2 * K6)
    return h if np.ndim(x) else complex(h[0])


def b_detailed(x, frame, params, h, tol=1e-4):
    """``b - b0`` in the expanded form with the two ``frak_b`` integrals."""
    A, Oa, Th = frame.bd.A, frame.bd.Omega_a, params.Theta
    p0 = lambda xi: psi0(xi, frame)
    fb = lambda xi: frak_b(xi, frame)
    specs = [
        (lambda xi: fb(xi) * p0(xi) / (A - p0(xi) ** 2), 2),
        (lambda xi: fb(xi) ** 2 / (A - p0(xi) ** 2), 2),
    ]
    (K7, K8), _, _ = _direct_family(x, frame, specs, tol)
    xs = np.atleast_1d(np.asarray(x, dtype=complex))
    coef = 2 * params.theta0 ** 2 + 2 * params.theta1 ** 2 + params.theta_inf ** 2
    val = (b0_prime(xs, frame) * np.asarray(h) - 4 * coef / xs
           - 16 * Th / Oa * K7 - 16 / Oa ** 2 * K8)
    return val if np.ndim(x) else complex(val[0])


# ---------------------------------------------------------------- oracles

def _raw_integrand(kind, frame, params):
    bd = frame.bd
    if kind == "zero":
        return lambda xi: np.zeros_like(xi), 2
    if kind == "inv_xi2":
        return lambda xi: np.ones_like(xi), 2
    if kind == "F2":
        return lambda xi: F2(psi0(xi, frame), bd.A, params), 2

    def f1(xi):
        return F1(psi0(xi, frame), b0_fn(xi, frame), bd.A, params)

    if kind == "F1":
        return f1, 1
    if kind == "F1_sq":
        return lambda xi: f1(xi) ** 2, 2
    if kind == "AF1_sq":
        return lambda xi: (bd.A - psi0(xi, frame) ** 2) * f1(xi) ** 2, 2
    raise ValueError(f"unknown integrand {kind!r}")


def direct_oracle(kind, x, T_cut, frame, params, rho=None):
    """``int_inf^x`` of a raw integrand, truncated at ``T_cut`` plus end correction.

    ``kind`` is one of ``zero``, ``inv_xi2`` (``1/xi^2``), ``F1`` (weight
    ``1/xi``), ``F1_sq``, ``AF1_sq`` and ``F2`` (weight ``1/xi^2``).
    """
    if T_cut < 10 * np.max(np.abs(x)):
        raise ValueError("T_cut must be at least 10 |x|")
    build, p = _raw_integrand(kind, frame, params)
    ct = ray_contour(frame, x, T_cut, rho)
    v, _ = tail_to_infinity(ct, build(ct.xi), p)
    v = -v
    return v if np.ndim(x) else complex(v[0])


def prop44_integral(x, frame, params, tol=1e-4, T=None, rho=None):
    """``int_inf^x F2(psi0) dxi/xi^2``; its limit form is ``-2 c2/((A - 1) x)``."""
    build, p = _raw_integrand("F2", frame, params)
    (v,), _, _ = _direct_family(x, frame, [(build, p)], tol, T, rho)
    return v if np.ndim(x) else complex(v[0])


def j0_pairing(x, frame, tol=1e-4, T=None, rho=None):
    """``(A - 1) Omega_a int_inf^s g(sigma)/(1 - sn^2 sigma) dsigma/sigma~``.

    Computed by the parts machinery: one integration by parts against the
    bounded primitive of ``1/(1 - sn^2)``.
    """
    bd = frame.bd
    xs = np.atleast_1d(np.asarray(x, dtype=complex))
    T = _default_T(xs) if T is None else float(T)
    ct = ray_contour(frame, xs, T, rho)
    sig_n = 0.5 * (ct.xi - frame.x0)
    sig_m = 0.5 * (xs - frame.x0)
    B_n = 2 * brackets(sig_n, bd)[0]
    B_m = 2 * brackets(sig_m, bd)[0]
    g_n, gp_n = g_bounded(sig_n, bd), 0.5 * g_prime(sig_n, bd)
    v1, _ = tail_to_infinity(ct, -gp_n * B_n, 1)
    v2, _ = tail_to_infinity(ct, g_n * B_n, 2)
    val = -(bd.A - 1) * bd.Omega_a * (-g_bounded(sig_m, bd) * B_m / xs + v1 + v2)
    return val if np.ndim(x) else complex(val[0])
