"""The curve ``w^2 = (1 - z^2)(A - z^2)``, its periods and the Boutroux solve.

Sheet convention: on the upper sheet ``z^-1 sqrt(A - z^2) -> i`` and
``z^-1 sqrt(1 - z^2) -> i`` as ``z -> infinity``, so ``w ~ -z^2``; the
cuts are ``[-1, -k]`` and ``[k, 1]`` with ``k = A^(1/2)``, ``Re k >= 0``.

Cycles: ``a`` is a counterclockwise loop around the segment ``[-k, k]``
(it crosses both cuts, so ``w`` is continued along the path), ``b`` is a
loop around the cut ``[-1, -k]`` on the upper sheet, oriented so that
``Im(Omega_b/Omega_a) > 0`` (counterclockwise when ``Im A > 0``, where
``Omega_a = 4K(k)`` and ``Omega_b = 2iK'(k)``).
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial.legendre import leggauss

from .special_fn import DEFAULT_TOL, EllipticContext

BILINEAR = -4j * np.pi
"""``Omega_a E_b - Omega_b E_a`` for the orientation above."""


class DegenerateCurve(ValueError):
    """Branch points collide or a path comes too close to one."""


class QuadratureError(RuntimeError):
    """Gauss-Legendre refinement did not reach the requested tolerance."""


class BoutrouxFailure(RuntimeError):
    """The Newton iteration for the Boutroux equations did not converge."""


@dataclass(frozen=True)
class CurveBranch:
    A: complex

    def __post_init__(self):
        object.__setattr__(self, "A", complex(self.A))

    @property
    def k(self):
        return complex(np.sqrt(self.A))

    @property
    def branch_points(self):
        k = self.k
        return np.array([-1.0, -k, k, 1.0], dtype=complex)

    @property
    def min_gap(self):
        p = self.branch_points
        d = np.abs(p[:, None] - p[None, :])
        return float(d[~np.eye(4, dtype=bool)].min())


def w_branch(curve, z, safety=0.0):
    """Upper-sheet value of ``w(A, z)``.

    Written as ``-(z - m1) s1 (z - m2) s2`` with ``m1 = (1 + k)/2``,
    ``s1 = sqrt(1 - r1^2/(z - m1)^2)``, ``r1 = (1 - k)/2`` (and ``m2 = -m1``,
    ``r2 = -r1``): each principal root is discontinuous exactly on one cut
    and tends to 1 at infinity, which reproduces the continuation from
    ``z = iR``.
    """
    z = np.asarray(z, dtype=complex)
    if safety > 0 and np.any(np.abs(z[..., None] - curve.branch_points) < safety):
        raise DegenerateCurve("evaluation point within the safety radius of a branch point")
    return _w_upper(curve.k, z)


def _w_upper(k, z):
    m = 0.5 * (1 + k)
    r2 = (0.5 * (1 - k)) ** 2
    z1, z2 = z - m, z + m
    return -(z1 * np.sqrt(1 - r2 / z1 ** 2)) * (z2 * np.sqrt(1 - r2 / z2 ** 2))


@dataclass(frozen=True)
class CyclePath:
    """Closed polygon (counterclockwise) with its panel layout."""

    cycle: str
    vertices: np.ndarray
    panel_length: float


def _stadium(p, q, d):
    """Rectangle at distance ``d`` around the segment ``[p, q]``, counterclockwise.

    The polygon starts at the midpoint of the side below the segment, which
    stays away from the cuts for every ``A``, so the starting sheet value
    (and the sign of the period) varies continuously with ``A``.
    """
    e = (q - p) / abs(q - p)
    n = 1j * e
    return np.array([0.5 * (p + q) - d * n, q + d * e - d * n, q + d * e + d * n,
                     p - d * e + d * n, p - d * e - d * n])


def cycle_distance(curve):
    """Distance between the loops and the branch points.

    ``max(0.05, 0.1 gap)``, capped at a third of the gap so that moduli
    close to 1 (phases near the edge of the sector) remain usable.
    """
    g = curve.min_gap
    return min(max(0.05, 0.1 * g), g / 3)


def _segment_distance(z, p, q):
    t = np.clip(((z - p) * np.conj(q - p)).real / abs(q - p) ** 2, 0.0, 1.0)
    return abs(z - p - t * (q - p))


def build_cycles(curve):
    """Loops ``a`` (around ``[-k, k]``) and ``b`` (around ``[-1, -k]``).

    Raises :class:`DegenerateCurve` when branch points nearly collide or when
    ``+-1`` lies so close to ``[-k, k]`` that loop ``a`` would enclose it.
    """
    d = cycle_distance(curve)
    k = curve.k
    if curve.min_gap < 1e-3 or abs(k) < 1e-3:
        raise DegenerateCurve(f"branch points nearly collide (A={curve.A})")
    if _segment_distance(1.0, -k, k) <= 2 * d:
        raise DegenerateCurve(f"loop a would enclose a branch point at +-1 (A={curve.A})")
    a = CyclePath("a", _stadium(-k, k, d), d)
    b = CyclePath("b", _stadium(-1.0 + 0j, -k, d), d)
    return a, b


def _path_nodes(path, n_gl):
    x, wts = leggauss(n_gl)
    verts = np.append(path.vertices, path.vertices[:1])
    zs, dz = [], []
    for p, q in zip(verts[:-1], verts[1:]):
        m = max(1, int(np.ceil(abs(q - p) / path.panel_length)))
        edges = p + (q - p) * np.linspace(0, 1, m + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            zs.append(0.5 * (lo + hi) + 0.5 * (hi - lo) * x)
            dz.append(0.5 * (hi - lo) * wts)
    return np.concatenate(zs), np.concatenate(dz)


def continue_branch(k, nodes):
    """Continue ``w`` along ordered nodes from the upper-sheet value at the first.

    Consecutive values are matched by picking the sign of ``+-w`` closest to
    the previous value; this only needs the closed form up to a sign.
    """
    raw = _w_upper(k, nodes)
    flip = np.abs(raw[1:] - raw[:-1]) > np.abs(raw[1:] + raw[:-1])
    sign = np.concatenate([[1.0], np.cumprod(np.where(flip, -1.0, 1.0))])
    return raw * sign


def _cycle_integrals(curve, path, n_gl):
    z, dz = _path_nodes(path, n_gl)
    w = continue_branch(curve.k, z)
    return np.sum(dz / w), np.sum(w / (1 - z * z) * dz)


def periods(curve, tol=1e-13, n_gl=16, max_gl=256):
    """``Omega_c`` and ``E_c`` for ``c = a, b`` by composite Gauss-Legendre.

    The node count per panel is doubled until successive estimates agree to
    ``tol`` (relative).  Returns a dict with the four values and the
    achieved change ``quad_error``.
    """
    cyc = build_cycles(curve)
    prev = None
    n = n_gl
    while True:
        vals = [v for c in cyc for v in _cycle_integrals(curve, c, n)]
        if prev is not None:
            err = max(abs(u - v) / max(abs(v), 1.0) for u, v in zip(vals, prev))
            if err < tol:
                break
            if 2 * n > max_gl:
                raise QuadratureError(f"period quadrature did not converge (change {err:.2e})")
        prev = vals
        n *= 2
    Oa, Ea, Ob, Eb = vals
    if Oa == 0:
        raise DegenerateCurve(f"vanishing a-period (A={curve.A})")
    if (Ob / Oa).imag < 0:
        Ob, Eb = -Ob, -Eb
    return dict(Omega_a=Oa, Omega_b=Ob, E_a=Ea, E_b=Eb, quad_error=err)


def boutroux_residual(phi, curve, tol=1e-13):
    """``(Re e^{i phi} E_a, Re e^{i phi} E_b)``."""
    p = periods(curve, tol)
    e = np.exp(1j * phi)
    return (e * p["E_a"]).real, (e * p["E_b"]).real


@dataclass(frozen=True)
class BoutrouxData:
    phi: float
    A: complex
    Omega_a: complex
    Omega_b: complex
    E_a: complex
    E_b: complex
    residual: tuple
    tol: float = field(default=DEFAULT_TOL, compare=False)

    @property
    def k(self):
        return complex(np.sqrt(self.A))

    @property
    def tau0(self):
        return self.Omega_b / self.Omega_a

    @property
    def nome(self):
        return complex(np.exp(1j * np.pi * self.tau0))

    @property
    def nu0(self):
        return 0.5 * (1 + self.tau0)

    @property
    def bilinear(self):
        return self.Omega_a * self.E_b - self.Omega_b * self.E_a

    @cached_property
    def ell(self):
        return EllipticContext(self.k, self.Omega_a, self.Omega_b, self.tol)

    @property
    def theta_ctx(self):
        return self.ell.theta_ctx


def boutrouxdata_at(phi, A, tol=1e-13):
    """Assemble :class:`BoutrouxData` at a given modulus (no solve)."""
    p = periods(CurveBranch(A), tol)
    e = np.exp(1j * phi)
    return BoutrouxData(float(phi), complex(A), p["Omega_a"], p["Omega_b"], p["E_a"],
                        p["E_b"], ((e * p["E_a"]).real, (e * p["E_b"]).real))


def _admissible(A):
    try:
        build_cycles(CurveBranch(A))
    except DegenerateCurve:
        return False
    return True


def seed_grid(phi, re_range=(-1.0, 2.0), im_range=(-2.0, 2.0), n=41):
    """Grid candidates sorted by residual norm (coarse quadrature)."""
    e = np.exp(1j * phi)
    cands = []
    for ar in np.linspace(*re_range, n):
        for ai in np.linspace(*im_range, n):
            A = complex(ar, ai)
            if not _admissible(A):
                continue
            cyc = build_cycles(CurveBranch(A))
            Ea = _cycle_integrals(CurveBranch(A), cyc[0], 8)[1]
            Eb = _cycle_integrals(CurveBranch(A), cyc[1], 8)[1]
            cands.append((np.hypot((e * Ea).real, (e * Eb).real), A))
    cands.sort(key=lambda c: c[0])
    return [A for _, A in cands]


def newton_boutroux(phi, seed, tol=1e-10, max_iter=50, quad_tol=1e-13):
    """Damped Newton on ``(Re A, Im A) -> boutroux_residual``.

    ``E_c`` is holomorphic in ``A`` with ``dE_c/dA = Omega_c/2``, which gives
    the real 2x2 Jacobian exactly.
    """
    e = np.exp(1j * phi)
    A = complex(seed)

    def evaluate(A):
        p = periods(CurveBranch(A), quad_tol)
        r = np.array([(e * p["E_a"]).real, (e * p["E_b"]).real])
        return p, r

    p, r = evaluate(A)
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= tol:
            break
        da, db = 0.5 * e * p["Omega_a"], 0.5 * e * p["Omega_b"]
        J = np.array([[da.real, -da.imag], [db.real, -db.imag]])
        step = np.linalg.solve(J, -r)
        lam = 1.0
        for _ in range(40):
            trial = A + lam * complex(*step)
            if _admissible(trial):
                try:
                    pt, rt = evaluate(trial)
                except QuadratureError:
                    pt, rt = None, None
                if rt is not None and np.linalg.norm(rt) < np.linalg.norm(r):
                    break
            lam *= 0.5
        else:
            raise BoutrouxFailure(f"line search failed at A={A}")
        A, p, r = trial, pt, rt
    else:
        raise BoutrouxFailure(f"no convergence from seed {seed} (residual {np.abs(r).max():.2e})")
    return BoutrouxData(float(phi), A, p["Omega_a"], p["Omega_b"], p["E_a"], p["E_b"],
                        (float(r[0]), float(r[1])))


def _valid(bd):
    k = bd.k
    return 0 <= k.real <= 1 and bd.tau0.imag > 0


def solve_boutroux(phi, seed=None, tol=1e-10, n_candidates=8):
    """Solve ``Re e^{i phi} E_a = Re e^{i phi} E_b = 0`` for ``A_phi``.

    Without a seed the best points of a coarse grid over the rectangle
    ``Re A in [-1, 2]``, ``Im A in [-2, 2]`` are tried in turn.
    """
    if not 0 < abs(phi) < np.pi / 2:
        raise ValueError("phi must satisfy 0 < |phi| < pi/2")
    seeds = [seed] if seed is not None else seed_grid(phi)[:n_candidates]
    last = None
    for s in seeds:
        try:
            bd = newton_boutroux(phi, s, tol)
        except (BoutrouxFailure, DegenerateCurve, QuadratureError,
                np.linalg.LinAlgError) as exc:
            last = exc
            continue
        if _valid(bd):
            return bd
        last = BoutrouxFailure(f"solution from seed {s} violates the normalization")
    raise BoutrouxFailure(f"Boutroux solve failed for phi={phi}: {last}")


def continue_in_phi(phi_grid, seed=None, tol=1e-10):
    """Sequential solves along a sorted grid, each seeded by the previous ``A``.

    Stops at the first failure and returns the solved prefix.
    """
    out = []
    for phi in phi_grid:
        try:
            bd = solve_boutroux(phi, seed if not out else out[-1].A, tol)
        except (BoutrouxFailure, ValueError):
            break
        out.append(bd)
    return out
