"""Painleve V along the ray ``x = e^{i phi} t`` with chart switching and pole detours.

In the variable ``t`` (so ``y_t = e^{i phi} y_x``)::

    y'' = (1/(2y) + 1/(y-1)) y'^2 - y'/t
          + (y-1)^2 (a y - b/y)/t^2 + e c y/t - e^2 y(y+1)/(2(y-1)),   e = e^{i phi}

with ``8a = (th0 - th1 + thinf)^2``, ``8b = (th0 - th1 - thinf)^2``,
``c = 1 - th0 - th1``.  Near poles of ``y`` the state switches to ``u = 1/y``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

Y_CHART = "y"
U_CHART = "inv_y"


class IntegrationFailure(RuntimeError):
    """Step collapse persisted after detours, or the detour budget ran out."""


@dataclass(frozen=True)
class PainleveParams:
    theta0: complex
    theta1: complex
    theta_inf: complex

    @property
    def a_theta(self):
        return (self.theta0 - self.theta1 + self.theta_inf) ** 2 / 8

    @property
    def b_theta(self):
        return (self.theta0 - self.theta1 - self.theta_inf) ** 2 / 8

    @property
    def c_theta(self):
        return 1 - self.theta0 - self.theta1

    @property
    def Theta(self):
        """``th0 + th1``."""
        return self.theta0 + self.theta1

    @property
    def c2(self):
        """``(th0 - th1)^2 + thinf^2``."""
        return (self.theta0 - self.theta1) ** 2 + self.theta_inf ** 2


def pv_rhs(t, state, params, phi):
    """``(y', y'')`` in ``t`` for the y chart."""
    y, yt = state
    e = np.exp(1j * phi)
    a, b, c = params.a_theta, params.b_theta, params.c_theta
    ytt = ((1 / (2 * y) + 1 / (y - 1)) * yt ** 2 - yt / t
           + (y - 1) ** 2 * (a * y - b / y) / t ** 2 + e * c * y / t
           - e ** 2 * y * (y + 1) / (2 * (y - 1)))
    return np.array([yt, ytt])


def pv_rhs_inv(t, state, params, phi):
    """``(u', u'')`` for ``u = 1/y`` (from ``u'' = -u^2 y'' + 2 u'^2/u``)."""
    u, ut = state
    e = np.exp(1j * phi)
    a, b, c = params.a_theta, params.b_theta, params.c_theta
    utt = (ut ** 2 * (1 - 3 * u) / (2 * u * (1 - u)) - ut / t
           - (1 - u) ** 2 * (a / u - b * u) / t ** 2 - e * c * u / t
           + e ** 2 * u * (1 + u) / (2 * (1 - u)))
    return np.array([ut, utt])


def _swap_chart(state):
    """``(y, y') <-> (1/y, -y'/y^2)``; the map is its own inverse."""
    y, yt = state
    return np.array([1 / y, -yt / y ** 2])


@np.errstate(divide="ignore", invalid="ignore")
def psi_of_y(y):
    return (np.asarray(y) + 1) / (np.asarray(y) - 1)


@np.errstate(divide="ignore", invalid="ignore")
def y_of_psi(psi):
    return (np.asarray(psi) + 1) / (np.asarray(psi) - 1)


@np.errstate(divide="ignore", invalid="ignore")
def lagrangian_b(t, y, yt, params, phi, A):
    """``b = x (a_phi - A)`` with ``a_phi`` the Lagrangian of the solution.

    ``a_phi = 1 - 4(e^{-2i phi} y_t^2 - y^2)/(y (y-1)^2)
    + 4 e^{-i phi} (th0 + th1)(y+1)/((y-1) t)
    + e^{-2i phi} (y-1)((th0-th1+thinf)^2 y - (th0-th1-thinf)^2)/(y t^2)``.
    """
    t, y, yt = (np.asarray(v, dtype=complex) for v in (t, y, yt))
    em = np.exp(-1j * phi)
    p0 = params.theta0 - params.theta1
    a_phi = (1 - 4 * (em ** 2 * yt ** 2 - y ** 2) / (y * (y - 1) ** 2)
             + 4 * em * params.Theta * (y + 1) / ((y - 1) * t)
             + em ** 2 * (y - 1) * ((p0 + params.theta_inf) ** 2 * y
                                    - (p0 - params.theta_inf) ** 2) / (y * t ** 2))
    return np.exp(1j * phi) * t * (a_phi - A)


@dataclass
class RayOptions:
    rtol: float = 1e-12
    atol: float = 1e-12
    chart_switch: float = 1e3
    chart_back: float = 1e2
    fuzz: float = 1e-3
    r_detour: float = 0.5
    h_min_rel: float = 1e-8
    max_detours: int = 10000
    dt_out: float = 0.25


@dataclass
class Trajectory:
    """Samples on the real-``t`` ray; ``valid`` is False inside detour discs."""

    phi: float
    params: PainleveParams
    t: np.ndarray
    y: np.ndarray
    yt: np.ndarray
    chart: np.ndarray
    valid: np.ndarray
    detours: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def x(self):
        return np.exp(1j * self.phi) * self.t

    @property
    def psi(self):
        return psi_of_y(self.y)


@dataclass
class _Piece:
    t_lo: float
    t_hi: float
    sol: object
    chart: str


def _events(chart, opts):
    if chart == Y_CHART:
        evs = [lambda t, s: abs(s[0]) - opts.chart_switch,
               lambda t, s: abs(s[0] - 1) - opts.fuzz,
               lambda t, s: abs(s[0]) - opts.fuzz]
        kinds = ["switch", "near_one", "near_zero"]
    else:
        evs = [lambda t, s: abs(s[0]) - 1 / opts.chart_back,
               lambda t, s: abs(s[0]) - opts.fuzz / opts.chart_switch]
        kinds = ["switch", "near_pole"]
    for ev in evs:
        ev.terminal = True
    return evs, kinds


def _rhs_for(chart, params, phi):
    f = pv_rhs if chart == Y_CHART else pv_rhs_inv
    return lambda t, s: f(t, s, params, phi)


def _state_at(pieces, t):
    for p in reversed(pieces):
        if p.t_lo <= t <= p.t_hi:
            return np.asarray(p.sol(t), dtype=complex), p.chart
    raise IntegrationFailure(f"no stored segment covers t={t}")


def _truncate(pieces, t):
    out = [p for p in pieces if p.t_lo < t]
    if out:
        out[-1].t_hi = min(out[-1].t_hi, t)
    return out


def _arc(state, chart, c, r, params, phi, opts):
    """Upper semicircle ``t = c - r e^{-i s}``, ``s in [0, pi]``, from ``c - r`` to ``c + r``."""
    rhs = _rhs_for(chart, params, phi)

    def f(s, Y):
        w = np.exp(-1j * s)
        return rhs(c - r * w, Y) * (1j * r * w)

    sol = solve_ivp(f, (0.0, np.pi), state, method="DOP853", rtol=opts.rtol, atol=opts.atol)
    if sol.status != 0 or not np.all(np.isfinite(sol.y[:, -1])):
        return None
    return sol.y[:, -1], sol.nfev


def integrate_ray(ic, t_end, params, phi, opts=None):
    """Integrate from ``ic = (t0, y0, y0')`` to ``t_end`` along the real ``t`` axis.

    Returns samples on ``t0 + k dt_out``.  Approaching ``y = 0``, ``y = 1`` or
    a pole (``|u| < fuzz/chart_switch``), or a collapsing step, inserts an
    upper semicircular detour of radius ``r_detour`` centred at the trigger
    point; samples inside the detour disc are marked invalid.
    """
    opts = opts or RayOptions()
    t0, y0, yp0 = float(ic[0]), complex(ic[1]), complex(ic[2])
    if t0 <= 0:
        raise ValueError("t0 must be positive")
    if abs(y0) < opts.fuzz or abs(y0 - 1) < opts.fuzz:
        raise ValueError("initial value too close to a singular value of the equation")
    chart = Y_CHART
    state = np.array([y0, yp0])
    if abs(y0) > opts.chart_switch:
        chart, state = U_CHART, _swap_chart(state)
    t = t0
    pieces, detours = [], []
    stats = dict(nfev=0, chart_switches=0, detours=0)
    while t < t_end:
        evs, kinds = _events(chart, opts)
        sol = solve_ivp(_rhs_for(chart, params, phi), (t, t_end), state, method="DOP853",
                        rtol=opts.rtol, atol=opts.atol, dense_output=True, events=evs,
                        first_step=None)
        stats["nfev"] += sol.nfev
        t_stop = float(sol.t[-1])
        if t_stop > t:
            pieces.append(_Piece(t, t_stop, sol.sol, chart))
        fired = [kinds[i] for i, te in enumerate(sol.t_events) if len(te)]
        small_step = len(sol.t) > 1 and (sol.t[-1] - sol.t[-2]) < opts.h_min_rel * abs(t_stop)
        if sol.status == 1 and fired == ["switch"]:
            state = _swap_chart(sol.y[:, -1])
            chart = U_CHART if chart == Y_CHART else Y_CHART
            stats["chart_switches"] += 1
            t = t_stop
            continue
        if sol.status == 0 and not small_step:
            break
        # singular approach or step collapse: detour around the trigger point
        if len(detours) >= opts.max_detours:
            raise IntegrationFailure("maximum number of detours exceeded")
        c = t_stop
        for r in opts.r_detour * np.array([1.0, 1.5, 2.0]):
            ta = c - r
            if ta < t0:
                continue
            pieces = _truncate(pieces, ta)
            s_a, ch_a = _state_at(pieces, ta) if pieces else (None, None)
            if s_a is None:
                continue
            if ch_a == Y_CHART and abs(s_a[0]) > opts.chart_switch:
                s_a, ch_a = _swap_chart(s_a), U_CHART
            out = _arc(s_a, ch_a, c, r, params, phi, opts)
            if out is not None:
                state, nfev = out
                stats["nfev"] += nfev
                chart = ch_a
                detours.append((c, float(r), "upper"))
                stats["detours"] += 1
                t = c + r
                break
        else:
            raise IntegrationFailure(f"could not detour around t={c:.6g} ({sol.message})")
        if chart == Y_CHART and abs(state[0]) > opts.chart_switch:
            chart, state = U_CHART, _swap_chart(state)
        elif chart == U_CHART and abs(state[0]) > 1 / opts.chart_back:
            chart, state = Y_CHART, _swap_chart(state)
    return _sample(pieces, detours, (t0, y0, yp0), t_end, phi, params, opts, stats)


def _sample(pieces, detours, ic, t_end, phi, params, opts, stats):
    t0 = ic[0]
    n = int(np.floor((t_end - t0) / opts.dt_out + 1e-9)) + 1
    ts = t0 + opts.dt_out * np.arange(n)
    y = np.full(n, np.nan + 0j)
    yt = np.full(n, np.nan + 0j)
    chart = np.array([Y_CHART] * n, dtype=object)
    valid = np.zeros(n, bool)
    y[0], yt[0], valid[0] = ic[1], ic[2], True
    for p in pieces:
        sel = (ts >= p.t_lo) & (ts <= p.t_hi) & ~valid
        if not sel.any():
            continue
        s = np.asarray(p.sol(ts[sel]), dtype=complex).reshape(2, -1)
        if p.chart == U_CHART:
            s = _swap_chart(s)
        y[sel], yt[sel], chart[sel], valid[sel] = s[0], s[1], p.chart, True
    for c, r, _ in detours:
        inside = np.abs(ts - c) < r
        valid[inside] = False
        y[inside] = yt[inside] = np.nan
    return Trajectory(phi, params, ts, y, yt, chart, valid, detours, stats)


def nongeneric_windows(traj, window, min_swing=0.1):
    """Start times of windows of length ``window`` without elliptic oscillation.

    A generic solution oscillates with ``|psi|`` sweeping an O(1) range in
    every window of a few periods; windows where ``max |psi| - min |psi|``
    stays below ``min_swing`` are reported as possibly non-generic.
    """
    psi = np.abs(traj.psi)
    starts = []
    t = traj.t[0]
    while t + window <= traj.t[-1]:
        sel = (traj.t >= t) & (traj.t < t + window) & traj.valid
        if sel.any() and np.ptp(psi[sel]) < min_swing:
            starts.append(float(t))
        t += window
    return starts
