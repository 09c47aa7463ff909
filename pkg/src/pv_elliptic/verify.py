"""Frame fits, measured error terms and their comparison with the predictions.

The measured quantities are ``h_num`` from ``psi_num(x) = psi0(x + h_num)``
and ``b_num - b0``.  Predictions come from :mod:`pv_elliptic.error_term`.
Order tests use dyadic windows ``t in [T, 2T)`` along the ray.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .dynamics import Trajectory, lagrangian_b, y_of_psi
from .error_term import (b_corr_asym, h_asym, h_budget, h_detailed, prop44_integral,
                         tail_integrals)
from .leading_order import (IN_S_CHECK, StripSpec, b0, b0_prime, default_delta0, distance_to_P0,
                            make_frame, min_lattice_distance, psi0, psi0_prime,
                            strip_membership)

FAR_FRACTION = 1 / 3
GRID = 32
COND_MIN = 0.05
NEWTON_ITERS = 5
NEWTON_RES = 1e-10
MIN_WINDOW_SAMPLES = 8
ORDER_BAND = (0.35, 0.72)
SPREAD_FACTOR = 200.0
FUZZ = 1e-3


class FitError(ValueError):
    """The far field does not determine the frame."""


class MeasureError(RuntimeError):
    """No sample yields an admissible ``h``."""


class InsufficientSamples(ValueError):
    """A dyadic window holds fewer than ``MIN_WINDOW_SAMPLES`` rows."""


# ---------------------------------------------------------------- samples

def _usable(traj, fuzz=FUZZ):
    y = traj.y
    ok = traj.valid & np.isfinite(y) & (np.abs(y) > fuzz) & (np.abs(y - 1) > fuzz)
    return np.flatnonzero(ok)


def _far(traj, idx):
    """Indices in the largest-``|x|`` third of the trajectory."""
    t_cut = traj.t[0] + (1 - FAR_FRACTION) * (traj.t[-1] - traj.t[0])
    return idx[traj.t[idx] >= t_cut]


def _chordal(a, b):
    return (a - b) / np.sqrt((1 + np.abs(a) ** 2) * (1 + np.abs(b) ** 2))


def _cell_grid(bd, n=GRID):
    s = (np.arange(n) + 0.5) / n
    s1, s2 = np.meshgrid(s, s)
    return (2 * s1 * bd.Omega_a + 2 * s2 * bd.Omega_b).ravel()


# ---------------------------------------------------------------- fits

def _far_samples(traj):
    idx = _far(traj, _usable(traj))
    return traj.x[idx], traj.psi[idx]


def x0_objective(traj, bd, x0):
    """Mean squared chordal distance between far-field ``psi_num`` and ``psi0(.; x0)``."""
    x, psi = _far_samples(traj)
    return float(np.mean(np.abs(_chordal(psi0(x, make_frame(bd, x0, 0)), psi)) ** 2))


def fit_x0(traj, bd, full_output=False):
    """Least-squares ``x0`` from the far field, reduced to the fundamental cell.

    The objective is the chordal distance between ``psi_num`` and
    ``psi0(.; x0)``, so pole passages carry bounded weight.  A 32 x 32 grid
    over the cell seeds a Levenberg-Marquardt refinement.  With
    ``full_output`` also returns ``{"objective", "uncertainty", "contrast", "n"}``;
    the uncertainty is a sandwich estimate with residuals clustered in
    one-period batches.
    """
    x, psi = _far_samples(traj)
    span = np.ptp(np.abs(x)) if len(x) else 0.0
    need = 3 * min(abs(2 * bd.Omega_a), abs(2 * bd.Omega_b))
    if span < need:
        raise FitError(f"far field spans {span:.3g} < {need:.3g} (three lattice periods)")
    sub = np.linspace(0, len(x) - 1, min(len(x), 256)).astype(int)
    cand = _cell_grid(bd)
    obj = np.empty(len(cand))
    for i, c in enumerate(cand):
        fr = make_frame(bd, c, 0)
        obj[i] = np.mean(np.abs(_chordal(psi0(x[sub], fr), psi[sub])) ** 2)
    contrast = obj.min() / np.median(obj)
    if contrast > 0.25:
        raise FitError(f"flat objective (min/median = {contrast:.3g}); data too short or non-generic")
    seed = cand[np.argmin(obj)]

    def resid(v):
        fr = make_frame(bd, complex(v[0], v[1]), 0)
        r = _chordal(psi0(x, fr), psi)
        return np.concatenate([r.real, r.imag])

    sol = least_squares(resid, [seed.real, seed.imag], method="lm", xtol=1e-14, ftol=1e-14)
    x0 = make_frame(bd, complex(*sol.x), 0).x0
    if not full_output:
        return x0
    # residuals are correlated over a lattice period: cluster them in one-period batches
    n = len(x)
    J = sol.jac
    g = J[:n] * sol.fun[:n, None] + J[n:] * sol.fun[n:, None]
    period = max(abs(2 * bd.Omega_a), abs(2 * bd.Omega_b))
    batch = np.floor((np.abs(x) - np.abs(x).min()) / period).astype(int)
    G = np.array([g[batch == b].sum(axis=0) for b in np.unique(batch)])
    Hinv = np.linalg.pinv(J.T @ J)
    cov = Hinv @ (G.T @ G) @ Hinv
    info = {"objective": float(2 * sol.cost / len(sol.fun)),
            "uncertainty": float(np.sqrt(np.trace(cov))),
            "contrast": float(contrast), "n": int(len(x))}
    return x0, info


def _b_num(traj, idx, bd):
    return lagrangian_b(traj.t[idx], traj.y[idx], traj.yt[idx], traj.params, traj.phi, bd.A)


def _robust_center(d):
    """Median of real and imaginary parts after dropping the top decile by deviation."""
    med = np.median(d.real) + 1j * np.median(d.imag)
    dev = np.abs(d - med)
    keep = dev <= np.quantile(dev, 0.9)
    d = d[keep]
    c = np.median(d.real) + 1j * np.median(d.imag)
    return c, d


def fit_beta0(traj, frame, bd, full_output=False, correction=None):
    """Robust far-field mean of ``b_num - b0(x; beta0 = 0)``.

    ``correction`` is an array aligned with the trajectory samples holding
    a predicted ``b - b0`` (NaN where unavailable); when given, it is
    subtracted and only samples where it is finite are used.
    ``mad`` is the median absolute deviation of the kept samples and the
    spread is ``mad`` times the nearest far ``|x|``; a spread exceeding ``SPREAD_FACTOR`` raises :class:`FitError`.
    """
    idx = _far(traj, _usable(traj))
    x = traj.x[idx]
    keep = distance_to_P0(x, frame) >= default_delta0(bd)
    if correction is not None:
        keep &= np.isfinite(correction[idx])
    idx, x = idx[keep], x[keep]
    if len(idx) < MIN_WINDOW_SAMPLES:
        raise FitError("too few far-field samples away from the poles of b0")
    base = make_frame(bd, frame.x0, 0)
    d = _b_num(traj, idx, bd) - b0(x, base)
    if correction is not None:
        d = d - correction[idx]
    beta, kept = _robust_center(d)
    mad = float(np.median(np.abs(kept - beta)))
    spread = mad * float(np.abs(x).min())
    if spread > SPREAD_FACTOR:
        raise FitError(f"beta0 spread {spread:.3g} exceeds {SPREAD_FACTOR:g}/|x|; wrong x0 or non-generic data")
    beta = complex(beta)
    if not full_output:
        return beta
    return beta, {"spread": spread, "mad": mad, "n": int(len(idx))}


# ---------------------------------------------------------------- measurement

@dataclass
class HMeasurement:
    """Accepted samples ``index`` with ``h`` solving ``psi0(x + h) = psi_num(x)``."""

    index: np.ndarray
    x: np.ndarray
    psi: np.ndarray
    h: np.ndarray
    rejected: dict = field(default_factory=dict)


def default_strip(traj, frame):
    return StripSpec(traj.phi, traj.t[0] - 1e-9, 1.0, default_delta0(frame.bd), frame)


def _restrip(strip, frame):
    """``strip`` with its frame replaced by ``frame`` (holes follow the fitted lattice)."""
    if strip is None:
        return None
    return StripSpec(strip.phi, strip.t_inf, strip.kappa0, strip.delta0, frame)


def measure_h(traj, frame, bd, strip=None):
    """Newton-solve ``psi0(x + h) = psi_num(x)`` on samples of the checked strip.

    Starts at ``h = 0`` and takes at most five steps.  Samples with
    ``|psi0'(x)| < COND_MIN``, non-converged residuals or
    ``|h| >= dmin/4`` are rejected and counted.
    """
    strip = strip or default_strip(traj, frame)
    idx = _usable(traj)
    x = traj.x[idx]
    ok = np.asarray(strip_membership(x, strip) == IN_S_CHECK, dtype=bool)
    ok &= np.abs(psi0_prime(x, frame)) >= COND_MIN
    n_cond = int(len(idx) - ok.sum())
    idx, x = idx[ok], x[ok]
    target = traj.psi[idx]
    h = np.zeros(len(x), complex)
    with np.errstate(all="ignore"):
        for _ in range(NEWTON_ITERS):
            h = h - (psi0(x + h, frame) - target) / psi0_prime(x + h, frame)
        res = np.abs(psi0(x + h, frame) - target) / np.maximum(1, np.abs(target))
    conv = np.isfinite(res) & (res < NEWTON_RES)
    branch = conv & (np.abs(h) < min_lattice_distance(bd) / 4)
    rejected = {"conditioning": n_cond, "newton": int((~conv).sum()),
                "branch": int((conv & ~branch).sum())}
    if not branch.any():
        raise MeasureError(f"no admissible sample ({rejected})")
    return HMeasurement(idx[branch], x[branch], target[branch], h[branch], rejected)


def h_along_path(xs, psis, frame, h_start=0.0):
    """Continue ``h`` with ``psi0(x + h) = psi`` along ordered points, seeding each Newton solve
    with the previous value."""
    h = complex(h_start)
    out = np.empty(len(xs), complex)
    for i, (x, p) in enumerate(zip(xs, psis)):
        for _ in range(NEWTON_ITERS):
            h -= complex((psi0(x + h, frame) - p) / psi0_prime(x + h, frame))
        out[i] = h
    return out


# ---------------------------------------------------------------- frame refinement

def _far_mask(traj, index):
    return np.isin(index, _far(traj, index))


def fit_frame(traj, bd, tol=1e-4, passes=3, strip=None):
    """``(frame, info)`` from the far field.

    First-order fit: :func:`fit_x0`, the mean far ``h_num`` and
    :func:`fit_beta0`.  Each refinement pass then removes the far-field mean
    of ``h_num - h_asym`` from ``x0`` and refits ``beta0`` against
    ``b_num - b0 - b_corr_asym``, so the ``O(x^-1)`` terms no longer bias
    the constants.
    """
    params = traj.params
    x0, info_x = fit_x0(traj, bd, full_output=True)
    frame = make_frame(bd, x0, 0)
    meas = measure_h(traj, frame, bd, _restrip(strip, frame))
    far = _far_mask(traj, meas.index)
    frame = make_frame(bd, frame.x0 - np.mean(meas.h[far]), 0)
    beta, info_b = fit_beta0(traj, frame, bd, full_output=True)
    frame = make_frame(bd, frame.x0, beta)
    shifts = []
    for _ in range(passes):
        meas = measure_h(traj, frame, bd, _restrip(strip, frame))
        far = _far_mask(traj, meas.index)
        tab = tail_integrals(meas.x, frame, params, tol)
        dx = np.mean(meas.h[far] - h_asym(meas.x, frame, params, table=tab)[far])
        frame = make_frame(bd, frame.x0 - dx, frame.beta0)
        meas = measure_h(traj, frame, bd, _restrip(strip, frame))
        tab = tail_integrals(meas.x, frame, params, tol)
        bc = np.full(len(traj.t), np.nan + 0j)
        bc[meas.index] = b_corr_asym(meas.x, frame, params, meas.h, table=tab)
        beta_new, info_b = fit_beta0(traj, frame, bd, full_output=True, correction=bc)
        shifts.append((complex(dx), complex(beta_new - frame.beta0)))
        frame = make_frame(bd, frame.x0, beta_new)
    info = {"x0_fit": info_x, "beta0_fit": info_b, "refinement_shifts": shifts}
    return frame, info


# ---------------------------------------------------------------- comparison

def dyadic_windows(t0, t1):
    """``[T, 2T)`` windows starting at ``t0`` that fit inside ``[t0, t1]``."""
    out, T = [], float(t0)
    while 2 * T <= t1 + 1e-9:
        out.append((T, 2 * T))
        T *= 2
    return out


def order_gate(R, band=ORDER_BAND, need=2):
    """Successive ratios of ``R`` and whether ``need`` consecutive ones lie in ``band``."""
    R = np.asarray(R, dtype=float)
    ratios = R[1:] / R[:-1]
    inside = (ratios >= band[0]) & (ratios <= band[1])
    run = best = 0
    for v in inside:
        run = run + 1 if v else 0
        best = max(best, run)
    return ratios, bool(best >= need)


def bounded_gate(W, factor=2.0, need=3):
    W = np.asarray(W, dtype=float)
    ok = len(W) >= need and np.all(np.isfinite(W)) and W.min() > 0 and W.max() / W.min() < factor
    return bool(ok)


@dataclass
class ComparisonReport:
    """Per-sample rows, dyadic window statistics and fit diagnostics.

    ``rows`` maps column names to arrays (``x``, ``t``, ``psi_num``,
    ``h_num``, ``delta_num``, ``h_pred``, ``b_num``, ``b0``,
    ``b_corr_pred``, ``h_budget``, ``b_budget``).  ``windows`` holds
    ``(T, 2T)`` pairs and ``stats`` the per-window sup statistics.
    ``consistency`` holds internal checks between equivalent forms of the
    prediction.
    """

    rows: dict
    windows: list
    stats: dict
    ratios: dict
    gates: dict
    fit: dict
    consistency: dict = field(default_factory=dict)

    @property
    def passed(self):
        """All verification gates; ``consistency`` checks are reported separately."""
        return all(self.gates.values())


def _window_sup(t, values, windows):
    out = []
    for lo, hi in windows:
        w = (t >= lo) & (t < hi)
        if w.sum() < MIN_WINDOW_SAMPLES:
            raise InsufficientSamples(f"window [{lo:g}, {hi:g}) holds {int(w.sum())} samples")
        out.append(float(np.max(np.abs(values[w]))))
    return np.array(out)


def compare(traj, frame, params, bd, tol=1e-4, fit=None, consistency=True, strip=None):
    """Measured versus predicted error terms on the checked strip.

    Gates: ``W(T) = sup |x Delta_num|`` bounded within a factor 2, and the
    ``O(x^-2)`` mismatches measured against ``x^-1``, ``R_h = sup|x (h_num -
    h_pred)|`` and ``R_b = sup|x (b_num - b0 - b_corr)|``, halving under
    doubling.  Ratios to ``sup|h_num|`` and ``sup|b_num - b0|`` are reported
    as ``rel_h`` and ``rel_b``.  With ``consistency`` also ``R_hd`` for
    ``h_detailed - h_asym`` and the windowed constant
    ``prop44_C = sup|x (x I_F2 + 2 c2/(A - 1))|``.
    """
    meas = measure_h(traj, frame, bd, _restrip(strip, frame))
    x, t = meas.x, traj.t[meas.index]
    tab = tail_integrals(x, frame, params, tol)
    h_pred = h_asym(x, frame, params, table=tab)
    b_corr = b_corr_asym(x, frame, params, meas.h, table=tab)
    b_num = _b_num(traj, meas.index, bd)
    b_lead = b0(x, frame)
    hb = h_budget(tab)
    bb = np.abs(b0_prime(x, frame)) * hb + tab.bounds["I3"]
    rows = {"x": x, "t": t, "psi_num": meas.psi, "h_num": meas.h, "delta_num": meas.h / 2,
            "h_pred": h_pred, "b_num": b_num, "b0": b_lead, "b_corr_pred": b_corr,
            "h_budget": np.full(len(x), hb), "b_budget": bb}
    windows = dyadic_windows(traj.t[0], traj.t[-1])
    chi = b_num - b_lead
    sup = lambda v: _window_sup(t, v, windows)
    stats = {"W": sup(x * meas.h / 2),
             "R_h": sup(x * (meas.h - h_pred)),
             "R_b": sup(x * (chi - b_corr)),
             "sup_h": sup(meas.h), "sup_chi": sup(chi)}
    stats["rel_h"] = sup(meas.h - h_pred) / stats["sup_h"]
    stats["rel_b"] = sup(chi - b_corr) / stats["sup_chi"]
    gates = {"W_bounded": bounded_gate(stats["W"])}
    ratios, checks = {}, {}
    ratios["R_h"], gates["h_order"] = order_gate(stats["R_h"])
    ratios["R_b"], gates["b_order"] = order_gate(stats["R_b"])
    ratios["rel_h"], _ = order_gate(stats["rel_h"])
    ratios["rel_b"], _ = order_gate(stats["rel_b"])
    if consistency:
        hd = h_detailed(x, frame, params, tol)
        rows["h_detailed"] = hd
        stats["R_hd"] = sup(x * (hd - h_pred))
        ratios["R_hd"], checks["h_detailed_order"] = order_gate(stats["R_hd"])
        rows["prop44"] = prop44_integral(x, frame, params, tol)
        stats["prop44_C"] = sup(x * (x * rows["prop44"] + 2 * params.c2 / (bd.A - 1)))
    fit = dict(fit or {})
    fit.update({"x0": frame.x0, "beta0": frame.beta0, "rejected": meas.rejected,
                "tail_T": tab.T, "tail_bounds": dict(tab.bounds)})
    return ComparisonReport(rows, windows, stats, ratios, gates, fit, checks)


# ---------------------------------------------------------------- synthetic data

@np.errstate(invalid="ignore", divide="ignore")
def synthetic_trajectory(frame, params, t, h_fn, b_fn=None):
    """Trajectory with ``psi = psi0(x + h_fn(x))`` and ``b = b0(x) + b_fn(x)``.

    ``y'`` is chosen so that :func:`lagrangian_b` returns the requested ``b``
    (only ``y'^2`` enters).  Samples where either function is not finite,
    or within ``FUZZ`` of ``y in {0, 1}``, are marked invalid.
    """
    bd, phi = frame.bd, frame.bd.phi
    t = np.asarray(t, dtype=float)
    x = np.exp(1j * phi) * t
    h = np.asarray(h_fn(x), dtype=complex)
    db = np.asarray(b_fn(x) if b_fn is not None else np.zeros_like(x), dtype=complex)
    fin = np.isfinite(h) & np.isfinite(db)
    psi = np.full(len(t), np.nan + 0j)
    psi[fin] = psi0(x[fin] + h[fin], frame)
    y = y_of_psi(psi)
    b = np.full(len(t), np.nan + 0j)
    b[fin] = b0(x[fin], frame) + db[fin]
    a_phi = bd.A + b / x
    em = np.exp(-1j * phi)
    p0 = params.theta0 - params.theta1
    rest = (4 * em * params.Theta * (y + 1) / ((y - 1) * t)
            + em ** 2 * (y - 1) * ((p0 + params.theta_inf) ** 2 * y
                                   - (p0 - params.theta_inf) ** 2) / (y * t ** 2))
    yt2 = (y ** 2 - (a_phi - 1 - rest) * y * (y - 1) ** 2 / 4) / em ** 2
    yt = np.sqrt(yt2)
    valid = np.isfinite(y) & np.isfinite(yt) & (np.abs(y) > FUZZ) & (np.abs(y - 1) > FUZZ)
    chart = np.array(["y"] * len(t), dtype=object)
    return Trajectory(phi, params, t, y, yt, chart, valid)
