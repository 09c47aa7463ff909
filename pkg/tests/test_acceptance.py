"""Acceptance criteria, one test each, with pinned tolerances.

Every test prints one ``acceptance N: PASS|FAIL`` line; the lines are
repeated in the terminal summary.
"""

import json
import time

import numpy as np
import pytest

from pv_elliptic import cli
from pv_elliptic import error_term as et
from pv_elliptic import verify as V
from pv_elliptic.curve_periods import CurveBranch, solve_boutroux, w_branch
from pv_elliptic.dynamics import PainleveParams
from pv_elliptic.identities import run_identities
from pv_elliptic.leading_order import (IN_S_CHECK, StripSpec, default_delta0, make_frame,
                                       reduce_x0, strip_membership)

PARAMS = PainleveParams(1 / 3, 1 / 5, 1 / 7)
PHIS = (-1.2, -0.7, -0.3, 0.3, 0.7, 1.2)

BOUTROUX_RESIDUAL = 1e-10
BOUTROUX_SECONDS = 10.0
BILINEAR_REL = 1e-9
IDENTITIES_SECONDS = 30.0
PROP44_WINDOWS = (50, 100, 200, 400)
PROP44_STABILITY = 0.5
PROP44_T = 16000.0
W_FACTOR = 2.0
ORDER_BAND = (0.35, 0.72)
PARTS_DIRECT_TOL = 1e-6
PARTS_DIRECT_T = 8000.0
SYNTH_X0_TOL = 1e-4
SYNTH_REMAINDER = 1.0
VERIFY_SECONDS = 300.0

H_DETAILED_REASON = ("the detailed prediction differs from the explicit one at order 1/x: "
                     "x (h_detailed - h_asym) tends to a nonzero constant, see the decisions ledger")


# ---------------------------------------------------------------- shared runs

@pytest.fixture(scope="module")
def solved():
    out = {}
    for phi in PHIS:
        start = time.perf_counter()
        bd = solve_boutroux(phi, tol=BOUTROUX_RESIDUAL)
        out[phi] = (bd, time.perf_counter() - start)
    return out


@pytest.fixture(scope="module")
def verify_run(tmp_path_factory):
    """Default CLI verify run: ``(seconds, exit code, report)``."""
    base = tmp_path_factory.mktemp("verify")
    cfg = base / "config.json"
    cfg.write_text("{}")
    start = time.perf_counter()
    code = cli.main(["verify", "--config", str(cfg), "--out", str(base / "out")])
    elapsed = time.perf_counter() - start
    report = json.loads((base / "out" / "report.json").read_text())
    return elapsed, code, report


def residue_value(A, R=4.0, n_theta=256, n_s=40):
    """``Omega_a E_b - Omega_b E_a`` from the residues at the two points over infinity.

    ``u = int_inf^z dz/w`` is integrated along the radial ray; the product
    ``u (A - z^2)/w dz`` is integrated over ``|z| = R`` and doubled for the
    lower sheet, where both factors change sign.
    """
    curve = CurveBranch(A)
    s, ws = np.polynomial.legendre.leggauss(n_s)
    s, ws = 0.5 * (s + 1), 0.5 * ws
    z = R * np.exp(2j * np.pi * np.arange(n_theta) / n_theta)
    u = -np.sum((z[:, None] / s ** 2) / w_branch(curve, z[:, None] / s) * ws, axis=1)
    omega2 = (A - z ** 2) / w_branch(curve, z)
    return 2 * np.sum(u * omega2 * 1j * z) * (2 * np.pi / n_theta)


def ray_points(frame, targets):
    """First point at or after each target ``t`` lying in the checked strip."""
    bd = frame.bd
    strip = StripSpec(bd.phi, 10.0, 1.0, default_delta0(bd), frame)
    rot = np.exp(1j * bd.phi)
    out = []
    for t in targets:
        for dt in np.arange(0, 10, 0.05):
            if strip_membership(rot * (t + dt), strip) == IN_S_CHECK:
                out.append(rot * (t + dt))
                break
    return np.array(out)


def lattice_gap(a, b, bd):
    r, _, _ = reduce_x0(a - b, bd)
    corners = [0, 2 * bd.Omega_a, 2 * bd.Omega_b, 2 * bd.Omega_a + 2 * bd.Omega_b]
    return min(abs(r - c) for c in corners)


def in_band(ratios, band=ORDER_BAND, need=2):
    run = best = 0
    for r in ratios:
        run = run + 1 if band[0] <= r <= band[1] else 0
        best = max(best, run)
    return best >= need


def fmt(values):
    return "[" + ", ".join(f"{v:.3g}" for v in values) + "]"


# ---------------------------------------------------------------- criteria

def test_1_boutroux_solve(solved, acceptance):
    worst_res = max(max(map(abs, bd.residual)) for bd, _ in solved.values())
    min_im_tau = min(bd.tau0.imag for bd, _ in solved.values())
    worst_time = max(s for _, s in solved.values())
    ok = worst_res <= BOUTROUX_RESIDUAL and min_im_tau > 0 and worst_time < BOUTROUX_SECONDS
    acceptance(1, ok, f"max residual {worst_res:.2e} <= {BOUTROUX_RESIDUAL:g}, "
                      f"min Im tau0 {min_im_tau:.3f} > 0, max {worst_time:.2f} s < {BOUTROUX_SECONDS:g} s")
    assert ok


def test_2_bilinear_relation(solved, acceptance):
    vals = np.array([bd.bilinear for bd, _ in solved.values()])
    spread = np.max(np.abs(vals - vals[0])) / abs(vals[0])
    oracle = np.array([residue_value(bd.A) for bd, _ in solved.values()])
    # the oracle's sign depends on the cycle orientation; compare magnitudes
    mag = max(np.max(np.abs(np.abs(vals) - 4 * np.pi)), np.max(np.abs(np.abs(oracle) - 4 * np.pi)))
    ok = spread <= BILINEAR_REL and mag <= BILINEAR_REL * 4 * np.pi
    acceptance(2, ok, f"spread across phi {spread:.2e}, max ||value| - 4 pi| {mag:.2e} "
                      f"(residue oracle), tol {BILINEAR_REL:g} relative")
    assert ok


def test_3_function_identities(solved, acceptance):
    bd = solved[0.7][0]
    start = time.perf_counter()
    checks = run_identities(bd)
    elapsed = time.perf_counter() - start
    failed = [k for k, v in checks.items() if not v["passed"]]
    ok = not failed and elapsed < IDENTITIES_SECONDS
    acceptance(3, ok, f"{len(checks) - len(failed)}/{len(checks)} residuals under thresholds "
                      f"{failed or ''}, {elapsed:.1f} s < {IDENTITIES_SECONDS:g} s")
    assert ok


def test_4_prop44_constant(solved, acceptance):
    bd = solved[0.7][0]
    frame = make_frame(bd, 1 + 0.5j, -2.29 + 2.16j)
    limit = -2 * PARAMS.c2 / (bd.A - 1)
    C = []
    for lo in PROP44_WINDOWS:
        x = ray_points(frame, np.arange(lo, 2 * lo, lo / 20))
        v = et.prop44_integral(x, frame, PARAMS, T=PROP44_T)
        C.append(np.max(np.abs(x * (x * v - limit))))
    ratios = np.array(C[1:]) / np.array(C[:-1])
    ok = bool(np.all(np.abs(ratios - 1) <= PROP44_STABILITY))
    acceptance(4, ok, f"C per window {fmt(C)}, doubling ratios {fmt(ratios)} within 1 +- {PROP44_STABILITY}")
    assert ok


def test_5_x_delta_bounded(verify_run, acceptance):
    W = verify_run[2]["stats"]["W"]
    finite = bool(np.all(np.isfinite(W)))
    ok = finite and len(W) >= 3 and max(W) / min(W) < W_FACTOR
    acceptance(5, ok, f"W per window {fmt(W)}, max/min {max(W) / min(W):.2f} < {W_FACTOR:g}")
    assert ok and verify_run[2]["gates"]["W_bounded"]


def test_6_h_order(verify_run, acceptance):
    ratios = verify_run[2]["ratios"]["R_h"]
    ok = in_band(ratios)
    acceptance(6, ok, f"R_h ratios {fmt(ratios)}, >= 2 consecutive in {list(ORDER_BAND)}")
    assert ok and verify_run[2]["gates"]["h_order"]


def test_7_b_order(verify_run, acceptance):
    ratios = verify_run[2]["ratios"]["R_b"]
    ok = in_band(ratios)
    acceptance(7, ok, f"R_b ratios {fmt(ratios)}, >= 2 consecutive in {list(ORDER_BAND)}")
    assert ok and verify_run[2]["gates"]["b_order"]


def test_8a_parts_match_direct(solved, acceptance):
    bd = solved[0.7][0]
    frame = make_frame(bd, 1 + 0.5j, -2.29 + 2.16j)
    xs = ray_points(frame, [35, 60, 110, 170, 300])
    parts = et.tail_integrals(xs, frame, PARAMS, T=PARTS_DIRECT_T, tol=1.0)
    direct = et.tail_integrals(xs, frame, PARAMS, T=PARTS_DIRECT_T, tol=1.0, method=et.DIRECT)
    err = {n: float(np.max(np.abs(getattr(parts, n) - getattr(direct, n)))) for n in ("I1", "I2", "I3")}
    ok = len(xs) == 5 and max(err.values()) <= PARTS_DIRECT_TOL
    acceptance("8a", ok, "parts vs direct at 5 points: "
               + ", ".join(f"{k} {v:.1e}" for k, v in err.items()) + f" <= {PARTS_DIRECT_TOL:g}")
    assert ok


@pytest.mark.xfail(strict=True, reason=H_DETAILED_REASON)
def test_8b_h_detailed_order(verify_run, acceptance):
    ratios = verify_run[2]["ratios"]["R_hd"]
    ok = in_band(ratios)
    acceptance("8b", ok, f"|h_detailed - h_asym| ratios {fmt(ratios)}, >= 2 consecutive in "
                         f"{list(ORDER_BAND)} (known failure)")
    assert ok and verify_run[2]["consistency"]["h_detailed_order"]


def test_9_synthetic_closure(solved, acceptance):
    bd = solved[0.7][0]
    truth = make_frame(bd, 2 + 1.5j, -1 + 0.5j)
    t = np.arange(30.0, 480.0 + 1e-9, 0.25)
    rows = []
    for c in (0.05, 0.2 - 0.1j):
        tr = V.synthetic_trajectory(truth, PARAMS, t, lambda x: c / x, lambda x: c / x)
        x0 = V.fit_x0(tr, bd)
        m = V.measure_h(tr, make_frame(bd, x0, 0.0), bd)
        # the fitted x0 absorbs the far-field mean of c/x; separate it from the 1/x part
        (offset, c_fit), *_ = np.linalg.lstsq(np.stack([np.ones_like(m.x), 1 / m.x], 1), m.h, rcond=None)
        x0 = x0 - offset
        beta = V.fit_beta0(tr, make_frame(bd, x0, 0.0), bd)
        m = V.measure_h(tr, make_frame(bd, x0, beta), bd)
        rows.append((c, lattice_gap(x0, truth.x0, bd), abs(beta - truth.beta0),
                     2 * abs(c) / np.abs(m.x).min(), float(np.max(np.abs(m.x ** 2 * (m.h - c / m.x))))))
    ok = all(gx <= SYNTH_X0_TOL and gb <= bb and rem <= SYNTH_REMAINDER for _, gx, gb, bb, rem in rows)
    acceptance(9, ok, "; ".join(f"c={c:.3g}: x0 err {gx:.1e}, beta0 err {gb:.1e} <= {bb:.1e}, "
                                f"sup|x^2 (h - c/x)| {rem:.1e}" for c, gx, gb, bb, rem in rows))
    assert ok


def test_10_verify_runtime(verify_run, acceptance):
    elapsed, code, report = verify_run
    ok = elapsed < VERIFY_SECONDS and code == cli.EXIT_PASS and report["passed"]
    acceptance(10, ok, f"default verify {elapsed:.1f} s < {VERIFY_SECONDS:g} s, exit code {code}")
    assert ok
