import numpy as np
import pytest

from pv_elliptic.leading_order import (
    IN_S,
    IN_S_CHECK,
    OUTSIDE,
    Frame,
    StripSpec,
    b0,
    b0_prime,
    default_delta0,
    frak_b,
    frak_b_prime,
    make_frame,
    min_lattice_distance,
    pole_lattice,
    psi0,
    psi0_prime,
    strip_membership,
)

X0, BETA0 = 1 + 0.5j, 0.3 - 0.2j


@pytest.fixture(scope="module")
def frame(bd):
    return make_frame(bd, X0, BETA0)


@pytest.fixture(scope="module")
def strip(bd, frame):
    return StripSpec(bd.phi, 20.0, 2.0, default_delta0(bd), frame)


@pytest.fixture(scope="module")
def check_points(bd, strip):
    rng = np.random.default_rng(7)
    t = rng.uniform(25, 80, 400) + 1j * rng.uniform(-1.9, 1.9, 400)
    x = np.exp(1j * bd.phi) * t
    x = x[strip_membership(x, strip) == IN_S_CHECK]
    assert x.size >= 100
    return x[:100]


def test_frame_bookkeeping(bd, frame):
    assert frame.b0_at_x0 == frame.beta0 - 2 * bd.E_a * frame.x0 / bd.Omega_a
    assert abs(b0(frame.x0, frame) - frame.b0_at_x0) < 1e-13


def test_x0_reduction_cell(bd):
    f = make_frame(bd, X0 + 6 * bd.Omega_a - 4 * bd.Omega_b, BETA0)
    M = np.array([[2 * bd.Omega_a.real, 2 * bd.Omega_b.real],
                  [2 * bd.Omega_a.imag, 2 * bd.Omega_b.imag]])
    s = np.linalg.solve(M, [f.x0.real, f.x0.imag])
    assert np.all((s >= 0) & (s < 1))


@pytest.mark.parametrize("m,n", [(1, 0), (0, 1), (2, -3)])
def test_reduction_keeps_psi0_and_b0(bd, m, n):
    raw = Frame(bd, X0 + 2 * m * bd.Omega_a + 2 * n * bd.Omega_b, BETA0)
    red = make_frame(bd, raw.x0, raw.beta0)
    x = np.exp(1j * bd.phi) * np.linspace(30, 40, 9) + 0.3j
    assert np.max(np.abs(psi0(x, red) - psi0(x, raw))) < 1e-11
    assert np.max(np.abs(b0(x, red) - b0(x, raw))) < 1e-11


def test_psi0_special_values(bd, frame):
    assert abs(psi0(frame.x0, frame)) < 1e-14
    assert abs(psi0(frame.x0 + bd.Omega_a / 2, frame) - bd.k) < 1e-12


def test_psi0_equation(bd, frame, check_points):
    x, h = check_points, 1e-5
    p = psi0(x, frame)
    dp = (psi0(x + h, frame) - psi0(x - h, frame)) / (2 * h)
    assert np.max(np.abs(4 * dp ** 2 - (1 - p ** 2) * (bd.A - p ** 2))) < 1e-7
    assert np.max(np.abs(psi0_prime(x, frame) - dp)) < 1e-8


def test_b0_equation(bd, frame, check_points):
    x, h = check_points, 1e-5
    db = (b0(x + h, frame) - b0(x - h, frame)) / (2 * h)
    res = db + 2 * (bd.A - psi0(x, frame) ** 2) - 4 * psi0_prime(x, frame)
    assert np.max(np.abs(res)) < 1e-7
    assert np.max(np.abs(b0_prime(x, frame) - db)) < 1e-7


def test_frak_b_identities(bd, frame, check_points):
    x = check_points
    assert abs(frak_b(frame.x0, frame)) < 1e-14
    other = -(bd.Omega_a / 8) * (b0(x, frame) - b0(frame.x0, frame))
    assert np.max(np.abs(frak_b(x, frame) - other)) < 1e-10
    shift = frak_b(x + 2 * bd.Omega_a, frame) - frak_b(x, frame)
    assert np.max(np.abs(shift - bd.E_a * bd.Omega_a / 2)) < 1e-10
    h = 1e-5
    fd = (frak_b(x + h, frame) - frak_b(x - h, frame)) / (2 * h)
    assert np.max(np.abs(frak_b_prime(x, frame) - fd)) < 1e-7


def test_b0_bounded_on_strip(bd, frame, strip):
    def sup_on(t_lo, t_hi):
        t = np.linspace(t_lo, t_hi, 1000)[:, None] + 1j * np.linspace(-1.5, 1.5, 7)[None, :]
        x = (np.exp(1j * bd.phi) * t).ravel()
        x = x[strip_membership(x, strip) != OUTSIDE]
        return np.max(np.abs(b0(x, frame)))

    near, far = sup_on(30, 130), sup_on(1e4, 1e4 + 100)
    # bounded: no growth with t (a linear term would add about 1e4 here)
    assert far < 2 * near
    assert near < 50


def test_pole_lattice(bd, frame):
    P0, Q = pole_lattice(frame, (-20.0, 60.0, 8.0))
    assert np.min(np.abs(P0 - frame.x0)) > 1.0
    assert np.min(np.abs(P0 - (frame.x0 + bd.Omega_b))) < 1e-12
    mags = np.abs(psi0(Q, frame))
    ok = np.isclose(mags, 1, atol=1e-8) | np.isclose(mags, abs(bd.k), atol=1e-8)
    assert Q.size > 10 and ok.all()
    assert np.all(np.abs(psi0(P0 + 1e-7, frame)) > 1e5)


def test_min_lattice_distance(bd):
    d = min_lattice_distance(bd)
    assert 3.0 < d < 4.0
    assert abs(d - min_lattice_distance(bd, reach=5)) < 1e-12


def test_strip_membership(bd, frame, strip):
    rot = np.exp(1j * bd.phi)
    assert strip_membership(rot * 10.0, strip) == OUTSIDE
    P0, Q = pole_lattice(frame, (30.0, 80.0, 1.9))
    assert strip_membership(P0[0] + 0.5 * strip.delta0 * np.exp(0.3j), strip) == OUTSIDE
    assert strip_membership(Q[0] + 0.5 * strip.delta0 * np.exp(0.3j), strip) == IN_S
    # midpoint between consecutive holes along the ray
    holes = np.sort_complex(np.concatenate([P0, Q]) / rot)
    holes = holes[np.abs(holes.imag) < 1.0]
    gaps = np.diff(holes.real)
    i = int(np.argmax(gaps))
    mid = rot * (0.5 * (holes[i].real + holes[i + 1].real))
    assert strip_membership(mid, strip) == IN_S_CHECK


def test_strip_spec_validation(bd, frame):
    with pytest.raises(ValueError):
        StripSpec(bd.phi, 20.0, 2.0, min_lattice_distance(bd), frame)
