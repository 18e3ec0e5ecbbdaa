import math

import numpy as np
import pytest

from troplag import caustic as ca

THIRDS = [0.0, 2 * math.pi / 3, 4 * math.pi / 3]


def test_grad_matches_finite_differences_of_f():
    h = 1e-6
    rng = np.random.default_rng(2)
    for r, th in zip(rng.uniform(0.1, 3, 30), rng.uniform(0, 4 * math.pi, 30)):
        dr = (ca.f_caustic(r + h, th) - ca.f_caustic(r - h, th)) / (2 * h)
        dth = (ca.f_caustic(r, th + h) - ca.f_caustic(r, th - h)) / (2 * h) / r**2
        fd = np.array([dr, dth])
        an = np.array(ca.grad_caustic(r, th))
        assert np.linalg.norm(fd - an) / np.linalg.norm(an) < 1e-6


def test_first_integral_is_orthogonal_to_flow():
    h = 1e-6
    for r, th in [(0.5, 0.3), (1.7, 2.0), (0.2, 5.5)]:
        dr, dth = ca.grad_caustic(r, th)
        dq_dr = (ca.first_integral(r + h, th) - ca.first_integral(r - h, th)) / (2 * h)
        dq_dth = (ca.first_integral(r, th + h) - ca.first_integral(r, th - h)) / (2 * h)
        assert abs(dq_dr * dr + dq_dth * dth) < 1e-6


def test_f_is_double_cover_function():
    # single-valued on the double cover, sign-flipped after one turn of the base
    for th in (0.1, 1.0, 2.5):
        assert ca.f_caustic(1.0, th + 4 * math.pi) == pytest.approx(ca.f_caustic(1.0, th))
        assert ca.f_caustic(1.0, th + 2 * math.pi) == pytest.approx(-ca.f_caustic(1.0, th))


def test_singular_origin():
    with pytest.raises(ca.SingularPointError):
        ca.grad_caustic(0.0, 1.0)
    with pytest.raises(ca.SingularPointError):
        ca.integrate_flow((0.0, 0.0))
    with pytest.raises(ValueError):
        ca.PolarPoint(-1.0, 0.0)


def test_separatrices():
    angles = ca.find_separatrices()
    assert len(angles) == 3
    assert np.allclose(angles, THIRDS, atol=1e-6)
    assert ca.separatrix_report(angles)["ok"]


def test_separatrices_stable_under_grid_refinement():
    a = ca.find_separatrices(n_grid=720)
    b = ca.find_separatrices(n_grid=2160)
    assert np.allclose(a, b, atol=1e-9)


def test_separatrix_is_a_ray():
    # the outgoing ray over 2 pi / 3 lives on the second sheet; the first is incoming
    out = ca.integrate_flow((1e-3, 8 * math.pi / 3), 1e-4, 20000)
    assert np.allclose(out.theta, 8 * math.pi / 3, atol=1e-12)
    assert out.r[-1] > out.r[0]
    inc = ca.integrate_flow((1e-3, 2 * math.pi / 3), 1e-4, 20000)
    assert inc.r[-1] < inc.r[0]


def test_flow_conserves_first_integral_and_increases_f():
    path = ca.integrate_flow((0.5, 0.4), 1e-4, 30000)
    q = path.Q
    assert np.max(np.abs(q - q[0])) / abs(q[0]) < 1e-8
    assert np.all(np.diff(path.f) > 0)
    assert path.stop_reason == "r_max"


def test_backward_flow_decreases_f():
    path = ca.integrate_flow((1.0, 0.4), 1e-4, 2000, direction=-1)
    assert np.all(np.diff(path.f) < 0)


def test_rotation_by_4pi_over_3_maps_flow_lines_to_flow_lines():
    start = (0.8, 0.25)
    a = ca.integrate_flow(start, 1e-4, 5000)
    b = ca.integrate_flow((start[0], start[1] + 4 * math.pi / 3), 1e-4, 5000)
    rot = a.rotated(4 * math.pi / 3)
    assert np.allclose(rot.r, b.r, atol=1e-12)
    assert np.allclose(rot.theta, b.theta, atol=1e-12)
    assert np.allclose(rot.f, b.f, rtol=1e-10)


def test_rotation_by_2pi_over_3_reverses_f():
    # on the single cover the 2 pi / 3 rotation is an anti-symmetry of f
    for r, th in [(0.5, 0.2), (1.3, 1.9)]:
        assert ca.f_caustic(r, th + 2 * math.pi / 3) == pytest.approx(-ca.f_caustic(r, th))


def test_csv_output():
    path = ca.integrate_flow((1.0, 0.1), 1e-3, 10)
    lines = path.to_csv().splitlines()
    assert lines[0] == "t,r,theta,f,Q"
    assert len(lines) == len(path) + 1


def test_bad_arguments():
    with pytest.raises(ValueError):
        ca.integrate_flow((1.0, 0.0), step=0)
    with pytest.raises(ValueError):
        ca.find_separatrices(r0=0)
    with pytest.raises(ValueError):
        ca.find_separatrices(n_grid=4)
