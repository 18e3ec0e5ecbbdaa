import json
import math
from fractions import Fraction

import numpy as np
import pytest

from troplag.fan import (
    Cone,
    Fan,
    HalfPlane,
    NonIntegralSlopeError,
    PLFunction,
    build_p2_fan,
    det2,
    dual_cone,
    load_fan_json,
    pairing,
    pl_from_ray_values,
    pl_is_strictly_convex,
    pl_linear_difference,
    primitive,
)


def random_complete_fan(rng):
    """Three random primitive rays whose positive span is the plane."""
    while True:
        rays = []
        while len(rays) < 3:
            v = tuple(int(x) for x in rng.integers(-6, 7, size=2))
            if v != (0, 0) and math.gcd(*v) == 1 and v not in rays:
                rays.append(v)
        order = sorted(range(3), key=lambda i: math.atan2(rays[i][1], rays[i][0]))
        pairs = list(zip(order, order[1:] + order[:1]))
        if all(det2(rays[a], rays[b]) > 0 for a, b in pairs):
            return Fan(tuple(rays), tuple(pairs))


def test_p2_fan_is_complete():
    fan = build_p2_fan()
    assert fan.is_complete()
    assert fan.shared_ray(0, 1) == 2
    assert fan.shared_ray(1, 2) == 0
    assert fan.shared_ray(0, 2) == 1
    assert sorted(fan.cyclic_cone_order(0)) == [0, 1, 2]


def test_incomplete_fan_detected():
    fan = Fan(((1, 0), (0, 1), (-1, 0)), ((0, 1), (1, 2)))
    assert not fan.is_complete()


def test_cone_validation():
    with pytest.raises(ValueError):
        Cone(((2, 0),))
    with pytest.raises(ValueError):
        Cone(((1, 0), (-1, 0)))


def test_cone_contains():
    c = Cone(((1, 0), (0, 1)))
    assert c.contains((2, 3))
    assert c.contains((0, 5))
    assert not c.contains((-1, 1))
    assert c.contains_interior((1, 1))
    assert not c.contains_interior((1, 0))


def test_dual_cone_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(20):
        fan = random_complete_fan(rng)
        for k in range(3):
            c = fan.cone(k)
            d = dual_cone(c)
            for m in ((a, b) for a in range(-4, 5) for b in range(-4, 5)):
                expected = all(pairing(m, v) >= 0 for v in c.rays)
                assert d.contains(m) == expected


def test_dual_cone_low_dimension():
    assert dual_cone(Cone(())) is None
    h = dual_cone(Cone(((1, 1),)))
    assert isinstance(h, HalfPlane)
    assert h.contains((1, -1)) and not h.contains((-1, 0))


def test_pl_from_ray_values_p2():
    fan = build_p2_fan()
    f = pl_from_ray_values(fan, (3, 0, 0))
    assert f.ray_values() == (3, 0, 0)
    assert f.is_continuous()
    assert f.is_integral()
    assert f.slopes == ((0, 0), (3, 0), (0, 3))


def test_pl_from_ray_values_matches_brute_force_solve():
    rng = np.random.default_rng(7)
    for _ in range(200):
        fan = random_complete_fan(rng)
        values = [int(x) for x in rng.integers(-10, 11, size=3)]
        f = pl_from_ray_values(fan, values, require_integral=False)
        for k, (i, j) in enumerate(fan.cones):
            a = np.array([fan.rays[i], fan.rays[j]], dtype=float)
            m = np.linalg.solve(a, np.array([values[i], values[j]], dtype=float))
            assert np.allclose([float(x) for x in f.slopes[k]], m, rtol=1e-12, atol=1e-12)
        assert f.is_continuous()


def test_non_integral_slope_raises():
    fan = Fan(((2, 1), (-1, 1), (0, -1)), ((0, 1), (1, 2), (2, 0)))
    assert fan.is_complete()
    with pytest.raises(NonIntegralSlopeError) as err:
        pl_from_ray_values(fan, (1, 0, 0))
    assert err.value.slope[0].denominator != 1 or err.value.slope[1].denominator != 1


def test_strict_convexity():
    fan = build_p2_fan()
    # rays sum to zero on this fan, so any positive total is ample
    assert pl_is_strictly_convex(pl_from_ray_values(fan, (1, 0, 0)))
    assert pl_is_strictly_convex(pl_from_ray_values(fan, (1, 1, 1)))
    assert not pl_is_strictly_convex(pl_from_ray_values(fan, (0, 0, 0)))
    assert not pl_is_strictly_convex(pl_from_ray_values(fan, (-1, 0, 0)))


def test_linear_difference():
    fan = build_p2_fan()
    f = pl_from_ray_values(fan, (3, 0, 0))
    g = pl_from_ray_values(fan, (1, 1, 1))
    assert pl_linear_difference(f, g) == (Fraction(1), Fraction(1))
    assert pl_linear_difference(f, pl_from_ray_values(fan, (1, 0, 0))) is None


def test_pl_addition_and_evaluation():
    fan = build_p2_fan()
    f = pl_from_ray_values(fan, (1, 0, 0)) + pl_from_ray_values(fan, (0, 2, 0))
    assert f.ray_values() == (1, 2, 0)
    assert f((2, 2)) == 2
    assert f((-3, 0)) == 6


def test_discontinuity_reported():
    fan = build_p2_fan()
    f = PLFunction(fan, ((0, 0), (1, 0), (0, 0)))
    assert not f.is_continuous()
    assert f.continuity_defects()


def test_json_roundtrip():
    fan = build_p2_fan()
    f = pl_from_ray_values(fan, (2, -1, 0))
    text = json.dumps(f.to_json())
    fan2, values = load_fan_json(text)
    assert fan2 == fan
    assert pl_from_ray_values(fan2, values) == f


def test_primitive():
    assert primitive((4, -6)) == (2, -3)
    with pytest.raises(ValueError):
        primitive((0, 0))
