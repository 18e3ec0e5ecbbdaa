import math

import numpy as np
import pytest
from sklearn.base import clone

from troplag import tropical as tp
from troplag.cover import build_L, trivial_double

H = 1e-5


def interior_points(n=40, seed=0, margin=0.02):
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < n:
        x1, x2 = rng.uniform(margin, 1 - margin, size=2)
        if 1 - x1 - x2 > margin:
            pts.append((float(x1), float(x2)))
    return pts


def fd_gradient(f, x):
    x = np.asarray(x, dtype=float)
    out = np.zeros(2)
    for k in range(2):
        e = np.zeros(2)
        e[k] = H
        out[k] = (f(x + e) - f(x - e)) / (2 * H)
    return out


def fd_jacobian(F, x):
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(2):
        e = np.zeros(2)
        e[k] = H
        cols.append((F(x + e) - F(x - e)) / (2 * H))
    return np.column_stack(cols)


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b)


def test_gradients_match_finite_differences():
    for x in interior_points():
        assert rel(fd_gradient(tp.g_P, x), tp.gradient_g(x)) < 1e-6
        assert rel(fd_gradient(tp.psi, x), tp.gradient_psi(x)) < 1e-6


def test_hessians_match_finite_differences():
    for x in interior_points():
        assert rel(fd_jacobian(tp.gradient_g, x), tp.hessian_g(x)) < 1e-6
        assert rel(fd_jacobian(tp.gradient_psi, x), tp.hessian_psi(x)) < 1e-6


def test_potential_values():
    x = (0.25, 0.25)
    assert tp.g_P(x) == pytest.approx(0.5 * (2 * 0.25 * math.log(0.25) + 0.5 * math.log(0.5)))
    assert tp.psi(x) == pytest.approx(0.0625 * 3 - 0.5)
    pot = tp.potentials(x)
    assert pot.g1 == pytest.approx(0.5 * math.log(0.5))


def test_domain_errors():
    with pytest.raises(tp.DomainError):
        tp.g_P((0.7, 0.5))
    with pytest.raises(tp.DomainError):
        tp.gradient_g((0.0, 0.5))


def test_legendre_roundtrip():
    for x in interior_points():
        p = tp.legendre_x(tp.legendre_xi(x, None))
        assert abs(p.x1 - x[0]) < 1e-10 and abs(p.x2 - x[1]) < 1e-10


def test_legendre_x_is_gradient_of_potential():
    def phi(xi):
        return 0.5 * np.logaddexp.reduce([0.0, 2 * xi[0], 2 * xi[1]])

    for xi in [(0.3, -1.2), (2.0, 1.0), (-5.0, 4.0)]:
        p = tp.legendre_x(xi)
        assert rel(fd_gradient(phi, xi), [p.x1, p.x2]) < 1e-6


def test_legendre_x_extreme_arguments_stay_finite():
    p = tp.legendre_x((400.0, -400.0))
    assert p.x1 == pytest.approx(1.0) and p.x2 == 0.0


def test_entry_identities():
    for x in interior_points(10):
        for h in (1.0, 0.1, 0.01):
            e = tp.connection_entries(x, h)
            assert 0 <= e.E1 + e.E2 <= 1
            assert e.E12**2 == pytest.approx(e.E1 * e.E2, rel=1e-12, abs=1e-300)
            dz1, dz2 = tp.assemble_connection(x, h)
            assert np.trace(dz1) == pytest.approx(3 * e.E1)
            assert np.trace(dz2) == pytest.approx(3 * e.E2)


def test_region_classification():
    for region, grid in tp.default_grids().items():
        for x in grid:
            assert tp.region_classify(x) == region
            assert tp.boundary_distance(x) >= 0.05
    assert tp.region_classify((0.4, 0.4)) == "boundary"
    assert tp.region_classify((0.2, 0.6)) == "P2"
    assert tp.region_classify((0.2, 0.4)) == "boundary"  # x1 + 2 x2 = 1
    assert tp.boundary_distance((0.4, 0.4)) == 0.0


def test_limits_reached_at_small_hbar():
    for region, grid in tp.default_grids().items():
        lim = tp.tropical_limit(region)
        a1, a2 = tp.tropical_connection(region)
        for x in grid:
            err = tp.entry_errors(x, 1e-3, lim)
            assert err.max() < 1e-12
            d1, d2 = tp.assemble_connection(x, 1e-3)
            assert np.allclose(d1, a1, atol=1e-12) and np.allclose(d2, a2, atol=1e-12)


def test_undefined_region():
    with pytest.raises(tp.UndefinedRegionError):
        tp.tropical_limit("boundary")
    with pytest.raises(tp.UndefinedRegionError):
        tp.tropical_connection("P3")


def test_convergence_sweep_default_grids():
    grid = [x for g in tp.default_grids().values() for x in g]
    rep = tp.convergence_sweep(grid, [0.1, 0.05, 0.025, 0.0125])
    assert rep.ok
    assert len(rep.points) == 27 and not rep.excluded
    assert rep.max_final_error() <= 1e-6
    assert rep.to_csv().count("\n") == 1 + 27 * 4


def test_convergence_sweep_excludes_boundary_and_validates_hbars():
    rep = tp.convergence_sweep([(0.4, 0.4), (0.7, 0.1)], [0.1, 0.05])
    assert len(rep.excluded) == 1 and len(rep.points) == 1
    with pytest.raises(ValueError):
        tp.convergence_sweep([(0.7, 0.1)], [0.05, 0.1])


def test_hessian_positive_on_grid():
    for x in interior_points(100, seed=5, margin=1e-3):
        pd, det, alpha = tp.hessian_check(x, 0.1)
        assert pd and det > 0 and alpha > 0


def test_trop_potential_limit_converges():
    rows = tp.trop_potential_limit(3, (0.5, -0.25), [2.0, 10.0, 100.0, 1e4])
    errs = [r["error"] for r in rows]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert rows[0]["limit"] == 1.5
    with pytest.raises(ValueError):
        tp.trop_potential_limit(1, (0, 0), [0.5])


def test_syz_connection_matches_tropical_connection():
    conn = tp.syz_connection_of_multisection(build_L())
    for k, region in tp.CONE_TO_REGION.items():
        a1, a2 = tp.tropical_connection(region)
        assert np.array_equal(conn[k][0], a1)
        assert np.array_equal(conn[k][1], a2)


def test_syz_connection_of_trivial_cover_is_zero():
    conn = tp.syz_connection_of_multisection(trivial_double())
    assert all(not m.any() for pair in conn.values() for m in pair)


def test_transformer_estimator_api():
    t = tp.TropicalLimitTransformer(hbar=0.0125)
    assert clone(t).get_params() == {"hbar": 0.0125}
    X = np.array(tp.region_grid("P1"))
    out = t.fit_transform(X)
    assert out.shape == (9, 3)
    assert np.allclose(out, t.limits(X), atol=1e-6)
    with pytest.raises(ValueError):
        tp.TropicalLimitTransformer(hbar=-1).fit(X)


def test_region_classifier_estimator_api():
    X = np.array([x for g in tp.default_grids().values() for x in g] + [[0.4, 0.4]])
    clf = tp.RegionClassifier().fit(X)
    pred = clf.predict(X)
    assert list(pred[:9]) == ["P0"] * 9
    assert pred[-1] == "boundary"
    assert clf.score(X, pred) == 1.0
