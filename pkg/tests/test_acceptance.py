"""Acceptance criteria, one test each, at the stated tolerances.

Each test records a PASS/FAIL line (shown in the terminal summary) before
asserting, so failing criteria are reported with their witnesses.
"""

import math
import time

import numpy as np

from troplag import caustic as ca
from troplag import gluing as g
from troplag import tropical as tp
from troplag.cover import build_L, build_Lprime, monodromy, trace_pl
from troplag.exact import LaurentMatrix
from troplag.fan import Fan, build_p2_fan, det2, pl_from_ray_values

DEFAULT = "a0=-1,b0=1,a1=1,b1=1,a2=1,b2=1"
CONE_COMPLEX = "a0=-1,b0=1,a1=1,b1=-1,a2=-1,b2=1"
HBARS = [0.1, 0.05, 0.025, 0.0125]


def glued(ms, constants, ls=g.LocalSystem.standard()):
    sf = g.semiflat_cocycle(ms, constants)
    return g.twisted_cocycle(g.corrected_cocycle(sf, g.wall_factors(constants)), ls)


def is_zero(m: LaurentMatrix) -> bool:
    return all(x.is_zero() for row in m.entries() for x in row)


def test_criterion_01_exact_gluing_identity(criterion):
    start = time.perf_counter()
    P = g.Constants.parametric()
    L = build_L()
    ls = g.LocalSystem.standard()
    symbolic = g.twisted_corrected_defect(g.semiflat_cocycle(L, P), g.wall_factors(P), ls).is_identity()
    rng = np.random.default_rng(2024)
    bad = 0
    for _ in range(200):
        c = g.Constants.random(rng)
        if not g.twisted_corrected_defect(g.semiflat_cocycle(L, c), g.wall_factors(c), ls).is_identity():
            bad += 1
    elapsed = time.perf_counter() - start
    ok = symbolic and bad == 0 and elapsed < 5
    criterion(1, "twisted corrected loop product is I", ok,
              f"symbolic={symbolic}, random failures={bad}/200, {elapsed:.2f}s")
    assert ok


def test_criterion_02_naive_defect_witness(criterion):
    P = g.Constants.parametric()
    L = build_L()
    d = g.cocycle_defect(g.semiflat_cocycle(L, P))
    v = g.torus_variables(P.params)
    p = {n: P.poly(n, v) for n in g.CONSTANT_NAMES}
    expected = LaurentMatrix([[0, p["b0"] * p["b1"] * p["b2"]], [p["a0"] * p["a1"] * p["a2"], 0]], v)
    ones = g.cocycle_defect(g.semiflat_cocycle(L, g.Constants.ones()))
    perm = monodromy(L)
    base = L.sheets_over(0)
    pm = LaurentMatrix([[int(perm(base[c]) == base[r]) for c in range(2)] for r in range(2)], g.TORUS)
    ok = d == expected and ones == pm and perm.is_transposition()
    criterion(2, "naive defect is antidiagonal; unit constants give the sheet swap", ok, f"defect={d.to_strings()}")
    assert ok


def test_criterion_03_tangent_isomorphism(criterion):
    start = time.perf_counter()
    P = g.Constants.parametric()
    E = glued(build_L(), P)
    T = g.reference_tangent_cocycle(P.params)
    unfixed = g.intertwining_residuals(g.standard_intertwiner(P, fixed_signs=False), T, E)
    corrected = g.intertwining_residuals(g.standard_intertwiner(P, fixed_signs=True), T, E)
    cocycle_ok = g.cocycle_defect(E).is_identity()
    unfixed_ok = all(is_zero(r) for r in unfixed.values()) and cocycle_ok
    corrected_ok = all(is_zero(r) for r in corrected.values()) and cocycle_ok

    c = g.Constants.parse(DEFAULT)
    res = g.solve_intertwiner(g.reference_tangent_cocycle(), glued(build_L(), c), 3)
    has_unfixed = res.contains(g.standard_intertwiner(c, fixed_signs=False))
    has_corrected = res.contains(g.standard_intertwiner(c, fixed_signs=True))
    elapsed = time.perf_counter() - start
    failing = [str(k) for k, r in unfixed.items() if not is_zero(r)]
    ok = unfixed_ok and res.found and has_unfixed and elapsed < 60
    criterion(
        3,
        "standard intertwiner satisfies the relations and lies in the solved space",
        ok,
        f"relations failing on {failing}; sign-fixed maps satisfy all={corrected_ok}; "
        f"solver found={res.found}, nullity={res.nullity}, contains standard={has_unfixed}, "
        f"contains sign-fixed={has_corrected}; {elapsed:.2f}s",
    )
    assert ok


def test_criterion_04_trace_and_determinant(criterion):
    fan = build_p2_fan()
    o3 = pl_from_ray_values(fan, (3, 0, 0))
    tr = trace_pl(build_L())
    P = g.Constants.parametric()
    dc = g.determinant_check(glued(build_L(), P), o3)
    loop_one = dc["loop_product"].is_constant() and dc["loop_product"].constant_value() == 1
    ok = tr == o3 and all(dc["constant"].values()) and loop_one
    ratios = {str(k): str(v) for k, v in dc["ratios"].items()}
    criterion(4, "trace is the (3,0,0) supporting function; det agrees up to constants", ok, f"ratios={ratios}")
    assert ok


def test_criterion_05_tropical_limits(criterion):
    start = time.perf_counter()
    grids = tp.default_grids()
    grid = [x for pts in grids.values() for x in pts]
    far = min(tp.boundary_distance(x) for x in grid)
    rep = tp.convergence_sweep(grid, HBARS)
    elapsed = time.perf_counter() - start
    monotone = all(p["monotone"] for p in rep.points)
    slopes = max(p["slope"] for p in rep.points)
    final = rep.max_final_error()
    ok = (len(rep.points) == 27 and far >= 0.05 and monotone and final <= 1e-6 and slopes < 0 and elapsed < 1)
    criterion(5, "connection entries converge to their tropical limits", ok,
              f"max final error={final:.2e}, max slope={slopes:.3f}, min wall distance={far:.3f}, {elapsed:.3f}s")
    assert ok


def test_criterion_06_hessian_positivity(criterion):
    n, failures = 20, 0
    for i in range(n):
        for j in range(n):
            x1 = (i + 0.5) / n
            x2 = (1 - x1) * (j + 0.5) / n
            pd, det, alpha = tp.hessian_check((x1, x2), 0.1)
            if not (pd and alpha > 0):
                failures += 1
    ok = failures == 0
    criterion(6, "Hessian positive definite with alpha > 0 on a 20x20 grid", ok, f"failures={failures}/400")
    assert ok


def test_criterion_07_caustic_model(criterion):
    start = time.perf_counter()
    angles = ca.find_separatrices()
    expected = [0.0, 2 * math.pi / 3, 4 * math.pi / 3]
    sep_ok = len(angles) == 3 and all(abs(a - e) <= 1e-6 for a, e in zip(angles, expected))
    worst_q, increasing = 0.0, True
    for start_pt in [(0.5, 0.4), (0.3, 2.0), (1.0, 5.0), (0.05, 9.0)]:
        path = ca.integrate_flow(start_pt, 1e-4, 20000)
        worst_q = max(worst_q, float(np.max(np.abs(path.Q - path.Q[0])) / abs(path.Q[0])))
        increasing &= bool(np.all(np.diff(path.f) > 0))
    elapsed = time.perf_counter() - start
    ok = sep_ok and worst_q <= 1e-8 and increasing and elapsed < 5
    criterion(7, "three separatrices, conserved first integral, increasing f", ok,
              f"angles={[round(a, 9) for a in angles]}, Q drift={worst_q:.1e}, {elapsed:.2f}s")
    assert ok


def test_criterion_08_cone_complex_needs_no_local_system(criterion):
    ca_ = g.Constants.parse(CONE_COMPLEX)
    sf_p = g.semiflat_cocycle(build_Lprime(), ca_)
    sols = g.solve_unipotent_corrections(sf_p, None, 3)
    untwisted_L = g.solve_unipotent_corrections(g.semiflat_cocycle(build_L(), g.Constants.parse(DEFAULT)), None, 3)
    found = False
    if sols:
        E = g.corrected_cocycle(sf_p, sols[0].matrices())
        found = g.solve_intertwiner(g.reference_tangent_cocycle(), E, 3).found
    ok = bool(sols) and not untwisted_L and found
    criterion(8, "cone complex glues untwisted; L does not; result is the tangent bundle", ok,
              f"solutions={len(sols)}, untwisted L solutions={len(untwisted_L)}, intertwiner={found}")
    assert ok


def test_criterion_09_wall_data(criterion):
    P = g.Constants.parametric()
    exps = {ij: g.factor_exponent(th, ij[1]) for ij, th in g.wall_factors(P).items()}
    ms = [exps[(2, 1)], exps[(0, 2)], exps[(1, 0)]]
    walls = [g.wall_data(m) for m in ms]
    ns = [w.tangent for w in walls]
    dets = [det2(m, n) for m, n in zip(ms, ns)]
    ok = ms == [(0, -1), (1, 0), (-1, 1)] and ns == [(1, 0), (0, 1), (-1, -1)] and dets == [1, 1, 1]
    criterion(9, "wall exponents, tangents and unit orientation", ok, f"m={ms}, n={ns}, det={dets}")
    assert ok


def test_criterion_10_oracle_suite(criterion):
    h = 1e-5
    rng = np.random.default_rng(10)
    worst = 0.0

    def fd(f, x):
        x = np.asarray(x, float)
        return np.array([(f(x + e) - f(x - e)) / (2 * h) for e in (np.array([h, 0]), np.array([0, h]))]).T

    pts = []
    while len(pts) < 30:
        x = rng.uniform(0.02, 0.96, 2)
        if 1 - x.sum() > 0.02:
            pts.append(x)
    for x in pts:
        for an, num in (
            (tp.gradient_g(x), fd(tp.g_P, x)),
            (tp.gradient_psi(x), fd(tp.psi, x)),
            (tp.hessian_g(x), fd(tp.gradient_g, x)),
            (tp.hessian_psi(x), fd(tp.gradient_psi, x)),
        ):
            worst = max(worst, float(np.linalg.norm(num - an) / np.linalg.norm(an)))
    for r, th in zip(rng.uniform(0.1, 3, 30), rng.uniform(0, 4 * math.pi, 30)):
        an = np.array(ca.grad_caustic(r, th))
        num = np.array([
            (ca.f_caustic(r + h, th) - ca.f_caustic(r - h, th)) / (2 * h),
            (ca.f_caustic(r, th + h) - ca.f_caustic(r, th - h)) / (2 * h) / r**2,
        ])
        worst = max(worst, float(np.linalg.norm(num - an) / np.linalg.norm(an)))

    pl_bad, fans = 0, 0
    while fans < 200:
        rays = [tuple(int(v) for v in rng.integers(-6, 7, 2)) for _ in range(3)]
        if len(set(rays)) < 3 or any(r == (0, 0) or math.gcd(*r) != 1 for r in rays):
            continue
        order = sorted(range(3), key=lambda i: math.atan2(rays[i][1], rays[i][0]))
        pairs = list(zip(order, order[1:] + order[:1]))
        if not all(det2(rays[a], rays[b]) > 0 for a, b in pairs):
            continue
        fans += 1
        fan = Fan(tuple(rays), tuple(pairs))
        vals = rng.integers(-9, 10, 3)
        f = pl_from_ray_values(fan, [int(v) for v in vals], require_integral=False)
        for k, (i, j) in enumerate(fan.cones):
            m = np.linalg.solve(np.array([rays[i], rays[j]], float), np.array([vals[i], vals[j]], float))
            if not np.allclose([float(s) for s in f.slopes[k]], m, rtol=1e-12, atol=1e-12):
                pl_bad += 1
    ok = worst <= 1e-6 and pl_bad == 0
    criterion(10, "analytic derivatives and PL solve match independent oracles", ok,
              f"worst relative FD error={worst:.1e}, PL mismatches={pl_bad} on {fans} fans")
    assert ok
