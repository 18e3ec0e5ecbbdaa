"""Command-line driver: each command runs a suite of checks and emits a JSON report."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import caustic, gluing, tropical
from .cover import (
    SHEET_MATCH,
    build_L,
    build_Lprime,
    compare_multisections,
    is_strictly_convex_on_cover,
    monodromy,
    trace_pl,
    validate,
)
from .exact import LaurentMatrix
from .fan import build_p2_fan, pl_from_ray_values, pl_linear_difference

SCHEMA_VERSION = 1
DEFAULT_CONSTANTS = "a0=-1,b0=1,a1=1,b1=1,a2=1,b2=1"
CONE_COMPLEX_CONSTANTS = "a0=-1,b0=1,a1=1,b1=-1,a2=-1,b2=1"
DEFAULT_HBARS = "0.1,0.05,0.025,0.0125"


class UsageError(Exception):
    pass


def _jsonable(x):
    if isinstance(x, LaurentMatrix):
        return x.to_strings()
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (str, int, bool)) or x is None:
        return x
    return str(x)


class Report:
    def __init__(self, command: str, config: dict):
        self.command = command
        self.config = config
        self.checks: list[dict] = []
        self.notes: dict = {}
        self.timing: dict = {}
        self.csv: str | None = None

    def check(self, name: str, ok: bool | None, **witness):
        status = "skip" if ok is None else ("pass" if ok else "fail")
        self.checks.append({"name": name, "status": status, "witness": _jsonable(witness)})

    @property
    def ok(self) -> bool:
        return all(c["status"] != "fail" for c in self.checks)

    def to_json(self, with_timing: bool = False) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": _jsonable(self.config),
            "checks": self.checks,
            "notes": _jsonable(self.notes),
            "ok": self.ok,
        }
        if with_timing:
            out["timing"] = self.timing
        return out


# ---------------------------------------------------------------------------
# commands

def _constants(cfg: dict) -> gluing.Constants:
    if cfg.get("parametric") or not cfg.get("constants"):
        return gluing.Constants.parametric()
    return gluing.Constants.parse(cfg["constants"])


def cmd_verify_tangent(cfg: dict) -> Report:
    rep = Report("verify-tangent", cfg)
    if cfg.get("cocycle"):
        c = gluing.TransitionCocycle.from_json(json.loads(Path(cfg["cocycle"]).read_text()))
    else:
        c = gluing.reference_tangent_cocycle()
    d = gluing.cocycle_defect(c)
    rep.check("cocycle defect is identity", d.is_identity(), defect=d)
    bad = gluing.regularity_report(c)
    rep.check("transitions regular with regular inverses", not bad, violations=bad)
    bad = gluing.equivariance_check(c)
    rep.check("frame weights equivariant", not bad, violations=bad)
    o3 = pl_from_ray_values(build_p2_fan(), (3, 0, 0))
    dc = gluing.determinant_check(c, o3)
    ok = all(dc["constant"].values()) and dc["loop_product"] == 1
    rep.check("determinant is O(3)", ok, ratios={str(k): v for k, v in dc["ratios"].items()}, loop=dc["loop_product"])
    return rep


def _is_zero(m: LaurentMatrix) -> bool:
    return all(x.is_zero() for row in m.entries() for x in row)


def _expected_naive(constants: gluing.Constants) -> LaurentMatrix:
    v = gluing.torus_variables(constants.params)
    p = {n: constants.poly(n, v) for n in gluing.CONSTANT_NAMES}
    return LaurentMatrix([[0, p["b0"] * p["b1"] * p["b2"]], [p["a0"] * p["a1"] * p["a2"], 0]], v)


def _glued_cocycle(ms, constants, twist=True):
    sf = gluing.semiflat_cocycle(ms, constants)
    corr = gluing.corrected_cocycle(sf, gluing.wall_factors(constants))
    return gluing.twisted_cocycle(corr, gluing.LocalSystem.standard() if twist else None)


def cmd_reconstruct(cfg: dict) -> Report:
    rep = Report("reconstruct", cfg)
    constants = _constants(cfg)
    twist = not cfg.get("no_twist", False)
    L = build_L()
    ls = gluing.LocalSystem.standard() if twist else None
    sf = gluing.semiflat_cocycle(L, constants)
    naive = gluing.cocycle_defect(sf)
    rep.check("naive defect is antidiagonal", naive == _expected_naive(constants), defect=naive)
    ones = gluing.cocycle_defect(gluing.semiflat_cocycle(L, gluing.Constants.ones()))
    perm = monodromy(L)
    base = L.sheets_over(0)
    pm = [[int(perm(base[c]) == base[r]) for c in range(2)] for r in range(2)]
    rep.check("unit-constant defect is the sheet monodromy", ones == LaurentMatrix(pm, ones.variables), defect=ones, permutation=pm)

    factors = gluing.wall_factors(constants)
    defect = gluing.twisted_corrected_defect(sf, factors, ls)
    rep.check("corrected defect is identity", defect.is_identity(), defect=defect, twist=twist)

    rng = np.random.default_rng(cfg.get("seed", 0))
    trials = int(cfg.get("trials", 200))
    failures = []
    for _ in range(trials):
        c = gluing.Constants.random(rng)
        d = gluing.twisted_corrected_defect(gluing.semiflat_cocycle(L, c), gluing.wall_factors(c), ls)
        if not d.is_identity():
            failures.append({"constants": c.to_json(), "defect": d})
            if len(failures) >= 3:
                break
    rep.check(f"random rational instantiations glue ({trials})", not failures, seed=cfg.get("seed", 0), failures=failures)

    E = gluing.twisted_cocycle(gluing.corrected_cocycle(sf, factors), ls)
    bad = gluing.regularity_report(E)
    rep.check("corrected transitions regular", not bad, violations=bad)
    dc = gluing.determinant_check(E, trace_pl(L))
    ok = all(dc["constant"].values()) and dc["loop_product"] == 1
    rep.check("determinant matches the trace line bundle", ok,
              ratios={str(k): v for k, v in dc["ratios"].items()}, loop=dc["loop_product"])

    T = gluing.reference_tangent_cocycle(constants.params)
    f = gluing.standard_intertwiner(constants, fixed_signs=True)
    res = gluing.intertwining_residuals(f, T, E)
    rep.check("intertwining relations", all(_is_zero(r) for r in res.values()),
              residuals={str(k): v for k, v in res.items()})
    unfixed = gluing.intertwining_residuals(gluing.standard_intertwiner(constants, fixed_signs=False), T, E)
    rep.notes["unfixed_intertwiner_residuals"] = {str(k): v for k, v in unfixed.items()}

    rc = constants if not constants.is_parametric else gluing.Constants.parse(DEFAULT_CONSTANTS)
    Er = _glued_cocycle(L, rc, twist)
    sol = gluing.solve_intertwiner(gluing.reference_tangent_cocycle(), Er, 3, seed=cfg.get("seed", 0))
    rep.check("intertwiner search finds an isomorphism", sol.found,
              nullity=sol.nullity, witness=sol.witness, constants=rc.to_json(),
              contains_reference_map=sol.contains(gluing.standard_intertwiner(rc, fixed_signs=True)))
    sols = gluing.solve_unipotent_corrections(gluing.semiflat_cocycle(L, rc), ls, 3)
    ref = {k: gluing.factor_exponent(v, k[1]) for k, v in gluing.wall_factors(rc).items()}
    hit = any(s.matrices() == gluing.wall_factors(rc) for s in sols)
    rep.check("correction search recovers the wall factors", hit,
              solutions=[s.to_json() for s in sols], reference_exponents={str(k): v for k, v in ref.items()})
    walls = {str(k): gluing.wall_data(m) for k, m in ref.items()}
    rep.notes["walls"] = {k: {"m": w.fourier_mode, "n": w.tangent, "det": w.orientation} for k, w in walls.items()}
    return rep


def cmd_cone_complex(cfg: dict) -> Report:
    rep = Report("cone-complex", cfg)
    constants = gluing.Constants.parse(cfg.get("constants") or CONE_COMPLEX_CONSTANTS)
    L, Lp = build_L(), build_Lprime()
    v = validate(Lp)
    rep.check("cone complex is a double cover", v.ok, failures=v.failures())
    rep.check("cone complex function strictly convex", is_strictly_convex_on_cover(Lp))
    cmp = compare_multisections(L, Lp, SHEET_MATCH)
    rep.check("difference is linear on each sheet class", all(g["global_linear"] for g in cmp["groups"]),
              groups=cmp["groups"])
    diff = pl_linear_difference(trace_pl(L), trace_pl(Lp))
    rep.check("traces differ by a linear function", diff is not None, difference=diff)
    sf = gluing.semiflat_cocycle(Lp, constants)
    naive = gluing.cocycle_defect(sf)
    rep.check("naive defect is not identity", not naive.is_identity(), defect=naive)
    bound = int(cfg.get("exponent_bound", 3))
    sols = gluing.solve_unipotent_corrections(sf, None, bound)
    rep.check("corrections exist without a local system", bool(sols), solutions=[s.to_json() for s in sols])
    untw = gluing.solve_unipotent_corrections(gluing.semiflat_cocycle(L, gluing.Constants.parse(DEFAULT_CONSTANTS)), None, bound)
    rep.check("multi-section L needs the twist", not untw, solutions=[s.to_json() for s in untw])
    if sols:
        E = gluing.corrected_cocycle(sf, sols[0].matrices())
        rep.check("corrected cocycle glues", gluing.cocycle_defect(E).is_identity())
        bad = gluing.regularity_report(E)
        rep.check("corrected transitions regular", not bad, violations=bad)
        res = gluing.solve_intertwiner(gluing.reference_tangent_cocycle(), E, bound, seed=cfg.get("seed", 0))
        rep.check("intertwiner to the tangent bundle", res.found, nullity=res.nullity, witness=res.witness)
        rep.notes["wall_exponents"] = [list(f.exponent) for f in sols[0].factors]
    return rep


def _parse_grid(text: str | None):
    if not text or text == "default":
        return tropical.default_grids()
    pts = []
    for item in text.split(";"):
        a, b = item.split(",")
        pts.append((float(a), float(b)))
    return {"custom": pts}


def cmd_tropicalize(cfg: dict) -> Report:
    rep = Report("tropicalize", cfg)
    hbars = [float(h) for h in str(cfg.get("hbar") or DEFAULT_HBARS).split(",")]
    tol = float(cfg.get("tol") or 1e-6)
    csv_parts, summary = [], {}
    for name, grid in _parse_grid(cfg.get("grid")).items():
        sw = tropical.convergence_sweep(grid, hbars)
        csv_parts.append(sw.to_csv())
        summary[name] = sw.summary()
        rep.check(f"{name}: errors decrease", all(p["monotone"] for p in sw.points) and bool(sw.points),
                  errors={str(p["x"]): p["errors"] for p in sw.points})
        rep.check(f"{name}: final error within {tol:g}", bool(sw.points) and sw.max_final_error() <= tol,
                  max_error=sw.max_final_error() if sw.points else None)
        rep.check(f"{name}: negative decay slopes", bool(sw.points) and all(p["slope"] < 0 for p in sw.points),
                  slopes=[p["slope"] for p in sw.points])
        if sw.excluded:
            rep.notes.setdefault("excluded", []).extend(sw.excluded)
    u = np.linspace(0.025, 0.975, 20)
    bad = []
    for a in u:
        for b in u:
            x = (float(a), float(b * (1 - a)))
            pd, det, alpha = tropical.hessian_check(x, 0.1)
            if not (pd and alpha > 0):
                bad.append(x)
    rep.check("Hessian positive on a 20x20 grid (hbar=0.1)", not bad, failures=bad)
    rep.notes["sweep"] = summary
    rep.csv = "".join(p if i == 0 else p.split("\n", 1)[1] for i, p in enumerate(csv_parts))
    return rep


def cmd_caustic(cfg: dict) -> Report:
    rep = Report("caustic", cfg)
    tol = float(cfg.get("tol") or 1e-6)
    angles = caustic.find_separatrices(tol=tol)
    sr = caustic.separatrix_report(angles, tol=tol)
    rep.check("three separatrices", sr["ok"], report=sr)
    path = caustic.integrate_flow(caustic.PolarPoint(0.5, math.pi / 6), 1e-4, 100_000)
    q = path.Q
    drift = float(np.max(np.abs(q - q[0])) / abs(q[0]))
    rep.check("first integral conserved", drift <= 1e-8, relative_drift=drift, steps=len(path))
    inc = float(np.min(np.diff(path.f)))
    rep.check("potential increases along the flow", inc > 0, min_increment=inc)
    # the r^(2/3) variant of the invariant is not conserved by this flow
    alt = path.r ** (2 / 3) * np.sin(1.5 * path.theta)
    rep.notes["alternative_invariant_r^(2/3)_relative_drift"] = float(np.max(np.abs(alt - alt[0])) / abs(alt[0]))
    rep.csv = path.to_csv()
    return rep


COMMANDS = {
    "verify-tangent": cmd_verify_tangent,
    "reconstruct": cmd_reconstruct,
    "cone-complex": cmd_cone_complex,
    "tropicalize": cmd_tropicalize,
    "caustic": cmd_caustic,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="troplag", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON file with option defaults (flags win)")
        s.add_argument("--json", dest="json_path", help="write the report here")
        s.add_argument("--csv", dest="csv_path", help="write tabular output here")
        s.add_argument("--seed", type=int)
        s.add_argument("--tol", type=float)
        s.add_argument("--timing", action="store_true", help="include wall-clock timings in the report")
        if name in ("reconstruct", "cone-complex"):
            s.add_argument("--constants", help="a0=..,b0=..,a1=..,b1=..,a2=..[,b2=..]")
        if name == "reconstruct":
            s.add_argument("--parametric", action="store_true")
            s.add_argument("--no-twist", action="store_true")
            s.add_argument("--trials", type=int)
        if name == "tropicalize":
            s.add_argument("--grid", help="'default' or 'x1,x2;x1,x2;...'")
            s.add_argument("--hbar", help="comma-separated, strictly decreasing")
        if name == "verify-tangent":
            s.add_argument("--cocycle", help="cocycle JSON to verify instead of the built-in one")
    return p


def _config(args) -> dict:
    cfg = {}
    if args.config:
        cfg.update(json.loads(Path(args.config).read_text()))
    for key, val in vars(args).items():
        if key in ("config", "json_path", "csv_path", "command", "timing"):
            continue
        if val not in (None, False):
            cfg[key] = val
    cfg.setdefault("seed", 0)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        start = time.perf_counter()
        rep = COMMANDS[args.command](cfg)
        rep.timing["seconds"] = round(time.perf_counter() - start, 3)
    except (gluing.ConstraintError, ValueError, OSError, UsageError) as exc:
        print(f"troplag: error: {exc}", file=sys.stderr)
        return 2
    data = rep.to_json(args.timing)
    text = json.dumps(data, indent=2, sort_keys=True)
    if args.json_path:
        Path(args.json_path).write_text(text + "\n")
    if args.csv_path and rep.csv:
        Path(args.csv_path).write_text(rep.csv)
    for c in rep.checks:
        print(f"[{c['status'].upper():4}] {c['name']}")
    print("OK" if rep.ok else "FAILED")
    return 0 if rep.ok else 1


if __name__ == "__main__":
    sys.exit(main())
