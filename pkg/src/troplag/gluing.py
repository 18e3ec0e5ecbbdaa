"""Transition cocycles of rank-2 bundles on the projective plane.

Conventions
-----------
* Torus coordinates are ``(w1, w2)``.  Chart ``k`` has its own coordinates
  (``w0_1, w0_2``; ``w1_0, w1_2``; ``w2_0, w2_1``) and a monomial map to the
  torus, ``CHART_TO_TORUS[k]``.
* The transition ``(i, j)`` is written in chart-``j`` coordinates and maps
  the frame of chart ``j`` to the frame of chart ``i``.
* A monomial ``w^m`` (torus exponent ``m``) is regular on a cone when
  ``<m, v> <= 0`` for all of the cone's generators.
* Constants are either exact rationals or the symbols ``a0 .. a2, b0, b1``
  with ``b2 = -1/(a0 b0 a1 b1 a2)`` eliminated.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .cover import TropicalMultiSection
from .exact import (
    LaurentMatrix,
    LaurentPolynomial,
    MonomialMap,
    NotInvertibleError,
    as_fraction,
    is_regular_on_cone,
)
from .fan import PLFunction, build_p2_fan, det2, pairing, primitive

__all__ = [
    "TORUS",
    "CHART_COORDS",
    "CHART_TO_TORUS",
    "OVERLAPS",
    "ConstraintError",
    "DegenerateWallError",
    "Constants",
    "ChartFrame",
    "TransitionCocycle",
    "LocalSystem",
    "WallDatum",
    "WallFactor",
    "CorrectionSolution",
    "IntertwinerResult",
    "chart_variables",
    "torus_variables",
    "chart_map",
    "chart_exponent",
    "reference_tangent_cocycle",
    "position_pairings",
    "semiflat_cocycle",
    "cocycle_defect",
    "regularity_report",
    "equivariance_check",
    "wall_factors",
    "corrected_cocycle",
    "twisted_cocycle",
    "twist_matrix",
    "twisted_corrected_defect",
    "local_system_holonomy",
    "pushforward_monodromy",
    "wall_data",
    "factor_exponent",
    "line_bundle_cocycle",
    "direct_sum",
    "determinant_check",
    "standard_intertwiner",
    "intertwining_residuals",
    "solve_intertwiner",
    "solve_unipotent_corrections",
    "J_MATRIX",
]

TORUS = ("w1", "w2")
CHART_COORDS = {0: ("w0_1", "w0_2"), 1: ("w1_0", "w1_2"), 2: ("w2_0", "w2_1")}
# row r = torus exponent of the r-th chart coordinate
CHART_TO_TORUS = {0: ((1, 0), (0, 1)), 1: ((-1, 0), (-1, 1)), 2: ((0, -1), (1, -1))}
# (target, source) overlaps in loop order
OVERLAPS = ((1, 0), (2, 1), (0, 2))
PARAMS = ("a0", "b0", "a1", "b1", "a2")
CONSTANT_NAMES = ("a0", "b0", "a1", "b1", "a2", "b2")
J_MATRIX = ((0, -1), (1, 0))

_FAN = build_p2_fan()


class ConstraintError(ValueError):
    """Constants violate prod a_i b_i = -1."""


class DegenerateWallError(ValueError):
    pass


# ---------------------------------------------------------------------------
# constants and contexts

@dataclass(frozen=True)
class Constants:
    """The six gluing constants, rational or symbolic."""

    values: Mapping[str, Fraction] | None = None
    b2_solved: bool = False

    @classmethod
    def parametric(cls) -> "Constants":
        return cls(None)

    @classmethod
    def rational(cls, values: Mapping[str, object], *, enforce: bool = True) -> "Constants":
        vals = {k: as_fraction(v) for k, v in values.items()}
        unknown = set(vals) - set(CONSTANT_NAMES)
        if unknown:
            raise ValueError(f"unknown constants {sorted(unknown)}")
        missing = [k for k in PARAMS if k not in vals]
        if missing:
            raise ValueError(f"missing constants {missing}")
        if any(v == 0 for v in vals.values()):
            raise ZeroDivisionError("constants must be nonzero")
        solved = False
        if "b2" not in vals:
            vals["b2"] = -1 / math.prod(vals[k] for k in PARAMS)
            solved = True
        if enforce and math.prod(vals[k] for k in CONSTANT_NAMES) != -1:
            raise ConstraintError(f"prod a_i b_i = {math.prod(vals.values())}, expected -1")
        return cls({k: vals[k] for k in CONSTANT_NAMES}, solved)

    @classmethod
    def parse(cls, text: str, *, enforce: bool = True) -> "Constants":
        """``"a0=-1,b0=1,..."``; omitting ``b2`` solves for it."""
        vals = {}
        for item in filter(None, re.split(r"[,\s]+", text.strip())):
            key, _, val = item.partition("=")
            if not val:
                raise ValueError(f"malformed constant {item!r}")
            vals[key.strip()] = Fraction(val.strip())
        return cls.rational(vals, enforce=enforce)

    @classmethod
    def ones(cls) -> "Constants":
        """All constants 1 (violates the constraint; for sheet-permutation checks)."""
        return cls.rational({k: 1 for k in CONSTANT_NAMES}, enforce=False)

    @classmethod
    def random(cls, rng: np.random.Generator, bound: int = 9) -> "Constants":
        vals = {}
        for k in PARAMS:
            num = 0
            while num == 0:
                num = int(rng.integers(-bound, bound + 1))
            vals[k] = Fraction(num, int(rng.integers(1, bound + 1)))
        return cls.rational(vals)

    @property
    def is_parametric(self) -> bool:
        return self.values is None

    @property
    def params(self) -> tuple[str, ...]:
        return PARAMS if self.values is None else ()

    def poly(self, name: str, variables: Sequence[str]) -> LaurentPolynomial:
        if self.values is not None:
            return LaurentPolynomial.constant(self.values[name], variables)
        if name == "b2":
            sub = LaurentPolynomial.constant(-1, PARAMS)
            for p in PARAMS:
                sub = sub * LaurentPolynomial.variable(p, PARAMS).inverse()
            return sub.extend(variables)
        return LaurentPolynomial.variable(name, variables)

    def product(self, variables: Sequence[str] = PARAMS) -> LaurentPolynomial:
        out = LaurentPolynomial.constant(1, variables)
        for k in CONSTANT_NAMES:
            out = out * self.poly(k, variables)
        return out

    def to_json(self):
        if self.values is None:
            return {"parametric": True, "b2": "-1/(a0*b0*a1*b1*a2)"}
        return {k: str(v) for k, v in self.values.items()} | {"b2_solved": self.b2_solved}


def chart_variables(k: int, params: Sequence[str] = ()) -> tuple[str, ...]:
    return CHART_COORDS[k] + tuple(params)


def torus_variables(params: Sequence[str] = ()) -> tuple[str, ...]:
    return TORUS + tuple(params)


def chart_map(k: int, params: Sequence[str] = ()) -> MonomialMap:
    return MonomialMap.block(CHART_TO_TORUS[k], chart_variables(k, params), torus_variables(params))


def chart_exponent(k: int, m: Sequence[int]) -> tuple[int, int]:
    """Chart-``k`` exponent of the torus monomial ``w^m``."""
    inv = MonomialMap(CHART_TO_TORUS[k], CHART_COORDS[k], TORUS).inverse()
    return inv.apply_exponent(tuple(int(x) for x in m))


def _torus_monomial(k: int, m, variables, coeff=1) -> LaurentPolynomial:
    e = chart_exponent(k, m)
    n_par = len(variables) - 2
    return LaurentPolynomial.monomial(tuple(e) + (0,) * n_par, variables, 1) * coeff


def _frac_vec(v) -> tuple[Fraction, Fraction]:
    return (Fraction(v[0]), Fraction(v[1]))


# ---------------------------------------------------------------------------
# cocycles

@dataclass(frozen=True)
class ChartFrame:
    chart: int
    basis_labels: tuple[str, ...]
    weights: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(set(self.basis_labels)) != len(self.basis_labels):
            raise ValueError("basis labels must be distinct")
        if len(self.weights) != len(self.basis_labels):
            raise ValueError("one weight per basis vector")
        w = []
        for x in self.weights:
            if any(Fraction(c).denominator != 1 for c in x):
                raise ValueError(f"non-integral weight {x}")
            w.append((int(x[0]), int(x[1])))
        object.__setattr__(self, "weights", tuple(w))
        object.__setattr__(self, "basis_labels", tuple(self.basis_labels))

    @property
    def rank(self) -> int:
        return len(self.basis_labels)


@dataclass(frozen=True)
class TransitionCocycle:
    charts: tuple[ChartFrame, ...]
    transitions: Mapping[tuple[int, int], LaurentMatrix]
    params: tuple[str, ...] = ()
    name: str = ""
    chart_maps: Mapping[int, MonomialMap] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        maps = {f.chart: chart_map(f.chart, self.params) for f in self.charts}
        object.__setattr__(self, "chart_maps", maps)
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "transitions", dict(self.transitions))
        for (i, j), mat in self.transitions.items():
            if mat.variables != chart_variables(j, self.params):
                raise ValueError(f"transition {(i, j)} is not in chart-{j} coordinates")
            if (mat.rows, mat.cols) != (self.frame(i).rank, self.frame(j).rank):
                raise ValueError(f"transition {(i, j)} has shape {(mat.rows, mat.cols)}")

    def frame(self, k: int) -> ChartFrame:
        for f in self.charts:
            if f.chart == k:
                return f
        raise KeyError(k)

    @property
    def rank(self) -> int:
        return self.charts[0].rank

    @property
    def torus_variables(self) -> tuple[str, ...]:
        return torus_variables(self.params)

    def transition(self, i: int, j: int) -> LaurentMatrix:
        """Transition ``(i, j)`` in chart-``j`` coordinates (inverting a stored ``(j, i)`` if needed)."""
        if (i, j) in self.transitions:
            return self.transitions[(i, j)]
        if (j, i) in self.transitions:
            inv_t = self.in_torus(j, i).inverse()
            return inv_t.substitute(self.chart_maps[j].inverse())
        raise KeyError((i, j))

    def in_torus(self, i: int, j: int) -> LaurentMatrix:
        if (i, j) in self.transitions:
            return self.transitions[(i, j)].substitute(self.chart_maps[j])
        return self.transition(i, j).substitute(self.chart_maps[j])

    def replace(self, updates: Mapping[tuple[int, int], LaurentMatrix], name: str | None = None) -> "TransitionCocycle":
        t = dict(self.transitions)
        t.update(updates)
        return TransitionCocycle(self.charts, t, self.params, self.name if name is None else name)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "variables": list(self.torus_variables),
            "params": list(self.params),
            "charts": [
                {
                    "chart": f.chart,
                    "variables": list(chart_variables(f.chart, self.params)),
                    "basis": list(f.basis_labels),
                    "weights": [list(w) for w in f.weights],
                    "to_torus": [list(r) for r in CHART_TO_TORUS[f.chart]],
                }
                for f in self.charts
            ],
            "transitions": [
                {"target": i, "source": j, "matrix": m.to_strings()}
                for (i, j), m in sorted(self.transitions.items())
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "TransitionCocycle":
        params = tuple(data.get("params", ()))
        charts = tuple(
            ChartFrame(c["chart"], tuple(c["basis"]), tuple(tuple(w) for w in c["weights"])) for c in data["charts"]
        )
        trans = {
            (t["target"], t["source"]): LaurentMatrix.from_strings(t["matrix"], chart_variables(t["source"], params))
            for t in data["transitions"]
        }
        return cls(charts, trans, params, data.get("name", ""))


TANGENT_WEIGHTS = {0: ((1, 0), (0, 1)), 1: ((-1, 0), (-1, 1)), 2: ((0, -1), (1, -1))}


def reference_tangent_cocycle(params: Sequence[str] = ()) -> TransitionCocycle:
    """Transition functions of the holomorphic tangent bundle in coordinate frames."""
    v0, v1, v2 = (chart_variables(k, params) for k in range(3))
    x, y = (LaurentPolynomial.variable(n, v0) for n in CHART_COORDS[0])
    t10 = LaurentMatrix([[-(x**-2), 0], [-y * x**-2, x**-1]], v0)
    u0, u2 = (LaurentPolynomial.variable(n, v1) for n in CHART_COORDS[1])
    t21 = LaurentMatrix([[u2**-1, -u0 * u2**-2], [0, -(u2**-2)]], v1)
    s0, s1 = (LaurentPolynomial.variable(n, v2) for n in CHART_COORDS[2])
    t02 = LaurentMatrix([[-s1 * s0**-2, s0**-1], [-(s0**-2), 0]], v2)
    frames = tuple(
        ChartFrame(k, tuple(f"v{k}_{i}" for i in range(3) if i != k), TANGENT_WEIGHTS[k]) for k in range(3)
    )
    return TransitionCocycle(frames, {(1, 0): t10, (2, 1): t21, (0, 2): t02}, tuple(params), "tangent")


def position_pairings(ms: TropicalMultiSection, spec: Sequence[str] = ("id", "id", "swap")) -> dict:
    """Per-overlap sheet bijections given by frame positions (``id`` or ``swap``)."""
    out = {}
    for (i, j), kind in zip(OVERLAPS, spec):
        src, tgt = ms.sheets_over(j), ms.sheets_over(i)
        if kind == "id":
            out[(i, j)] = dict(zip(src, tgt))
        elif kind == "swap":
            out[(i, j)] = dict(zip(src, reversed(tgt)))
        else:
            raise ValueError(f"unknown pairing {kind!r}")
    return out


def semiflat_cocycle(
    ms: TropicalMultiSection,
    constants: Constants,
    pairings: Mapping[tuple[int, int], Mapping[str, str]] | None = None,
) -> TransitionCocycle:
    """Naive gluing of the sheet line bundles.

    Column ``s`` of transition ``(i, j)`` has the single entry
    ``c * w^{-(m_{s'} - m_s)}`` in row ``s'`` (the sheet paired with ``s``),
    with ``c = a_j`` for the first and ``b_j`` for the second frame vector.
    Pairings default to the gluing of the multi-section.
    """
    if ms.degree != 2:
        raise ValueError("semi-flat constants are defined for double covers only")
    params = constants.params
    frames = tuple(
        ChartFrame(k, ms.sheets_over(k), tuple(tuple(-int(x) for x in ms.sheet(l).slope) for l in ms.sheets_over(k)))
        for k in range(3)
    )
    trans = {}
    for i, j in OVERLAPS:
        src, tgt = ms.sheets_over(j), ms.sheets_over(i)
        pair = dict(pairings[(i, j)]) if pairings is not None else ms.matching(i, j)
        if sorted(pair) != sorted(src) or sorted(pair.values()) != sorted(tgt):
            raise ValueError(f"pairing on overlap {(i, j)} is not a bijection of sheet sets")
        variables = chart_variables(j, params)
        grid = [[LaurentPolynomial.zero(variables) for _ in src] for _ in tgt]
        for col, s in enumerate(src):
            sp = pair[s]
            ms_, msp = ms.sheet(s).slope, ms.sheet(sp).slope
            m = (-(msp[0] - ms_[0]), -(msp[1] - ms_[1]))
            if any(Fraction(x).denominator != 1 for x in m):
                raise ValueError("non-integral slope difference")
            c = constants.poly(("a" if col == 0 else "b") + str(j), variables)
            grid[tgt.index(sp)][col] = _torus_monomial(j, m, variables, c)
        trans[(i, j)] = LaurentMatrix(grid, variables)
    return TransitionCocycle(frames, trans, params, f"semiflat({ms.name})")


def cocycle_defect(c: TransitionCocycle, loop: Sequence[int] = (0, 1, 2)) -> LaurentMatrix:
    """Product of the transitions around a closed chart loop, in torus coordinates."""
    loop = list(loop)
    out = LaurentMatrix.identity(c.frame(loop[0]).rank, c.torus_variables)
    for a, b in zip(loop, loop[1:] + loop[:1]):
        if a == b:
            continue
        out = c.in_torus(b, a) @ out
    return out


def _overlap_ray(i: int, j: int) -> tuple[int, int]:
    return _FAN.rays[_FAN.shared_ray(i, j)]


def regularity_report(c: TransitionCocycle) -> list[dict]:
    """Entries of transitions or their inverses that are not regular on the overlap."""
    bad = []
    for (i, j) in sorted(c.transitions):
        ray = _overlap_ray(i, j)
        t = c.in_torus(i, j)
        try:
            inv = t.inverse()
        except NotInvertibleError as exc:
            bad.append({"overlap": [i, j], "which": "determinant", "entry": str(exc.determinant)})
            continue
        for which, mat in (("transition", t), ("inverse", inv)):
            for r in range(mat.rows):
                for col in range(mat.cols):
                    if not is_regular_on_cone(mat[r, col], [ray]):
                        bad.append({"overlap": [i, j], "which": which, "row": r, "col": col, "entry": str(mat[r, col])})
    return bad


def equivariance_check(c: TransitionCocycle) -> list[dict]:
    """Entries whose torus exponents differ from ``weight(row) - weight(col)``."""
    bad = []
    for (i, j) in sorted(c.transitions):
        t = c.in_torus(i, j)
        wi, wj = c.frame(i).weights, c.frame(j).weights
        for r in range(t.rows):
            for col in range(t.cols):
                expected = (wi[r][0] - wj[col][0], wi[r][1] - wj[col][1])
                for e, _ in t[r, col].items():
                    if tuple(e[:2]) != expected:
                        bad.append(
                            {"overlap": [i, j], "row": r, "col": col, "exponent": list(e[:2]), "expected": list(expected)}
                        )
    return bad


# ---------------------------------------------------------------------------
# corrections and twists

def _unipotent(k: int, variables, position, m, coeff) -> LaurentMatrix:
    grid = [[1, 0], [0, 1]]
    mat = LaurentMatrix(grid, variables)
    return mat.replace(position[0], position[1], _torus_monomial(k, m, variables, coeff))


def wall_factors(constants: Constants) -> dict[tuple[int, int], LaurentMatrix]:
    """Lower-triangular unipotent correction factors, each in its source chart coordinates."""
    p = constants.params
    out = {}
    v = chart_variables(0, p)
    c = -constants.poly("a0", v) * constants.poly("b1", v) * constants.poly("a2", v)
    out[(1, 0)] = _unipotent(0, v, (1, 0), (-1, 1), c)
    v = chart_variables(1, p)
    c = -(constants.poly("b0", v) * constants.poly("b1", v) * constants.poly("a2", v)).inverse()
    out[(2, 1)] = _unipotent(1, v, (1, 0), (0, -1), c)
    v = chart_variables(2, p)
    c = (constants.poly("a0", v) * constants.poly("b1", v) * constants.poly("b2", v)).inverse()
    out[(0, 2)] = _unipotent(2, v, (1, 0), (1, 0), c)
    return out


def corrected_cocycle(sf: TransitionCocycle, factors: Mapping[tuple[int, int], LaurentMatrix]) -> TransitionCocycle:
    """``tau'_{ij} = tau^sf_{ij} . Theta_{ij}`` (factors act on the source frame)."""
    return sf.replace({ij: sf.transitions[ij] @ th for ij, th in factors.items()}, name=f"corrected({sf.name})")


@dataclass(frozen=True)
class LocalSystem:
    """Signs of a rank-1 local system on the punctured double cover.

    The cover of the punctured plane is trivialised over ``V1`` (the plane
    minus the ray through ``v2``) and ``V2`` (minus the ray through ``v1``);
    ``signs`` are the transitions on ``V1+ & V2+``, ``V1+ & V2-``,
    ``V1- & V2+`` and ``V1- & V2-``.  The components ``V1+ & V2+`` and
    ``V1- & V2-`` lie over the sector containing ``v0``; the mixed ones lie
    over the interior of cone 0.
    """

    signs: tuple[int, int, int, int]

    def __post_init__(self):
        if len(self.signs) != 4 or any(s not in (1, -1) for s in self.signs):
            raise ValueError("signs must be four entries from {+1, -1}")
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))

    @classmethod
    def trivial(cls) -> "LocalSystem":
        return cls((1, 1, 1, 1))

    @classmethod
    def standard(cls) -> "LocalSystem":
        return cls((1, -1, 1, 1))

    @classmethod
    def tabulated(cls) -> "LocalSystem":
        """Alternative sign table; its holonomy is trivial."""
        return cls((1, -1, -1, 1))

    def flipped(self) -> "LocalSystem":
        """Negate the signs on ``V1+ & V2+`` and ``V1- & V2-``."""
        pp, pm, mp, mm = self.signs
        return LocalSystem((-pp, pm, mp, -mm))


def local_system_holonomy(ls: LocalSystem) -> int:
    """Product of the transition signs once around the (connected) punctured cover."""
    return math.prod(ls.signs)


def pushforward_monodromy(ls: LocalSystem, variables: Sequence[str] = TORUS) -> LaurentMatrix:
    """Monodromy of the rank-2 pushforward: the mixed-sector swap times the ``v0``-sector diagonal."""
    pp, pm, mp, mm = ls.signs
    small = LaurentMatrix([[0, pm], [mp, 0]], variables)
    big = LaurentMatrix([[pp, 0], [0, mm]], variables)
    return small @ big


def twist_matrix(ls: LocalSystem | None, variables: Sequence[str] = TORUS) -> LaurentMatrix:
    """Frame change inserted by the local system; trivial holonomy inserts nothing."""
    if ls is None or local_system_holonomy(ls) == 1:
        return LaurentMatrix.identity(2, variables)
    return pushforward_monodromy(ls, variables)


def twisted_cocycle(c: TransitionCocycle, ls: LocalSystem | None) -> TransitionCocycle:
    """Insert ``M`` after the overlap on ray ``v2`` and ``M^{-1}`` before the overlap on ray ``v1``."""
    m10 = twist_matrix(ls, chart_variables(0, c.params))
    m02 = twist_matrix(ls, chart_variables(2, c.params)).inverse()
    return c.replace(
        {(1, 0): m10 @ c.transitions[(1, 0)], (0, 2): c.transitions[(0, 2)] @ m02},
        name=f"twisted({c.name})",
    )


def twisted_corrected_defect(
    sf: TransitionCocycle, factors: Mapping[tuple[int, int], LaurentMatrix], ls: LocalSystem | None
) -> LaurentMatrix:
    return cocycle_defect(twisted_cocycle(corrected_cocycle(sf, factors), ls))


# ---------------------------------------------------------------------------
# walls

@dataclass(frozen=True)
class WallDatum:
    fourier_mode: tuple[int, int]
    tangent: tuple[int, int]

    @property
    def orientation(self) -> int:
        return int(det2(self.fourier_mode, self.tangent))

    def on_wall(self, x: Sequence) -> bool:
        return pairing(self.fourier_mode, x) == 0


def wall_data(m: Sequence[int]) -> WallDatum:
    """Wall of a correction exponent: primitive kernel vector ``n`` with ``det(m, n) > 0``."""
    m = (int(m[0]), int(m[1]))
    if m == (0, 0):
        raise DegenerateWallError("zero exponent has no wall")
    n = primitive((-m[1], m[0]))
    return WallDatum(m, n)


def factor_exponent(theta: LaurentMatrix, chart: int) -> tuple[int, int]:
    """Torus exponent of the single off-diagonal monomial of a unipotent factor."""
    off = [theta[r, c] for r in range(2) for c in range(2) if r != c and not theta[r, c].is_zero()]
    if len(off) != 1 or not off[0].is_monomial():
        raise ValueError("factor is not elementary unipotent")
    e = off[0].leading()[0]
    t = MonomialMap(CHART_TO_TORUS[chart], CHART_COORDS[chart], TORUS).apply_exponent(e[:2])
    return (int(t[0]), int(t[1]))


# ---------------------------------------------------------------------------
# line bundles and determinants

def line_bundle_cocycle(f: PLFunction, params: Sequence[str] = ()) -> TransitionCocycle:
    """Rank-1 cocycle ``h_ij = w^{-(m_i - m_j)}`` of a PL function with slopes ``m_k``."""
    frames, trans = [], {}
    for k in range(3):
        m = f.slopes[k]
        frames.append(ChartFrame(k, (f"e{k}",), ((-int(m[0]), -int(m[1])),)))
    for i, j in OVERLAPS:
        mi, mj = f.slopes[i], f.slopes[j]
        d = (-int(mi[0] - mj[0]), -int(mi[1] - mj[1]))
        v = chart_variables(j, params)
        trans[(i, j)] = LaurentMatrix([[_torus_monomial(j, d, v)]], v)
    return TransitionCocycle(tuple(frames), trans, tuple(params), "line")


def direct_sum(a: TransitionCocycle, b: TransitionCocycle) -> TransitionCocycle:
    if a.params != b.params:
        raise ValueError("parameter contexts differ")
    frames = tuple(
        ChartFrame(k, a.frame(k).basis_labels + tuple(l + "'" for l in b.frame(k).basis_labels),
                   a.frame(k).weights + b.frame(k).weights)
        for k in range(3)
    )
    trans = {}
    for ij in OVERLAPS:
        x, y = a.transitions[ij], b.transitions[ij]
        zero = LaurentPolynomial.zero(x.variables)
        grid = [list(r) + [zero] * y.cols for r in x.entries()] + [[zero] * x.cols + list(r) for r in y.entries()]
        trans[ij] = LaurentMatrix(grid, x.variables)
    return TransitionCocycle(frames, trans, a.params, f"{a.name}+{b.name}")


def determinant_check(c: TransitionCocycle, f: PLFunction) -> dict:
    """Compare ``det c_ij`` with the line-bundle cocycle of ``f``.

    Returns the ratios ``det c_ij / h_ij``, whether each is constant, and
    their product around the loop (which is 1 when the determinant bundle
    is the line bundle of ``f``).
    """
    h = line_bundle_cocycle(f, c.params)
    ratios = {}
    for ij in OVERLAPS:
        ratios[ij] = c.in_torus(*ij).determinant() * h.in_torus(*ij)[0, 0].inverse()
    constant = {ij: r.is_constant() or _only_params(r) for ij, r in ratios.items()}
    loop = math.prod((ratios[ij] for ij in OVERLAPS[1:]), start=ratios[OVERLAPS[0]])
    return {"ratios": ratios, "constant": constant, "loop_product": loop}


def _only_params(p: LaurentPolynomial) -> bool:
    return all(e[0] == 0 and e[1] == 0 for e in p.exponents())


# ---------------------------------------------------------------------------
# intertwiners

def standard_intertwiner(constants: Constants, *, fixed_signs: bool = False) -> dict[int, LaurentMatrix]:
    """Chartwise isomorphism from the tangent bundle to the corrected bundle.

    ``fixed_signs=True`` negates the lower-left entries of ``f_1`` and
    ``f_2``; only that variant satisfies the intertwining relations.
    """
    out = {}
    for k in range(3):
        v = chart_variables(k, constants.params)
        a0, b0, a1, b1, a2, b2 = (constants.poly(n, v) for n in CONSTANT_NAMES)
        z = LaurentPolynomial.zero(v)
        s = -1 if fixed_signs else 1
        if k == 0:
            grid = [[LaurentPolynomial.constant(1, v), z], [z, a0 * b1 * a2]]
        elif k == 1:
            grid = [[z, (a1 * b2).inverse()], [a0 * s, z]]
        else:
            grid = [[z, -b2.inverse()], [a0 * b1 * s, z]]
        out[k] = LaurentMatrix(grid, v)
    return out


def intertwining_residuals(
    f: Mapping[int, LaurentMatrix], a: TransitionCocycle, b: TransitionCocycle
) -> dict[tuple[int, int], LaurentMatrix]:
    """``f_i a_ij - b_ij f_j`` in torus coordinates for every overlap."""
    ft = {k: f[k].substitute(a.chart_maps[k]) for k in f}
    return {(i, j): ft[i] @ a.in_torus(i, j) - b.in_torus(i, j) @ ft[j] for i, j in OVERLAPS}


@dataclass
class IntertwinerResult:
    found: bool
    nullity: int
    witness: dict[int, LaurentMatrix] | None
    basis: list[dict[int, LaurentMatrix]]
    candidates_checked: int
    exponent_bound: int
    _vectors: list = field(default_factory=list, repr=False)
    _index: dict = field(default_factory=dict, repr=False)

    def contains(self, f: Mapping[int, LaurentMatrix]) -> bool:
        """Whether a chartwise map lies in the solution space (and in the bound)."""
        vec = [Fraction(0)] * len(self._index)
        for k, mat in f.items():
            for r in range(mat.rows):
                for c in range(mat.cols):
                    for e, coeff in mat[r, c].items():
                        key = (k, r, c, tuple(e[:2]))
                        if key not in self._index or any(e[2:]):
                            return False
                        vec[self._index[key]] = coeff
        return _rank(self._vectors + [vec]) == _rank(self._vectors)


def _rank(vectors: list[list[Fraction]]) -> int:
    rows = {}
    for v in vectors:
        _insert_row(rows, {i: x for i, x in enumerate(v) if x})
    return len(rows)


def _insert_row(pivots: dict[int, dict[int, Fraction]], row: dict[int, Fraction]) -> bool:
    """Reduce ``row`` against the echelon ``pivots``; store it if independent."""
    row = dict(row)
    changed = True
    while changed:
        changed = False
        for col in sorted(row):
            if col in pivots and row.get(col):
                factor = row[col]
                for c, x in pivots[col].items():
                    val = row.get(c, 0) - factor * x
                    if val:
                        row[c] = val
                    else:
                        row.pop(c, None)
                changed = True
                break
    if not row:
        return False
    p = min(row)
    lead = row[p]
    pivots[p] = {c: x / lead for c, x in row.items()}
    return True


def _nullspace(rows: list[dict[int, Fraction]], n: int) -> list[list[Fraction]]:
    pivots: dict[int, dict[int, Fraction]] = {}
    order: list[int] = []
    for row in rows:
        before = set(pivots)
        if _insert_row(pivots, row):
            order.append((set(pivots) - before).pop())
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        x = [Fraction(0)] * n
        x[f] = Fraction(1)
        for p in reversed(order):
            x[p] = -sum((coef * x[c] for c, coef in pivots[p].items() if c != p), Fraction(0))
        basis.append(x)
    return basis


def solve_intertwiner(
    a: TransitionCocycle,
    b: TransitionCocycle,
    exponent_bound: int = 3,
    *,
    seed: int = 0,
    random_trials: int = 16,
) -> IntertwinerResult:
    """Chartwise maps ``f_k`` with ``f_i a_ij = b_ij f_j`` and unit determinant.

    Each entry of ``f_k`` ranges over the span of chart-``k`` monomials with
    exponents in ``[0, exponent_bound]^2`` (all regular on the chart).  The
    relations are linear in the coefficients; the exact solution space is
    computed, then its basis vectors and seeded random combinations are
    tested for invertibility.
    """
    if a.params or b.params:
        raise ValueError("intertwiner search needs instantiated constants")
    if a.rank != b.rank:
        return IntertwinerResult(False, 0, None, [], 0, exponent_bound)
    n = a.rank
    exps = list(product(range(exponent_bound + 1), repeat=2))
    index = {}
    for k in range(3):
        for r in range(n):
            for c in range(n):
                for e in exps:
                    index[(k, r, c, e)] = len(index)
    to_torus = {k: MonomialMap(CHART_TO_TORUS[k], CHART_COORDS[k], TORUS) for k in range(3)}
    rows: dict[tuple, dict[int, Fraction]] = {}

    def add(key, u, coeff):
        row = rows.setdefault(key, {})
        val = row.get(u, 0) + coeff
        if val:
            row[u] = val
        else:
            row.pop(u, None)

    for i, j in OVERLAPS:
        A, B = a.in_torus(i, j), b.in_torus(i, j)
        for r in range(n):
            for c in range(n):
                # (f_i A)[r][c] = sum_t f_i[r][t] A[t][c]
                for t in range(n):
                    for e in exps:
                        te = to_torus[i].apply_exponent(e)
                        u = index[(i, r, t, e)]
                        for ae, ac in A[t, c].items():
                            add((i, j, r, c, (te[0] + ae[0], te[1] + ae[1])), u, ac)
                # -(B f_j)[r][c] = -sum_t B[r][t] f_j[t][c]
                for t in range(n):
                    for e in exps:
                        te = to_torus[j].apply_exponent(e)
                        u = index[(j, t, c, e)]
                        for be, bc in B[r, t].items():
                            add((i, j, r, c, (te[0] + be[0], te[1] + be[1])), u, -bc)
    keyed = sorted(rows.items(), key=lambda kv: repr(kv[0]))
    basis_vecs = _nullspace([row for _, row in keyed if row], len(index))

    def to_maps(vec) -> dict[int, LaurentMatrix]:
        out = {}
        for k in range(3):
            v = chart_variables(k)
            grid = [[LaurentPolynomial.zero(v) for _ in range(n)] for _ in range(n)]
            for r in range(n):
                for c in range(n):
                    terms = {e: vec[index[(k, r, c, e)]] for e in exps if vec[index[(k, r, c, e)]]}
                    grid[r][c] = LaurentPolynomial(terms, v)
            out[k] = LaurentMatrix(grid, v)
        return out

    def invertible(maps) -> bool:
        return all(maps[k].determinant().is_unit() for k in range(3))

    basis = [to_maps(v) for v in basis_vecs]
    checked, witness = 0, None
    for maps in basis:
        checked += 1
        if invertible(maps):
            witness = maps
            break
    if witness is None and len(basis_vecs) > 1:
        rng = np.random.default_rng(seed)
        for _ in range(random_trials):
            coeffs = [int(x) for x in rng.integers(-5, 6, size=len(basis_vecs))]
            vec = [sum((cf * bv[u] for cf, bv in zip(coeffs, basis_vecs)), Fraction(0)) for u in range(len(index))]
            checked += 1
            maps = to_maps(vec)
            if invertible(maps):
                witness = maps
                break
    return IntertwinerResult(
        witness is not None, len(basis_vecs), witness, basis, checked, exponent_bound, basis_vecs, index
    )


# ---------------------------------------------------------------------------
# correction search

@dataclass(frozen=True)
class WallFactor:
    overlap: tuple[int, int]
    position: tuple[int, int]
    exponent: tuple[int, int]
    coefficient: Fraction

    def matrix(self, params: Sequence[str] = ()) -> LaurentMatrix:
        j = self.overlap[1]
        return _unipotent(j, chart_variables(j, params), self.position, self.exponent, self.coefficient)

    def to_json(self) -> dict:
        return {
            "overlap": list(self.overlap),
            "position": [self.position[0] + 1, self.position[1] + 1],
            "exponent": list(self.exponent),
            "coefficient": str(self.coefficient),
        }


@dataclass(frozen=True)
class CorrectionSolution:
    factors: tuple[WallFactor, ...]

    def matrices(self, params: Sequence[str] = ()) -> dict[tuple[int, int], LaurentMatrix]:
        return {f.overlap: f.matrix(params) for f in self.factors}

    def factor(self, overlap) -> WallFactor:
        return next(f for f in self.factors if f.overlap == tuple(overlap))

    def to_json(self) -> list:
        return [f.to_json() for f in self.factors]


_SOLVER_VARS = ("w1", "w2", "c10", "c21")
_POSITIONS = ((1, 0), (0, 1))


def _admissible_exponents(overlap, bound: int) -> list[tuple[int, int]]:
    ray = _overlap_ray(*overlap)
    return [
        (x, y)
        for x in range(-bound, bound + 1)
        for y in range(-bound, bound + 1)
        if (x, y) != (0, 0) and x * ray[0] + y * ray[1] <= 0
    ]


def _rational_roots(coeffs: Sequence[Fraction]) -> list[Fraction] | None:
    """Rational roots of ``c0 + c1 x + c2 x^2``; None when identically zero."""
    c0, c1, c2 = (list(coeffs) + [Fraction(0)] * 3)[:3]
    if c2 == 0:
        if c1 == 0:
            return None if c0 == 0 else []
        return [-c0 / c1]
    disc = c1 * c1 - 4 * c2 * c0
    if disc < 0:
        return []
    num, den = disc.numerator, disc.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn != num or rd * rd != den:
        return []
    s = Fraction(rn, rd)
    return sorted({(-c1 + s) / (2 * c2), (-c1 - s) / (2 * c2)})


class _Family(Exception):
    pass


def _solve_bilinear(eqs: list[tuple]) -> list[tuple[Fraction, Fraction]]:
    """Nonzero rational solutions of ``a + b x + c y + d x y = 0``; raises _Family if infinite."""
    eqs = [e for e in eqs if any(e)]
    if not eqs:
        raise _Family

    def univariate():
        for a, b, c, d in eqs:
            if c == 0 and d == 0:
                yield (a, b, Fraction(0))
        # resultants in y of pairs of linear-in-y equations
        for n, (a1, b1, c1, d1) in enumerate(eqs):
            for a2, b2, c2, d2 in eqs[n + 1:]:
                yield (a1 * c2 - a2 * c1, a1 * d2 + b1 * c2 - a2 * d1 - b2 * c1, b1 * d2 - b2 * d1)

    # any nonzero univariate consequence bounds x; candidates are verified below
    candidates = None
    for poly in univariate():
        roots = _rational_roots(poly)
        if roots is not None:
            candidates = roots
            break
    if candidates is None:
        raise _Family
    sols = []
    for x in candidates:
        if x == 0:
            continue
        lin = [(a + b * x, c + d * x) for a, b, c, d in eqs]
        slopes = [(p, q) for p, q in lin if q != 0]
        if not slopes:
            if all(p == 0 for p, _ in lin):
                raise _Family
            continue
        y = -slopes[0][0] / slopes[0][1]
        if y != 0 and all(p + q * y == 0 for p, q in lin):
            sols.append((x, y))
    return sols


def solve_unipotent_corrections(
    sf: TransitionCocycle,
    twist: LocalSystem | None = None,
    exponent_bound: int = 3,
    *,
    positions: Sequence[tuple[int, int]] = _POSITIONS,
) -> list[CorrectionSolution]:
    """All elementary unipotent corrections that make the (twisted) loop defect vanish.

    Each factor is ``I + c w^m`` at an off-diagonal ``position`` of its source
    frame, with ``m`` a nonzero torus exponent in ``[-bound, bound]^2``
    regular on the overlap and ``c`` a nonzero rational.  The factors on
    overlaps 10 and 21 are enumerated; the factor on 02 is then forced and
    the remaining conditions are polynomial in the two unknown coefficients.
    Solutions are verified by recomputing the defect.  Raises
    ``ValueError`` if the search meets a positive-dimensional family.
    """
    if sf.params:
        raise ValueError("correction search needs instantiated constants")
    if sf.rank != 2:
        raise ValueError("rank-2 cocycles only")
    V = _SOLVER_VARS
    base = twisted_cocycle(sf, twist)
    T = {ij: base.in_torus(*ij).extend(V) for ij in ((1, 0), (2, 1))}
    # g02 = S02 . Theta02 . M^{-1}, so Theta02 = S02^{-1} X^{-1} M
    s02_inv = sf.in_torus(0, 2).extend(V).inverse()
    m = twist_matrix(twist, V)
    c10 = LaurentPolynomial.variable("c10", V)
    c21 = LaurentPolynomial.variable("c21", V)

    def inverse_factors(ij, c):
        out = []
        for pos in positions:
            for mm in _admissible_exponents(ij, exponent_bound):
                inv = LaurentMatrix.identity(2, V).replace(
                    pos[0], pos[1], LaurentPolynomial.monomial((mm[0], mm[1], 0, 0), V) * -c
                )
                out.append((pos, mm, inv))
        return out

    # Theta02 = S02^{-1} X^{-1} M with X^{-1} = Th10^{-1} T10^{-1} Th21^{-1} T21^{-1}
    t10_inv, t21_inv = T[(1, 0)].inverse(), T[(2, 1)].inverse()
    lefts = [(p, mm, s02_inv @ inv @ t10_inv) for p, mm, inv in inverse_factors((1, 0), c10)]
    rights = [(p, mm, inv @ t21_inv @ m) for p, mm, inv in inverse_factors((2, 1), c21)]
    ray02 = _overlap_ray(0, 2)
    admissible02 = set(_admissible_exponents((0, 2), exponent_bound))
    zero4 = (Fraction(0),) * 4
    slot = {(0, 0): 0, (1, 0): 1, (0, 1): 2, (1, 1): 3}
    found: set[CorrectionSolution] = set()
    for pos10, m10, left in lefts:
        for pos21, m21, right in rights:
            theta02 = left @ right
            grouped = {}
            for r in range(2):
                for c in range(2):
                    g: dict[tuple, list] = {}
                    for e, coeff in theta02[r, c].items():
                        acc = g.setdefault((e[0], e[1]), list(zero4))
                        acc[slot[(e[2], e[3])]] += coeff
                    grouped[(r, c)] = {k: tuple(v) for k, v in g.items()}
            for pos02 in positions:
                other = (pos02[1], pos02[0])
                for m02 in sorted(set(grouped[pos02]) & admissible02):
                    eqs = []
                    for d in ((0, 0), (1, 1)):
                        for e, p in grouped[d].items():
                            eqs.append((p[0] - 1,) + p[1:] if e == (0, 0) else p)
                        if (0, 0) not in grouped[d]:
                            eqs.append((Fraction(-1), Fraction(0), Fraction(0), Fraction(0)))
                    for p in grouped[other].values():
                        eqs.append(p)
                    for e, p in grouped[pos02].items():
                        if e != m02:
                            eqs.append(p)
                    try:
                        sols = _solve_bilinear(eqs)
                    except _Family:
                        raise ValueError(
                            f"positive-dimensional family at {pos10, m10, pos21, m21, pos02, m02}"
                        ) from None
                    for xv, yv in sols:
                        a, b, c, d = grouped[pos02][m02]
                        coef = a + b * xv + c * yv + d * xv * yv
                        if coef == 0 or pairing(m02, ray02) > 0:
                            continue
                        sol = CorrectionSolution(
                            (
                                WallFactor((1, 0), pos10, m10, xv),
                                WallFactor((2, 1), pos21, m21, yv),
                                WallFactor((0, 2), pos02, m02, coef),
                            )
                        )
                        if twisted_corrected_defect(sf, sol.matrices(), twist).is_identity():
                            found.add(sol)
    return sorted(found, key=lambda s: repr(s.to_json()))
