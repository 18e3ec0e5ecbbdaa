"""Branched covers of fans carrying piecewise-linear data.

A :class:`TropicalMultiSection` is a set of sheets (copies of maximal
cones, each with an integral linear function) glued pairwise along shared
rays.  Away from the origin the projection to the base fan is an
unbranched covering; the origin is the only branch point.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .fan import Fan, PLFunction, build_p2_fan, pairing

__all__ = [
    "SheetedCone",
    "GluingEdge",
    "TropicalMultiSection",
    "SheetPermutation",
    "CoverStructureError",
    "ValidationReport",
    "build_L",
    "build_Lprime",
    "trivial_double",
    "validate",
    "monodromy",
    "trace_pl",
    "compare_multisections",
    "is_strictly_convex_on_cover",
    "SHEET_MATCH",
]


class CoverStructureError(ValueError):
    """Inconsistent gluing data (missing or duplicated sheet matches)."""


@dataclass(frozen=True)
class SheetedCone:
    cone: int
    label: str
    slope: tuple
    offset: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "slope", (Fraction(self.slope[0]), Fraction(self.slope[1])))
        object.__setattr__(self, "offset", Fraction(self.offset))

    def value(self, x: Sequence) -> Fraction:
        return pairing(self.slope, x) + self.offset


@dataclass(frozen=True)
class GluingEdge:
    ray: int
    a: str
    b: str


@dataclass(frozen=True)
class TropicalMultiSection:
    """Sheets over a base fan glued along rays.

    ``frame_order`` fixes, per maximal cone, the order in which that cone's
    sheets index a local frame; it defaults to label order.
    """

    base: Fan
    sheets: tuple[SheetedCone, ...]
    gluings: tuple[GluingEdge, ...]
    branch_points: tuple = ((0, 0),)
    frame_order: Mapping[int, tuple[str, ...]] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        labels = [s.label for s in self.sheets]
        if len(set(labels)) != len(labels):
            raise CoverStructureError("sheet labels must be unique")
        order = {}
        for k in range(len(self.base.cones)):
            given = tuple(self.frame_order.get(k, ()))
            over = sorted(s.label for s in self.sheets if s.cone == k)
            if given:
                if sorted(given) != over:
                    raise CoverStructureError(f"frame order {given} does not list the sheets over cone {k}")
                order[k] = given
            else:
                order[k] = tuple(over)
        object.__setattr__(self, "frame_order", order)

    def sheet(self, label: str) -> SheetedCone:
        for s in self.sheets:
            if s.label == label:
                return s
        raise KeyError(label)

    def sheets_over(self, k: int) -> tuple[str, ...]:
        return self.frame_order[k]

    @property
    def degree(self) -> int:
        counts = {len(self.frame_order[k]) for k in range(len(self.base.cones))}
        if len(counts) != 1:
            raise CoverStructureError(f"non-constant number of sheets: {sorted(counts)}")
        return counts.pop()

    def matching(self, i: int, j: int) -> dict[str, str]:
        """Sheet over cone ``j`` -> the sheet over cone ``i`` glued to it."""
        r = self.base.shared_ray(i, j)
        if r is None:
            raise CoverStructureError(f"cones {i} and {j} are not adjacent")
        over_i, over_j = set(self.sheets_over(i)), set(self.sheets_over(j))
        out: dict[str, str] = {}
        for g in self.gluings:
            if g.ray != r:
                continue
            for x, y in ((g.a, g.b), (g.b, g.a)):
                if x in over_j and y in over_i:
                    if x in out:
                        raise CoverStructureError(f"sheet {x} glued twice across ray {r}")
                    out[x] = y
        if set(out) != over_j or set(out.values()) != over_i:
            raise CoverStructureError(f"gluing across ray {r} is not a bijection between cones {j} and {i}")
        return out

    def with_slope(self, label: str, slope) -> "TropicalMultiSection":
        sheets = tuple(
            SheetedCone(s.cone, s.label, slope, s.offset) if s.label == label else s for s in self.sheets
        )
        return TropicalMultiSection(self.base, sheets, self.gluings, self.branch_points, self.frame_order, self.name)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "fan": self.base.to_json(),
            "sheets": [
                {"label": s.label, "cone": s.cone, "slope": [str(s.slope[0]), str(s.slope[1])], "offset": str(s.offset)}
                for s in self.sheets
            ],
            "gluings": [{"ray": g.ray, "sheets": [g.a, g.b]} for g in self.gluings],
            "branch_points": [list(p) for p in self.branch_points],
            "frame_order": {str(k): list(v) for k, v in sorted(self.frame_order.items())},
        }

    @classmethod
    def from_json(cls, data: dict) -> "TropicalMultiSection":
        fan = Fan.from_json(data["fan"])
        sheets = tuple(
            SheetedCone(s["cone"], s["label"], tuple(Fraction(x) for x in s["slope"]), Fraction(s.get("offset", 0)))
            for s in data["sheets"]
        )
        gluings = tuple(GluingEdge(g["ray"], *g["sheets"]) for g in data["gluings"])
        frame_order = {int(k): tuple(v) for k, v in data.get("frame_order", {}).items()}
        bps = tuple(tuple(p) for p in data.get("branch_points", [(0, 0)]))
        return cls(fan, sheets, gluings, bps, frame_order, data.get("name", ""))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


@dataclass(frozen=True)
class SheetPermutation:
    mapping: Mapping[str, str]

    def __post_init__(self):
        m = dict(sorted(self.mapping.items()))
        if sorted(m) != sorted(m.values()):
            raise CoverStructureError("sheet permutation is not a bijection")
        object.__setattr__(self, "mapping", m)

    def __call__(self, label: str) -> str:
        return self.mapping[label]

    def compose(self, other: "SheetPermutation") -> "SheetPermutation":
        """``self`` after ``other``."""
        return SheetPermutation({k: self.mapping[other.mapping[k]] for k in other.mapping})

    def is_identity(self) -> bool:
        return all(k == v for k, v in self.mapping.items())

    def order(self) -> int:
        p, n = self, 1
        while not p.is_identity():
            p, n = p.compose(self), n + 1
        return n

    def cycles(self) -> list[tuple[str, ...]]:
        seen, out = set(), []
        for start in self.mapping:
            if start in seen:
                continue
            cyc, x = [], start
            while x not in seen:
                seen.add(x)
                cyc.append(x)
                x = self.mapping[x]
            if len(cyc) > 1:
                out.append(tuple(cyc))
        return out

    def is_transposition(self) -> bool:
        cyc = self.cycles()
        return len(cyc) == 1 and len(cyc[0]) == 2


# ---------------------------------------------------------------------------
# the two concrete covers of the P^2 fan

def build_L() -> TropicalMultiSection:
    """Cover obtained from the tropical limit of the Fubini-Study connection.

    Sheets ``k+``/``k-`` over cone ``k`` carry slopes
    0, 0 | (2,0), (1,0) | (0,1), (0,2).  The frame orders reproduce the
    semi-flat matrices (U_0: 0-, 0+; U_1: 1+, 1-; U_2: 2-, 2+).
    """
    fan = build_p2_fan()
    sheets = (
        SheetedCone(0, "0+", (0, 0)),
        SheetedCone(0, "0-", (0, 0)),
        SheetedCone(1, "1+", (2, 0)),
        SheetedCone(1, "1-", (1, 0)),
        SheetedCone(2, "2+", (0, 1)),
        SheetedCone(2, "2-", (0, 2)),
    )
    # ray 0 = v0 (cones 1|2), ray 1 = v1 (cones 0|2), ray 2 = v2 (cones 0|1)
    gluings = (
        GluingEdge(0, "1+", "2-"),
        GluingEdge(0, "1-", "2+"),
        GluingEdge(2, "0+", "1-"),
        GluingEdge(2, "0-", "1+"),
        GluingEdge(1, "0+", "2-"),
        GluingEdge(1, "0-", "2+"),
    )
    frames = {0: ("0-", "0+"), 1: ("1+", "1-"), 2: ("2-", "2+")}
    return TropicalMultiSection(fan, sheets, gluings, ((0, 0),), frames, "L")


def build_Lprime() -> TropicalMultiSection:
    """Cone complex from the equivariant splitting of the tangent bundle.

    Sheet ``ki`` over cone ``k`` carries the function of ``O(D_i)`` on ``U_k``;
    ``ij ~ ji`` and ``ik ~ jk`` are glued along ``v_k``.
    """
    fan = build_p2_fan()
    slopes = {
        "01": (-1, 0),
        "02": (0, -1),
        "10": (1, 0),
        "12": (1, -1),
        "20": (0, 1),
        "21": (-1, 1),
    }
    sheets = tuple(SheetedCone(int(lab[0]), lab, m) for lab, m in slopes.items())
    gluings = []
    for i, j, k in ((0, 1, 2), (1, 2, 0), (0, 2, 1)):
        gluings.append(GluingEdge(k, f"{i}{j}", f"{j}{i}"))
        gluings.append(GluingEdge(k, f"{i}{k}", f"{j}{k}"))
    frames = {0: ("01", "02"), 1: ("10", "12"), 2: ("20", "21")}
    return TropicalMultiSection(fan, sheets, tuple(gluings), ((0, 0),), frames, "L'")


def trivial_double(slopes_per_cone: Sequence | None = None) -> TropicalMultiSection:
    """Two disjoint copies of a PL function (diagonal gluings, no branching)."""
    fan = build_p2_fan()
    slopes_per_cone = slopes_per_cone or [(0, 0)] * 3
    sheets = []
    for k, m in enumerate(slopes_per_cone):
        sheets += [SheetedCone(k, f"{k}a", m), SheetedCone(k, f"{k}b", m)]
    gluings = []
    for (i, j), r in sorted(fan.adjacency.items()):
        if i < j:
            gluings += [GluingEdge(r, f"{i}a", f"{j}a"), GluingEdge(r, f"{i}b", f"{j}b")]
    frames = {k: (f"{k}a", f"{k}b") for k in range(3)}
    return TropicalMultiSection(fan, tuple(sheets), tuple(gluings), (), frames, "trivial")


# ---------------------------------------------------------------------------
# checks

@dataclass
class ValidationReport:
    checks: list[dict] = field(default_factory=list)

    def add(self, name: str, ok: bool, **witness):
        self.checks.append({"name": name, "status": "pass" if ok else "fail", "witness": witness})

    @property
    def ok(self) -> bool:
        return all(c["status"] == "pass" for c in self.checks)

    def failures(self) -> list[dict]:
        return [c for c in self.checks if c["status"] != "pass"]


def validate(ms: TropicalMultiSection) -> ValidationReport:
    """Covering, integrality and continuity conditions of a multi-section."""
    rep = ValidationReport()
    fan = ms.base
    cone_rays = {k: set(c) for k, c in enumerate(fan.cones)}
    for g in ms.gluings:
        try:
            sa, sb = ms.sheet(g.a), ms.sheet(g.b)
        except KeyError as exc:
            rep.add(f"gluing {g.a}~{g.b}", False, error=f"unknown sheet {exc}")
            continue
        v = fan.rays[g.ray]
        adjacent = sa.cone != sb.cone and g.ray in cone_rays[sa.cone] & cone_rays[sb.cone]
        jump = sa.value(v) - sb.value(v)
        rep.add(
            f"continuity {g.a}~{g.b} along ray {g.ray}",
            adjacent and jump == 0,
            adjacent=adjacent,
            values=[str(sa.value(v)), str(sb.value(v))],
        )
    for s in ms.sheets:
        integral = all(x.denominator == 1 for x in s.slope)
        rep.add(f"integral slope {s.label}", integral, slope=[str(x) for x in s.slope])
    counts = sorted({len(ms.sheets_over(k)) for k in range(len(fan.cones))})
    rep.add("constant sheet count", len(counts) == 1, counts=counts)
    degree = counts[0] if len(counts) == 1 else None
    for (i, j), r in sorted(fan.adjacency.items()):
        if i > j:
            continue
        try:
            m = ms.matching(i, j)
            ok = degree is not None and len(m) == degree
            rep.add(f"covering degree over ray {r}", ok, degree=len(m))
        except CoverStructureError as exc:
            rep.add(f"covering degree over ray {r}", False, error=str(exc))
    codims = [2 if tuple(p) == (0, 0) else None for p in ms.branch_points]
    rep.add("branch locus codimension >= 2", all(c == 2 for c in codims), branch_points=[list(p) for p in ms.branch_points])
    return rep


def monodromy(ms: TropicalMultiSection, base_cone: int = 0) -> SheetPermutation:
    """Sheet permutation picked up by walking once counter-clockwise around the origin."""
    order = ms.base.cyclic_cone_order(base_cone)
    perm = {s: s for s in ms.sheets_over(base_cone)}
    for a, b in zip(order, order[1:] + order[:1]):
        step = ms.matching(b, a)  # sheet over a -> sheet over b
        perm = {s: step[t] for s, t in perm.items()}
    return SheetPermutation(perm)


def is_connected(ms: TropicalMultiSection) -> bool:
    adj = defaultdict(set)
    for g in ms.gluings:
        adj[g.a].add(g.b)
        adj[g.b].add(g.a)
    labels = [s.label for s in ms.sheets]
    seen, stack = {labels[0]}, [labels[0]]
    while stack:
        for y in adj[stack.pop()]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return len(seen) == len(labels)


def trace_pl(ms: TropicalMultiSection) -> PLFunction:
    """Base PL function whose slope on a cone is the sum of the sheet slopes."""
    ms.degree  # raises on non-constant degree
    slopes, offsets = [], []
    for k in range(len(ms.base.cones)):
        over = [ms.sheet(l) for l in ms.sheets_over(k)]
        slopes.append((sum(s.slope[0] for s in over), sum(s.slope[1] for s in over)))
        offsets.append(sum(s.offset for s in over))
    return PLFunction(ms.base, tuple(slopes), tuple(offsets))


def is_strictly_convex_on_cover(ms: TropicalMultiSection) -> bool:
    """Kink test applied across every gluing edge, in both directions."""
    fan = ms.base
    for g in ms.gluings:
        for s_lab, t_lab in ((g.a, g.b), (g.b, g.a)):
            s, t = ms.sheet(s_lab), ms.sheet(t_lab)
            u = fan.rays[fan.other_ray(t.cone, g.ray)]
            diff = (t.slope[0] - s.slope[0], t.slope[1] - s.slope[1])
            if pairing(diff, u) <= 0:
                return False
    return True


# pairing between sheets of L and L' realising phi - phi' in the comparison
SHEET_MATCH = {"0-": "01", "0+": "02", "1+": "10", "1-": "12", "2+": "21", "2-": "20"}


def compare_multisections(
    a: TropicalMultiSection, b: TropicalMultiSection, sheet_match: Mapping[str, str]
) -> dict:
    """Per-sheet slope differences ``a - b`` under a gluing-compatible matching.

    The result groups sheets of ``a`` by their difference covector and records
    whether each group projects bijectively onto the maximal cones (so the
    difference restricted to that group is a single global linear function).
    """
    if a.base != b.base:
        raise CoverStructureError("multi-sections over different fans")
    if a.degree != b.degree:
        raise CoverStructureError(f"degree mismatch: {a.degree} vs {b.degree}")
    match = dict(sheet_match)
    if sorted(match) != sorted(s.label for s in a.sheets) or sorted(match.values()) != sorted(
        s.label for s in b.sheets
    ):
        raise CoverStructureError("sheet match is not a bijection between the sheet sets")
    for la, lb in match.items():
        if a.sheet(la).cone != b.sheet(lb).cone:
            raise CoverStructureError(f"{la} and {lb} lie over different cones")
    glued_b = {frozenset((g.a, g.b)) for g in b.gluings}
    for g in a.gluings:
        if frozenset((match[g.a], match[g.b])) not in glued_b:
            raise CoverStructureError(f"match breaks the gluing {g.a}~{g.b}")

    diffs = {}
    for la in sorted(match):
        sa, sb = a.sheet(la), b.sheet(match[la])
        diffs[la] = (sa.slope[0] - sb.slope[0], sa.slope[1] - sb.slope[1], sa.offset - sb.offset)
    groups: dict[tuple, list[str]] = defaultdict(list)
    for la, d in diffs.items():
        groups[d].append(la)
    n_cones = len(a.base.cones)
    summary = []
    for d, labels in sorted(groups.items()):
        cones = sorted(a.sheet(l).cone for l in labels)
        summary.append(
            {
                "difference": d,
                "sheets": sorted(labels),
                "global_linear": cones == list(range(n_cones)),
            }
        )
    return {"differences": diffs, "groups": summary}
