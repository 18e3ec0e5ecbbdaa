"""Rank-2 lattices, cones, complete fans and piecewise-linear functions.

A ray value assignment ``phi(v_i) = a_i`` determines the supporting
function of the equivariant line bundle ``O(sum a_i D_i)``; see
:func:`pl_from_ray_values`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

Vector = tuple[int, int]
Covector = tuple  # pair of Fractions or ints

__all__ = [
    "Cone",
    "Fan",
    "PLFunction",
    "NonIntegralSlopeError",
    "HalfPlane",
    "build_p2_fan",
    "dual_cone",
    "pl_from_ray_values",
    "pl_is_strictly_convex",
    "pl_linear_difference",
    "pairing",
    "det2",
    "is_primitive",
    "primitive",
]


class NonIntegralSlopeError(ValueError):
    """The ray values force a non-integral slope on some cone."""

    def __init__(self, cone_index: int, slope: tuple[Fraction, Fraction]):
        super().__init__(f"cone {cone_index} needs non-integral slope {slope[0]}, {slope[1]}")
        self.cone_index = cone_index
        self.slope = slope


def pairing(m: Sequence, v: Sequence) -> Fraction | int:
    return m[0] * v[0] + m[1] * v[1]


def det2(a: Sequence, b: Sequence):
    return a[0] * b[1] - a[1] * b[0]


def is_primitive(v: Sequence[int]) -> bool:
    return math.gcd(int(v[0]), int(v[1])) == 1


def primitive(v: Sequence[int]) -> Vector:
    g = math.gcd(int(v[0]), int(v[1]))
    if g == 0:
        raise ValueError("zero vector has no primitive generator")
    return (int(v[0]) // g, int(v[1]) // g)


def _angle(v: Sequence) -> float:
    return math.atan2(v[1], v[0]) % (2 * math.pi)


@dataclass(frozen=True)
class Cone:
    """Cone spanned by 0, 1 or 2 primitive lattice vectors."""

    rays: tuple[Vector, ...] = ()

    def __post_init__(self):
        rays = tuple((int(a), int(b)) for a, b in self.rays)
        object.__setattr__(self, "rays", rays)
        if len(rays) > 2:
            raise ValueError("rank-2 cones have at most two generators")
        for r in rays:
            if not is_primitive(r):
                raise ValueError(f"generator {r} is not primitive")
        if len(rays) == 2 and det2(*rays) == 0:
            raise ValueError("two-generator cone must be strictly convex")

    @property
    def dim(self) -> int:
        return len(self.rays)

    def contains(self, x: Sequence) -> bool:
        if self.dim == 0:
            return x[0] == 0 and x[1] == 0
        if self.dim == 1:
            (u,) = self.rays
            return det2(u, x) == 0 and pairing(u, x) >= 0
        u, v = self.rays
        d = det2(u, v)
        # x = s u + t v, Cramer
        s = Fraction(det2(x, v)) / d
        t = Fraction(det2(u, x)) / d
        return s >= 0 and t >= 0

    def contains_interior(self, x: Sequence) -> bool:
        if self.dim != 2:
            return False
        u, v = self.rays
        d = det2(u, v)
        return Fraction(det2(x, v)) / d > 0 and Fraction(det2(u, x)) / d > 0


@dataclass(frozen=True)
class HalfPlane:
    """``{m : <m, normal> >= 0}`` in the dual lattice."""

    normal: Vector

    def contains(self, m: Sequence) -> bool:
        return pairing(m, self.normal) >= 0


def dual_cone(c: Cone):
    """Dual ``{m : <m, v> >= 0 for v in c}``.

    Returns a :class:`Cone` for full-dimensional input, a :class:`HalfPlane`
    for a ray and ``None`` (the whole of M) for the zero cone.
    """
    if c.dim == 0:
        return None
    if c.dim == 1:
        return HalfPlane(c.rays[0])
    u, v = c.rays
    # inward normals of the two facets
    a = primitive((-u[1], u[0]))
    if pairing(a, v) < 0:
        a = (-a[0], -a[1])
    b = primitive((-v[1], v[0]))
    if pairing(b, u) < 0:
        b = (-b[0], -b[1])
    return Cone((a, b))


@dataclass(frozen=True)
class Fan:
    """Complete (or partial) simplicial fan in the plane.

    ``cones`` holds pairs of indices into ``rays``.
    """

    rays: tuple[Vector, ...]
    cones: tuple[tuple[int, int], ...]
    adjacency: dict = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        rays = tuple((int(a), int(b)) for a, b in self.rays)
        cones = tuple(tuple(int(i) for i in c) for c in self.cones)
        if len(set(rays)) != len(rays):
            raise ValueError("duplicate rays")
        object.__setattr__(self, "rays", rays)
        object.__setattr__(self, "cones", cones)
        for c in cones:
            Cone(tuple(rays[i] for i in c))  # validates
        adj = {}
        for i, ci in enumerate(cones):
            for j in range(i + 1, len(cones)):
                shared = set(ci) & set(cones[j])
                if len(shared) == 1:
                    adj[(i, j)] = adj[(j, i)] = shared.pop()
        object.__setattr__(self, "adjacency", adj)

    def cone(self, k: int) -> Cone:
        return Cone(tuple(self.rays[i] for i in self.cones[k]))

    def shared_ray(self, i: int, j: int) -> int | None:
        return self.adjacency.get((i, j))

    def cones_containing_ray(self, r: int) -> list[int]:
        return [k for k, c in enumerate(self.cones) if r in c]

    def other_ray(self, k: int, r: int) -> int:
        a, b = self.cones[k]
        return b if a == r else a

    def is_complete(self) -> bool:
        """Exact test: rays in angular order bound consecutive cones, gaps below pi."""
        n = len(self.rays)
        if n < 3 or len(self.cones) != n:
            return False
        order = sorted(range(n), key=lambda i: _angle(self.rays[i]))
        cone_sets = {frozenset(c) for c in self.cones}
        for a, b in zip(order, order[1:] + order[:1]):
            if frozenset((a, b)) not in cone_sets:
                return False
            if det2(self.rays[a], self.rays[b]) <= 0:
                return False
        return True

    def cone_of(self, x: Sequence) -> int | None:
        """Index of some maximal cone containing ``x`` (None if uncovered)."""
        for k in range(len(self.cones)):
            if self.cone(k).contains(x):
                return k
        return None

    def cyclic_cone_order(self, start: int = 0) -> list[int]:
        """Maximal cones in counter-clockwise order beginning at ``start``."""
        def mid_angle(k):
            u, v = (self.rays[i] for i in self.cones[k])
            return _angle((u[0] + v[0], u[1] + v[1]))

        order = sorted(range(len(self.cones)), key=mid_angle)
        i = order.index(start)
        return order[i:] + order[:i]

    def to_json(self) -> dict:
        return {"rays": [list(r) for r in self.rays], "cones": [list(c) for c in self.cones]}

    @classmethod
    def from_json(cls, data: dict) -> "Fan":
        return cls(tuple(tuple(r) for r in data["rays"]), tuple(tuple(c) for c in data["cones"]))


def build_p2_fan() -> Fan:
    """Fan of the projective plane.

    Rays ``v0=(1,1), v1=(-1,0), v2=(0,-1)``; cone ``k`` is spanned by the two
    rays other than ``v_k``.
    """
    return Fan(rays=((1, 1), (-1, 0), (0, -1)), cones=((1, 2), (0, 2), (0, 1)))


def _frac_pair(m) -> tuple[Fraction, Fraction]:
    return (Fraction(m[0]), Fraction(m[1]))


@dataclass(frozen=True)
class PLFunction:
    """Piecewise-linear function: one covector (plus offset) per maximal cone."""

    fan: Fan
    slopes: tuple
    offsets: tuple = ()

    def __post_init__(self):
        slopes = tuple(_frac_pair(m) for m in self.slopes)
        if len(slopes) != len(self.fan.cones):
            raise ValueError("need one slope per maximal cone")
        offsets = tuple(Fraction(b) for b in self.offsets) or (Fraction(0),) * len(slopes)
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "offsets", offsets)

    def value_on_cone(self, k: int, x: Sequence) -> Fraction:
        return pairing(self.slopes[k], x) + self.offsets[k]

    def __call__(self, x: Sequence) -> Fraction:
        k = self.fan.cone_of(x)
        if k is None:
            raise ValueError(f"{x} is outside the support of the fan")
        return self.value_on_cone(k, x)

    def ray_values(self) -> tuple[Fraction, ...]:
        out = []
        for r, v in enumerate(self.fan.rays):
            k = self.fan.cones_containing_ray(r)[0]
            out.append(self.value_on_cone(k, v))
        return tuple(out)

    def continuity_defects(self) -> list[tuple[int, int, int, Fraction]]:
        """(cone, cone, ray, jump) for every shared ray where the pieces disagree."""
        bad = []
        for (i, j), r in sorted(self.fan.adjacency.items()):
            if i < j:
                v = self.fan.rays[r]
                jump = self.value_on_cone(i, v) - self.value_on_cone(j, v)
                if jump:
                    bad.append((i, j, r, jump))
        return bad

    def is_continuous(self) -> bool:
        return not self.continuity_defects()

    def is_integral(self) -> bool:
        return all(m[0].denominator == 1 and m[1].denominator == 1 for m in self.slopes)

    def __add__(self, other: "PLFunction") -> "PLFunction":
        if other.fan != self.fan:
            raise ValueError("PL functions on different fans")
        return PLFunction(
            self.fan,
            tuple((a[0] + b[0], a[1] + b[1]) for a, b in zip(self.slopes, other.slopes)),
            tuple(a + b for a, b in zip(self.offsets, other.offsets)),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, PLFunction):
            return NotImplemented
        return self.fan == other.fan and self.slopes == other.slopes and self.offsets == other.offsets

    def __hash__(self):
        return hash((self.fan.rays, self.fan.cones, self.slopes, self.offsets))

    def to_json(self) -> dict:
        return {
            **self.fan.to_json(),
            "slopes": [[str(a), str(b)] for a, b in self.slopes],
            "values": [str(x) for x in self.ray_values()],
        }


def pl_from_ray_values(fan: Fan, values: Sequence, *, require_integral: bool = True) -> PLFunction:
    """Supporting function with ``phi(v_r) = values[r]``; Cramer's rule per cone."""
    if len(values) != len(fan.rays):
        raise ValueError("need one value per ray")
    vals = [Fraction(x) for x in values]
    slopes = []
    for k, (i, j) in enumerate(fan.cones):
        u, v = fan.rays[i], fan.rays[j]
        d = det2(u, v)
        # m.u = a, m.v = b
        a, b = vals[i], vals[j]
        m = (Fraction(a * v[1] - b * u[1], d), Fraction(b * u[0] - a * v[0], d))
        if require_integral and (m[0].denominator != 1 or m[1].denominator != 1):
            raise NonIntegralSlopeError(k, m)
        slopes.append(m)
    return PLFunction(fan, tuple(slopes))


def pl_is_strictly_convex(f: PLFunction) -> bool:
    """Kink test: across each shared ray the neighbour's slope must bend upward.

    For adjacent cones ``s, t`` sharing ray ``r`` and ``u`` the other generator
    of ``t``, require ``<m_t - m_s, u> > 0``.
    """
    if not f.fan.adjacency:
        return False
    for (s, t), r in f.fan.adjacency.items():
        u = f.fan.rays[f.fan.other_ray(t, r)]
        diff = (f.slopes[t][0] - f.slopes[s][0], f.slopes[t][1] - f.slopes[s][1])
        if pairing(diff, u) <= 0:
            return False
    return True


def pl_linear_difference(f: PLFunction, g: PLFunction) -> tuple[Fraction, Fraction] | None:
    """Global covector ``m`` with ``f - g = <m, .>`` (linear equivalence), else None."""
    if f.fan != g.fan:
        return None
    diffs = {(a[0] - b[0], a[1] - b[1]) for a, b in zip(f.slopes, g.slopes)}
    offs = {a - b for a, b in zip(f.offsets, g.offsets)}
    if len(diffs) == 1 and offs == {0}:
        return diffs.pop()
    return None


def load_fan_json(text: str) -> tuple[Fan, list | None]:
    data = json.loads(text)
    fan = Fan.from_json(data)
    values = data.get("values")
    return fan, values
