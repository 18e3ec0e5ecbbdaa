"""Numerics of the Fubini-Study family and its tropical limit.

Points of the moment triangle ``P = {x1, x2 >= 0, x1 + x2 <= 1}`` carry
the potential ``g_P + psi / hbar``.  Connection entries are softmax weights
of ``2 xi`` and are always evaluated in log space.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array

from .cover import TropicalMultiSection, validate

__all__ = [
    "DomainError",
    "UndefinedRegionError",
    "PolytopePoint",
    "Potentials",
    "EntryTriple",
    "potentials",
    "gradient_g",
    "gradient_psi",
    "hessian_g",
    "hessian_psi",
    "g_P",
    "psi",
    "legendre_xi",
    "legendre_x",
    "connection_entries",
    "entry_errors",
    "region_classify",
    "boundary_distance",
    "tropical_limit",
    "tropical_connection",
    "assemble_connection",
    "hessian_check",
    "convergence_sweep",
    "SweepReport",
    "region_grid",
    "default_grids",
    "trop_potential_limit",
    "syz_connection_of_multisection",
    "CONE_TO_REGION",
    "TropicalLimitTransformer",
    "RegionClassifier",
]

REGIONS = ("P0", "P1", "P2")
CONE_TO_REGION = {0: "P0", 1: "P1", 2: "P2"}


class DomainError(ValueError):
    pass


class UndefinedRegionError(ValueError):
    pass


@dataclass(frozen=True)
class PolytopePoint:
    x1: float
    x2: float

    @property
    def x3(self) -> float:
        return 1.0 - self.x1 - self.x2

    def is_interior(self) -> bool:
        return self.x1 > 0 and self.x2 > 0 and self.x3 > 0

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2])


def _point(x) -> PolytopePoint:
    if isinstance(x, PolytopePoint):
        return x
    return PolytopePoint(float(x[0]), float(x[1]))


def _interior(x) -> PolytopePoint:
    p = _point(x)
    if not p.is_interior():
        raise DomainError(f"({p.x1}, {p.x2}) is not in the open triangle")
    return p


@dataclass(frozen=True)
class Potentials:
    g_P: float
    psi: float
    psi1: float
    psi2: float
    g1: float
    g2: float


@dataclass(frozen=True)
class EntryTriple:
    E1: float
    E2: float
    E12: float

    def as_array(self) -> np.ndarray:
        return np.array([self.E1, self.E2, self.E12])


def g_P(x) -> float:
    p = _interior(x)
    return 0.5 * (p.x1 * math.log(p.x1) + p.x2 * math.log(p.x2) + p.x3 * math.log(p.x3))


def psi(x) -> float:
    p = _point(x)
    return p.x1**2 + p.x2**2 + p.x1 * p.x2 - p.x1 - p.x2


def gradient_g(x) -> np.ndarray:
    p = _interior(x)
    return 0.5 * np.log(np.array([p.x1, p.x2]) / p.x3)


def gradient_psi(x) -> np.ndarray:
    p = _point(x)
    return np.array([2 * p.x1 + p.x2 - 1, p.x1 + 2 * p.x2 - 1])


def hessian_g(x) -> np.ndarray:
    p = _interior(x)
    return 0.5 * np.array([[1 / p.x1 + 1 / p.x3, 1 / p.x3], [1 / p.x3, 1 / p.x2 + 1 / p.x3]])


def hessian_psi(x=None) -> np.ndarray:
    return np.array([[2.0, 1.0], [1.0, 2.0]])


def potentials(x) -> Potentials:
    p = _interior(x)
    g1, g2 = gradient_g(p)
    s1, s2 = gradient_psi(p)
    return Potentials(g_P(p), psi(p), float(s1), float(s2), float(g1), float(g2))


def legendre_xi(x, hbar: float | None) -> np.ndarray:
    """``xi_hbar = grad g_P + grad psi / hbar``; ``hbar=None`` drops the psi term."""
    xi = gradient_g(x)
    if hbar is None:
        return xi
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    return xi + gradient_psi(x) / hbar


def legendre_x(xi: Sequence[float]) -> PolytopePoint:
    """Gradient of ``1/2 log(1 + e^{2 xi1} + e^{2 xi2})``."""
    xi = np.asarray(xi, dtype=float)
    lse = np.logaddexp.reduce([0.0, 2 * xi[0], 2 * xi[1]])
    return PolytopePoint(float(np.exp(2 * xi[0] - lse)), float(np.exp(2 * xi[1] - lse)))


def _log_weights(x, hbar):
    xi1, xi2 = legendre_xi(x, hbar)
    L = np.logaddexp.reduce([0.0, 2 * xi1, 2 * xi2])
    return xi1, xi2, L


def connection_entries(x, hbar: float) -> EntryTriple:
    xi1, xi2, L = _log_weights(x, hbar)
    return EntryTriple(float(np.exp(2 * xi1 - L)), float(np.exp(2 * xi2 - L)), float(np.exp(xi1 + xi2 - L)))


def entry_errors(x, hbar: float, limit: EntryTriple) -> np.ndarray:
    """``|E - limit|`` per entry; limits equal to 1 use the log-space complement."""
    xi1, xi2, L = _log_weights(x, hbar)
    logs = {
        "E1": (2 * xi1 - L, np.logaddexp(0.0, 2 * xi2) - L),
        "E2": (2 * xi2 - L, np.logaddexp(0.0, 2 * xi1) - L),
        "E12": (xi1 + xi2 - L, None),
    }
    out = []
    for name, target in (("E1", limit.E1), ("E2", limit.E2), ("E12", limit.E12)):
        log_val, log_comp = logs[name]
        if target == 1.0 and log_comp is not None:
            out.append(float(np.exp(log_comp)))
        elif target == 0.0:
            out.append(float(np.exp(log_val)))
        else:
            out.append(abs(float(np.exp(log_val)) - target))
    return np.array(out)


def region_classify(x, tol: float = 1e-9) -> str:
    """``P0``, ``P1``, ``P2`` or ``boundary`` (within ``tol`` of a defining equality)."""
    p = _point(x)
    s1, s2 = gradient_psi(p)
    if s1 <= 0 and s2 <= 0:
        return "boundary" if max(s1, s2) > -tol else "P0"
    d = p.x1 - p.x2
    if abs(d) < tol:
        return "boundary"
    if d > 0:
        return "boundary" if s1 < tol else "P1"
    return "boundary" if s2 < tol else "P2"


def boundary_distance(x) -> float:
    """Euclidean distance from ``x`` to the internal walls of its region."""
    p = _point(x)
    s1, s2 = gradient_psi(p)
    tag = region_classify(p, 0.0)
    if tag == "P0":
        return float(min(-s1, -s2) / math.sqrt(5))
    if tag == "P1":
        return float(min(s1 / math.sqrt(5), (p.x1 - p.x2) / math.sqrt(2)))
    if tag == "P2":
        return float(min(s2 / math.sqrt(5), (p.x2 - p.x1) / math.sqrt(2)))
    return 0.0


def tropical_limit(region: str) -> EntryTriple:
    limits = {"P0": EntryTriple(0.0, 0.0, 0.0), "P1": EntryTriple(1.0, 0.0, 0.0), "P2": EntryTriple(0.0, 1.0, 0.0)}
    if region not in limits:
        raise UndefinedRegionError(f"no tropical limit on {region!r}")
    return limits[region]


def tropical_connection(region: str) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient matrices of the limiting connection on ``dy1`` and ``dy2``."""
    zero = np.zeros((2, 2))
    if region == "P0":
        return zero, zero.copy()
    if region == "P1":
        return np.diag([2.0, 1.0]), zero
    if region == "P2":
        return zero, np.diag([1.0, 2.0])
    raise UndefinedRegionError(f"no tropical connection on {region!r}")


def assemble_connection(x, hbar: float) -> tuple[np.ndarray, np.ndarray]:
    """``dz1`` and ``dz2`` coefficient matrices of the Fubini-Study connection on the real locus."""
    e = connection_entries(x, hbar)
    dz1 = np.array([[2 * e.E1, 0.0], [e.E12, e.E1]])
    dz2 = np.array([[e.E2, e.E12], [0.0, 2 * e.E2]])
    return dz1, dz2


def hessian_check(x, hbar: float) -> tuple[bool, float, float]:
    """Leading-minor positivity of ``Hess(g_P + psi/hbar)``, its determinant and ``alpha``."""
    p = _interior(x)
    h = hessian_g(p) + hessian_psi() / hbar
    det = float(np.linalg.det(h))
    pd = bool(h[0, 0] > 0 and det > 0)
    alpha = 1.0 / (det * p.x1 * p.x2 * p.x3)
    return pd, det, alpha


# ---------------------------------------------------------------------------
# sweeps

@dataclass
class SweepReport:
    hbars: list[float]
    points: list[dict] = field(default_factory=list)
    excluded: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return bool(self.points) and all(p["monotone"] and p["slope"] < 0 for p in self.points)

    def max_final_error(self) -> float:
        return max(p["errors"][-1] for p in self.points)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x1", "x2", "hbar", "E1", "E2", "E12", "region", "err1", "err2", "err12"])
        for p in self.points:
            for row in p["rows"]:
                w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "hbars": self.hbars,
            "points": [
                {k: p[k] for k in ("x", "region", "errors", "monotone", "slope")} for p in self.points
            ],
            "excluded": self.excluded,
        }


def convergence_sweep(grid: Iterable, hbars: Sequence[float], tol: float = 1e-9) -> SweepReport:
    """Distance of the connection entries from their tropical limits along decreasing ``hbar``.

    The error at a point is the largest of the three entry errors.  The
    decay slope is a least-squares fit of ``log(error)`` against ``1/hbar``.
    """
    hbars = [float(h) for h in hbars]
    if any(b >= a for a, b in zip(hbars, hbars[1:])):
        raise ValueError("hbar list must be strictly decreasing")
    rep = SweepReport(hbars)
    for x in grid:
        p = _point(x)
        tag = region_classify(p, tol)
        if tag == "boundary" or not p.is_interior():
            rep.excluded.append({"x": [p.x1, p.x2], "region": tag})
            continue
        lim = tropical_limit(tag)
        errs, rows = [], []
        for h in hbars:
            e = connection_entries(p, h)
            d = entry_errors(p, h, lim)
            errs.append(float(d.max()))
            rows.append([p.x1, p.x2, h, e.E1, e.E2, e.E12, tag, *map(float, d)])
        monotone = all(b < a for a, b in zip(errs, errs[1:]))
        positive = [(1 / h, math.log(e)) for h, e in zip(hbars, errs) if e > 0]
        if len(positive) >= 2:
            xs, ys = zip(*positive)
            slope = float(np.polyfit(xs, ys, 1)[0])
        else:
            slope = float("-inf")
        rep.points.append(
            {"x": [p.x1, p.x2], "region": tag, "errors": errs, "monotone": monotone, "slope": slope, "rows": rows}
        )
    return rep


def region_grid(region: str) -> list[tuple[float, float]]:
    """3x3 interior grid well inside a region (at least 0.05 from its walls)."""
    if region == "P0":
        xs = ys = (0.08, 0.14, 0.2)
    elif region == "P1":
        xs, ys = (0.6, 0.675, 0.75), (0.05, 0.10, 0.15)
    elif region == "P2":
        xs, ys = (0.05, 0.10, 0.15), (0.6, 0.675, 0.75)
    else:
        raise UndefinedRegionError(region)
    return [(x, y) for x in xs for y in ys]


def default_grids() -> dict[str, list[tuple[float, float]]]:
    return {r: region_grid(r) for r in REGIONS}


def trop_potential_limit(k: int, xi: Sequence[float], t_list: Sequence[float]) -> list[dict]:
    """``(k/2) log_t(1 + t^{2 xi1} + t^{2 xi2})`` against ``max(0, k xi1, k xi2)``."""
    if any(t <= 1 for t in t_list) or any(b <= a for a, b in zip(t_list, t_list[1:])):
        raise ValueError("t values must be increasing and > 1")
    limit = max(0.0, k * xi[0], k * xi[1])
    out = []
    for t in t_list:
        lt = math.log(t)
        val = 0.5 * k * float(np.logaddexp.reduce([0.0, 2 * xi[0] * lt, 2 * xi[1] * lt])) / lt
        out.append({"t": t, "value": val, "limit": limit, "error": abs(val - limit)})
    return out


def syz_connection_of_multisection(
    ms: TropicalMultiSection, order: dict[int, Sequence[str]] | None = None
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Diagonal matrices of sheet slopes per base cone.

    The default sheet order sorts labels with ``+`` before ``-``, which is the
    frame of the Fubini-Study connection.
    """
    if not validate(ms).ok:
        raise ValueError("multi-section fails validation")
    out = {}
    for k in range(len(ms.base.cones)):
        labels = list(order[k]) if order else sorted(ms.sheets_over(k), key=lambda s: s.replace("+", "!"))
        slopes = [ms.sheet(l).slope for l in labels]
        out[k] = (np.diag([float(m[0]) for m in slopes]), np.diag([float(m[1]) for m in slopes]))
    return out


# ---------------------------------------------------------------------------
# estimator wrappers

class TropicalLimitTransformer(TransformerMixin, BaseEstimator):
    """Maps triangle points ``(x1, x2)`` to the entries ``(E1, E2, E12)`` at a fixed ``hbar``."""

    def __init__(self, hbar: float = 0.0125):
        self.hbar = hbar

    def fit(self, X, y=None):
        X = check_array(X)
        if X.shape[1] != 2:
            raise ValueError("expected two columns (x1, x2)")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        X = check_array(X)
        return np.array([connection_entries(row, self.hbar).as_array() for row in X])

    def limits(self, X, tol: float = 1e-9):
        """Tropical limits of the rows of ``X`` (NaN on region boundaries)."""
        X = check_array(X)
        out = []
        for row in X:
            tag = region_classify(row, tol)
            out.append(tropical_limit(tag).as_array() if tag != "boundary" else np.full(3, np.nan))
        return np.array(out)


class RegionClassifier(ClassifierMixin, BaseEstimator):
    """Rule-based region tags; ``fit`` only records the label set."""

    def __init__(self, tol: float = 1e-9):
        self.tol = tol

    def fit(self, X, y=None):
        check_array(X)
        self.classes_ = np.array(["P0", "P1", "P2", "boundary"])
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        X = check_array(X)
        return np.array([region_classify(row, self.tol) for row in X])
