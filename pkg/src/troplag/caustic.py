"""Gradient flow of the local caustic model on the branched double cover.

Points are polar ``(r, theta)`` with ``theta`` on the double cover
``[0, 4 pi)``; the potential is ``f = 4/3 r^{3/2} cos(3 theta / 2)`` and the
flow uses the Euclidean metric ``dr^2 + r^2 dtheta^2``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "SingularPointError",
    "PolarPoint",
    "FlowPath",
    "f_caustic",
    "grad_caustic",
    "first_integral",
    "integrate_flow",
    "find_separatrices",
    "separatrix_report",
]

R_MIN = 1e-8
R_MAX = 10.0


class SingularPointError(ValueError):
    pass


@dataclass(frozen=True)
class PolarPoint:
    r: float
    theta: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("r must be nonnegative")


def f_caustic(r: float, theta: float) -> float:
    return 4.0 / 3.0 * r**1.5 * math.cos(1.5 * theta)


def grad_caustic(r: float, theta: float) -> tuple[float, float]:
    """``(dr/dt, dtheta/dt)`` of the gradient flow."""
    if r <= 0:
        raise SingularPointError("gradient is singular at the origin")
    s = math.sqrt(r)
    return 2.0 * s * math.cos(1.5 * theta), -2.0 / s * math.sin(1.5 * theta)


def first_integral(r: float, theta: float) -> float:
    return r**1.5 * math.sin(1.5 * theta)


@dataclass
class FlowPath:
    t: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    step: float
    integrator: str = "rk4"
    stop_reason: str = ""

    def __len__(self) -> int:
        return len(self.t)

    @property
    def f(self) -> np.ndarray:
        return 4.0 / 3.0 * self.r**1.5 * np.cos(1.5 * self.theta)

    @property
    def Q(self) -> np.ndarray:
        return self.r**1.5 * np.sin(1.5 * self.theta)

    def rotated(self, angle: float) -> "FlowPath":
        return FlowPath(self.t, self.r, self.theta + angle, self.step, self.integrator, self.stop_reason)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "r", "theta", "f", "Q"])
        for row in zip(self.t, self.r, self.theta, self.f, self.Q):
            w.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()


def integrate_flow(
    start,
    step: float = 1e-4,
    max_steps: int = 100_000,
    *,
    r_min: float = R_MIN,
    r_max: float = R_MAX,
    direction: int = 1,
) -> FlowPath:
    """Fixed-step classical RK4; ``direction=-1`` follows the flow backwards."""
    if step <= 0:
        raise ValueError("step must be positive")
    r, th = (start.r, start.theta) if isinstance(start, PolarPoint) else map(float, start)
    if r <= 0:
        raise SingularPointError("flow cannot start at the origin")
    h = step * (1 if direction >= 0 else -1)
    ts, rs, ths = [0.0], [r], [th]
    reason = "max_steps"
    for n in range(1, max_steps + 1):
        try:
            k1 = grad_caustic(r, th)
            k2 = grad_caustic(r + 0.5 * h * k1[0], th + 0.5 * h * k1[1])
            k3 = grad_caustic(r + 0.5 * h * k2[0], th + 0.5 * h * k2[1])
            k4 = grad_caustic(r + h * k3[0], th + h * k3[1])
        except SingularPointError:
            reason = "origin"
            break
        r += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        th += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if r <= 0:
            reason = "origin"
            break
        ts.append(n * step)
        rs.append(r)
        ths.append(th)
        if r < r_min:
            reason = "r_min"
            break
        if r > r_max:
            reason = "r_max"
            break
    return FlowPath(np.array(ts), np.array(rs), np.array(ths), step, "rk4", reason)


def _reaches_origin(theta: float, r0: float, step: float) -> bool:
    path = integrate_flow(PolarPoint(r0, theta), step, max_steps=int(10 * math.sqrt(r0) / step) + 10, direction=-1)
    return path.stop_reason in ("origin", "r_min") and abs(path.theta[-1] - theta) < 1e-6


def find_separatrices(r0: float = 1e-3, n_grid: int = 720, tol: float = 1e-6, step: float = 1e-4) -> list[float]:
    """Directions in ``[0, 2 pi)`` of flow lines leaving the branch point.

    Roots of ``dtheta/dt`` are located on the double cover, refined with
    Brent's method, kept when ``dr/dt > 0`` and confirmed by integrating
    backwards into the origin.
    """
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    width = 4 * math.pi
    dx = width / n_grid
    if dx >= 1.0:
        raise ValueError("grid too coarse")
    grid = -dx / 2 + dx * np.arange(n_grid + 1)

    def g(th):
        return grad_caustic(r0, th)[1]

    found = []
    vals = [g(t) for t in grid]
    for a, b, fa, fb in zip(grid, grid[1:], vals, vals[1:]):
        if fa == 0:
            root = a
        elif fa * fb < 0:
            root = brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        else:
            continue
        if grad_caustic(r0, root)[0] <= 0:
            continue
        if not _reaches_origin(root, r0, step):
            continue
        angle = root % (2 * math.pi)
        if abs(angle - 2 * math.pi) < tol:
            angle = 0.0
        if all(abs(angle - x) > tol for x in found):
            found.append(angle)
    return sorted(found)


def separatrix_report(angles: list[float], expected=(0.0, 2 * math.pi / 3, 4 * math.pi / 3), tol: float = 1e-6) -> dict:
    errs = [min(abs(a - e), 2 * math.pi - abs(a - e)) for a, e in zip(sorted(angles), expected)]
    return {
        "angles": angles,
        "count": len(angles),
        "expected": list(expected),
        "max_error": max(errs) if errs and len(angles) == len(expected) else None,
        "ok": len(angles) == len(expected) and max(errs) <= tol,
        "first_integral": "r^(3/2) sin(3 theta/2)",
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
