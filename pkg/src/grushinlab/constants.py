"""
Remainder constants c_p, c_1(p), c_2(p), c_3(p) as infima/suprema over the plane.

All four share the numerator ((s+1)^2 + t^2)^{p/2} - 1 - p s and differ in the
denominator and in the admissible region.  The search is a log-polar scan
followed by compass pattern search from the best scan cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "Which",
    "ConstantQuery",
    "ConstantResult",
    "ratio_numerator",
    "ratio_cp",
    "ratio_c12",
    "ratio_c3_outer",
    "ratio_c3_inner",
    "stated_interval",
    "compute_constant",
    "pattern_search",
]


class Which(str, Enum):
    CP = "cp"
    C1 = "c1"
    C2 = "c2"
    C3 = "c3"


@dataclass(frozen=True)
class ConstantQuery:
    p: float
    which: Which
    search_radius: float = 1e3
    coarse_grid: int = 2001
    refine_tol: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "which", Which(self.which))
        object.__setattr__(self, "p", float(self.p))
        if self.which is Which.CP and not self.p >= 2:
            raise ValueError(f"c_p requires p >= 2, got p={self.p}")
        if self.which is not Which.CP and not 1 < self.p < 2:
            raise ValueError(f"{self.which.value} requires 1 < p < 2, got p={self.p}")
        if not self.search_radius > 1:
            raise ValueError("search_radius must exceed 1")
        if self.coarse_grid < 16:
            raise ValueError("coarse_grid must be >= 16")
        if not self.refine_tol > 0:
            raise ValueError("refine_tol must be positive")


@dataclass
class ConstantResult:
    p: float
    which: Which
    value: float
    argpoint: tuple[float, float]
    uncertainty: float
    bound_check: bool
    interval: tuple[float, float]
    flags: list[str] = field(default_factory=list)


def _binom_series(x, a, terms=40):
    # (1+x)^a - 1 - a x for |x| small, summed from the x^2 term
    out = np.zeros_like(x)
    coef = a * (a - 1) / 2.0
    xk = x * x
    for k in range(2, terms):
        out = out + coef * xk
        coef = coef * (a - k) / (k + 1)
        xk = xk * x
    return out


def ratio_numerator(s, t, p):
    """((s+1)^2 + t^2)^{p/2} - 1 - p s, free of cancellation near the origin."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    r2 = s * s + t * t
    x = 2.0 * s + r2
    a = p / 2.0
    small = np.abs(x) < 0.05
    direct = np.power(1.0 + np.where(small, 0.0, x), a) - 1.0 - a * np.where(small, 0.0, x)
    g = np.where(small, _binom_series(np.where(small, x, 0.0), a), direct)
    return g + a * r2


def _radius2(s, t):
    return np.asarray(s, dtype=float) ** 2 + np.asarray(t, dtype=float) ** 2


def _check_origin(s, t):
    if np.any(_radius2(s, t) == 0):
        raise ValueError("ratio undefined at (s, t) = (0, 0)")


def ratio_cp(s, t, p):
    _check_origin(s, t)
    return ratio_numerator(s, t, p) / _radius2(s, t) ** (p / 2)


def ratio_c12(s, t, p):
    _check_origin(s, t)
    q = np.sqrt((np.asarray(s, float) + 1.0) ** 2 + np.asarray(t, float) ** 2)
    return ratio_numerator(s, t, p) / ((q + 1.0) ** (p - 2) * _radius2(s, t))


def ratio_c3_outer(s, t, p):
    """Region s^2 + t^2 >= 1 (the seam belongs here); +inf elsewhere."""
    r2 = _radius2(s, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = ratio_numerator(s, t, p) / r2 ** (p / 2)
    return np.where(r2 >= 1.0, val, np.inf)


def ratio_c3_inner(s, t, p):
    """Region 0 < s^2 + t^2 < 1; +inf elsewhere."""
    r2 = _radius2(s, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = ratio_numerator(s, t, p) / r2
    return np.where((r2 > 0) & (r2 < 1.0), val, np.inf)


def stated_interval(which, p) -> tuple[float, float]:
    which = Which(which)
    if which is Which.CP:
        return (0.0, 1.0)
    if which is Which.C1:
        return (0.0, p * (p - 1) / (2 * p - 1))
    if which is Which.C2:
        return (p / 2 ** (p - 1), math.inf)
    return (0.0, p * (p - 1) / 2)


def _in_interval(which, value, interval):
    lo, hi = interval
    if which is Which.C2:
        return lo <= value < hi
    return lo < value <= hi


def pattern_search(func, x0, step, tol=1e-12, max_iter=20000):
    """Compass search minimising ``func`` over R^2; returns (x, f(x))."""
    x = np.array(x0, dtype=float)
    fx = float(func(x[0], x[1]))
    dirs = np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]], float)
    dirs[4:] /= math.sqrt(2)
    h = float(step)
    it = 0
    while h > tol * max(1.0, float(np.hypot(*x))) and it < max_iter:
        it += 1
        trial = x + h * dirs
        vals = np.asarray(func(trial[:, 0], trial[:, 1]), dtype=float)
        j = int(np.argmin(vals))
        if vals[j] < fx:
            x, fx = trial[j], float(vals[j])
            h *= 2.0
        else:
            h *= 0.5
    return x, fx


def _objective(q: ConstantQuery):
    """(func, sign): minimise sign * ratio; the region/denominator is baked into func."""
    p = q.p
    if q.which is Which.CP:
        return (lambda s, t: ratio_cp(s, t, p)), 1.0
    if q.which is Which.C1:
        return (lambda s, t: ratio_c12(s, t, p)), 1.0
    if q.which is Which.C2:
        return (lambda s, t: -ratio_c12(s, t, p)), -1.0
    raise AssertionError("c3 is handled per region")


def _scan_and_refine(func, radius, n, k_best=16, tol=1e-8):
    """Minimise ``func`` over the annulus 1e-6 <= r <= radius."""
    r = np.logspace(-6, math.log10(radius), n)
    ang = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    best = []
    # scan row-blocks of radii to keep memory bounded
    block = max(1, 2_000_000 // n)
    for start in range(0, n, block):
        rr = r[start:start + block, None]
        s = rr * np.cos(ang)[None, :]
        t = rr * np.sin(ang)[None, :]
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            vals = np.asarray(func(s, t), dtype=float)
        vals = np.where(np.isfinite(vals), vals, np.inf)
        flat = vals.ravel()
        kk = min(k_best, flat.size)
        idx = np.argpartition(flat, kk - 1)[:kk]
        for i in idx:
            if np.isfinite(flat[i]):
                ir, ia = divmod(int(i), n)
                best.append((float(flat[i]), start + ir, ia))
    best.sort()
    best = best[:k_best]
    if not best:
        return math.inf, (math.nan, math.nan)
    dlog = math.log(radius / 1e-6) / (n - 1)
    incumbent = (math.inf, (math.nan, math.nan))
    for val, ir, ia in best:
        rad = r[ir]
        x0 = (rad * math.cos(ang[ia]), rad * math.sin(ang[ia]))
        step = rad * max(dlog, 2 * math.pi / n)
        x, fx = pattern_search(func, x0, step, tol=tol * 1e-4)
        if fx < incumbent[0]:
            incumbent = (fx, (float(x[0]), float(x[1])))
    return incumbent


def _solve(q: ConstantQuery, n: int, radius: float):
    if q.which is Which.C3:
        p = q.p
        outer = _scan_and_refine(lambda s, t: ratio_c3_outer(s, t, p), radius, n,
                                 tol=q.refine_tol)
        inner = _scan_and_refine(lambda s, t: ratio_c3_inner(s, t, p), 1.0, n,
                                 tol=q.refine_tol)
        return min(outer, inner, key=lambda v: v[0])
    func, sign = _objective(q)
    val, arg = _scan_and_refine(func, radius, n, tol=q.refine_tol)
    return sign * val, arg


def compute_constant(q: ConstantQuery) -> ConstantResult:
    """Evaluate the requested constant.

    The reported uncertainty is the spread between a half-resolution scan and
    the full ``coarse_grid`` scan.  For the supremum c_2 the search radius is
    doubled until the incumbent moves by less than ``refine_tol``; three
    consecutive >10% jumps flag the result "possibly unbounded".
    """
    interval = stated_interval(q.which, q.p)
    flags: list[str] = []
    if q.which is Which.CP and q.p == 2:
        # the ratio is identically 1
        return ConstantResult(q.p, q.which, 1.0, (1.0, 0.0), 0.0,
                              _in_interval(q.which, 1.0, interval), interval, flags)
    n_half = max(16, q.coarse_grid // 2 + 1)
    value, arg = _solve(q, q.coarse_grid, q.search_radius)
    coarse_value, _ = _solve(q, n_half, q.search_radius)
    uncertainty = abs(value - coarse_value)
    if q.which is Which.C2:
        radius = q.search_radius
        jumps = 0
        for _ in range(30):
            radius *= 2.0
            new_value, new_arg = _solve(q, q.coarse_grid, radius)
            change = new_value - value
            if new_value > value:
                jumps = jumps + 1 if change > 0.1 * abs(value) else 0
                value, arg = new_value, new_arg
            if abs(change) < q.refine_tol:
                break
            if jumps >= 3:
                flags.append("possibly unbounded")
                break
    return ConstantResult(q.p, q.which, float(value), arg, float(uncertainty),
                          _in_interval(q.which, value, interval), interval, flags)
