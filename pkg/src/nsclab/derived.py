"""Recovery staircase k_p*(A), reconstruction exponent p_k*(A) and gamma-vs-p tables."""
from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import StatusDowngrade
from functools import partial

from .nsc import NscConfig, NscEstimate, NscQuery, Prepared, Status, nsc_estimate
from .parallel import pmap

MARGIN = 1e-6
TOL_P = 1e-3


def default_grid(points: int = 101) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


def _prep(A, prepared, config):
    return prepared or Prepared.from_matrix(A, config.rank_tol)


def _gamma(prep, p, k, config) -> NscEstimate:
    return nsc_estimate(prep.A, NscQuery(float(p), int(k)), config, prepared=prep)


@dataclass(frozen=True)
class KStar:
    k: int
    estimates: tuple  # every estimate consulted, in order of k

    @property
    def statuses(self) -> Counter:
        return Counter(e.status.value for e in self.estimates)

    def __int__(self):
        return self.k


def k_star_detail(A, p: float, margin: float = MARGIN, config: NscConfig = NscConfig(),
                  prepared: Optional[Prepared] = None) -> KStar:
    """Largest k with gamma(l_p, A, k) < 1 - margin, scanning k = 1, 2, ...

    Strict increase of gamma in k makes the first failure final.
    """
    prep = _prep(A, prepared, config)
    ests = []
    k = 0
    while True:
        est = _gamma(prep, p, k + 1, config)
        ests.append(est)
        if not est.finite or est.value >= 1.0 - margin:
            break
        k += 1
    return KStar(k, tuple(ests))


def k_star(A, p: float, margin: float = MARGIN, config: NscConfig = NscConfig(),
           prepared: Optional[Prepared] = None) -> int:
    return k_star_detail(A, p, margin, config, prepared).k


class ExponentKind(str, Enum):
    EMPTY = "Empty"
    INTERIOR = "Interior"
    FULL_RANGE = "FullRange"


@dataclass(frozen=True)
class ReconstructionExponent:
    k: int
    kind: ExponentKind
    bracket: Optional[tuple] = None  # (lo, hi): gamma < 1 at lo, not at hi
    statuses: Counter = field(default_factory=Counter)

    @property
    def certified(self) -> bool:
        return self.statuses.get(Status.LOWER_BOUND.value, 0) == 0


def p_star(A, k: int, tol_p: float = TOL_P, margin: float = MARGIN, config: NscConfig = NscConfig(),
           prepared: Optional[Prepared] = None) -> ReconstructionExponent:
    """Bracket the right end of the exponent range {p : gamma(l_p, A, k) < 1}.

    gamma is continuous and non-decreasing in p, so the range is an interval
    starting at 0 and bisection on the predicate ``gamma < 1 - margin``
    narrows its end to width ``tol_p``. When a lower-bound estimate was used
    a StatusDowngrade warning is issued: the bracket then only certifies
    that p* is at least ``lo`` from the estimator's side.
    """
    prep = _prep(A, prepared, config)
    if k > prep.spark.L:
        raise ValueError(f"k={k} exceeds L={prep.spark.L}; gamma is infinite")
    seen = Counter()

    def ok(p):
        est = _gamma(prep, p, k, config)
        seen[est.status.value] += 1
        return est.finite and est.value < 1.0 - margin

    if not ok(0.0):
        result = ReconstructionExponent(k, ExponentKind.EMPTY, None, seen)
    elif ok(1.0):
        result = ReconstructionExponent(k, ExponentKind.FULL_RANGE, None, seen)
    else:
        lo, hi = 0.0, 1.0
        while hi - lo > tol_p:
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
        result = ReconstructionExponent(k, ExponentKind.INTERIOR, (lo, hi), seen)
    if not result.certified:
        warnings.warn(f"p_star(k={k}) used lower-bound estimates", StatusDowngrade, stacklevel=2)
    return result


@dataclass(frozen=True)
class Jump:
    p_lo: float
    p_hi: float
    drop: int


@dataclass(frozen=True)
class StaircaseCurve:
    grid: np.ndarray
    values: np.ndarray
    jumps: tuple
    statuses: Counter

    def records(self):
        for p, v in zip(self.grid, self.values):
            yield {"p": float(p), "k_star": int(v)}


def _refine_jump(prep, lo, hi, k_lo, k_hi, margin, config, depth, seen):
    """Split a drop over (lo, hi] into unit drops by evaluating 9 interior points."""
    if k_lo - k_hi <= 1 or depth == 0:
        return [Jump(lo, hi, k_lo - k_hi)]
    pts = np.linspace(lo, hi, 11)
    vals = [k_lo]
    for p in pts[1:-1]:
        ks = k_star_detail(prep.A, p, margin, config, prep)
        seen.update(ks.statuses)
        vals.append(ks.k)
    vals.append(k_hi)
    out = []
    for a, b, va, vb in zip(pts[:-1], pts[1:], vals[:-1], vals[1:]):
        if vb != va:
            out.extend(_refine_jump(prep, a, b, va, vb, margin, config, depth - 1, seen))
    return out


def _kstar_task(p, prep, margin, config):
    return k_star_detail(prep.A, p, margin, config, prep)


def staircase(A, grid: Optional[Sequence[float]] = None, margin: float = MARGIN,
              config: NscConfig = NscConfig(), prepared: Optional[Prepared] = None,
              refine_depth: int = 3, jobs: int = 1) -> StaircaseCurve:
    """k_p*(A) at every grid point, each evaluated independently.

    Intervals where the value changes are reported as jumps; a change of
    more than one level inside a single grid cell is refined (x10 per level,
    up to ``refine_depth`` levels) into its unit steps.
    """
    prep = _prep(A, prepared, config)
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.size and (grid.min() < 0 or grid.max() > 1 or np.any(np.diff(grid) < 0)):
        raise ValueError("grid must be sorted within [0, 1]")
    seen = Counter()
    values = []
    for ks in pmap(partial(_kstar_task, prep=prep, margin=margin, config=config), grid, jobs):
        seen.update(ks.statuses)
        values.append(ks.k)
    values = np.array(values, dtype=int)
    jumps = []
    for j in range(len(grid) - 1):
        if values[j + 1] != values[j]:
            jumps.extend(_refine_jump(prep, grid[j], grid[j + 1], values[j], values[j + 1],
                                      margin, config, refine_depth, seen))
    return StaircaseCurve(grid, values, tuple(jumps), seen)


@dataclass(frozen=True)
class GammaTable:
    grid: np.ndarray
    ks: tuple
    values: np.ndarray  # shape (len(ks), len(grid))
    statuses: np.ndarray  # same shape, Status values as strings

    def records(self):
        for i, k in enumerate(self.ks):
            for j, p in enumerate(self.grid):
                yield {"p": float(p), "k": int(k), "gamma": float(self.values[i, j]),
                       "status": str(self.statuses[i, j])}

    def non_intersecting(self) -> bool:
        """Rows strictly ordered in k wherever both entries are exact."""
        for i in range(len(self.ks) - 1):
            both = (self.statuses[i] == Status.EXACT.value) & (self.statuses[i + 1] == Status.EXACT.value)
            if np.any(self.values[i + 1][both] <= self.values[i][both]):
                return False
        return True


def _gamma_task(pk, prep, config):
    est = _gamma(prep, pk[0], pk[1], config)
    return (est.value if est.finite else math.inf), est.status.value


def gamma_curves(A, grid: Optional[Sequence[float]] = None, ks: Optional[Sequence[int]] = None,
                 config: NscConfig = NscConfig(), prepared: Optional[Prepared] = None,
                 jobs: int = 1) -> GammaTable:
    prep = _prep(A, prepared, config)
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if ks is None:
        ks = range(1, prep.spark.L + 1)
    ks = tuple(int(k) for k in ks)
    if any(k > prep.spark.L for k in ks):
        raise ValueError(f"k range must stay within L={prep.spark.L}")
    tasks = [(float(p), k) for k in ks for p in grid]
    out = pmap(partial(_gamma_task, prep=prep, config=config), tasks, jobs)
    vals = np.array([v for v, _ in out], dtype=float).reshape(len(ks), grid.size)
    stats = np.array([s for _, s in out], dtype=object).reshape(len(ks), grid.size)
    return GammaTable(grid, ks, vals, stats)
