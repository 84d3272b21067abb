"""Null space constant gamma(l_p, A, k).

gamma is the max over supports S with #S <= k of the sup over unit null
vectors z of

    theta(p, z, S) = sum_{i in S} |z_i|^p / sum_{i not in S} |z_i|^p.

Exact values come from closed forms (p = 0, one-dimensional null space), a
vertex LP enumeration (p = 1) or a dense angular search (two-dimensional
null space). Everything else is a multistart ascent whose result is a
certified lower bound: every reported value is attained by the returned
certificate.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import combinations
from typing import Optional

import numpy as np

from . import _kernels
from .errors import NumericalInconsistency, TooLarge, WrongDimension, ZeroVector
from .linalg import NullSpaceBasis, as_array, default_rank_tol, null_space_basis
from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, linprog_max
from .matgen import stream
from .spark import SparkResult, compute_spark, dependence_vector

ZERO_TOL = 1e-9
EPS_SCHEDULE = tuple(10.0 ** -i for i in range(10))  # 1, 1e-1, ..., 1e-9
P_FLOOR = 0.05  # ascent exponent used when p == 0 (the p=0 ratio is piecewise constant)


class Status(str, Enum):
    EXACT = "Exact"
    LOWER_BOUND = "LowerBound"
    INFINITE = "Infinite"


@dataclass(frozen=True)
class NscQuery:
    p: float
    k: int
    zero_tol: float = ZERO_TOL

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if self.zero_tol < 0:
            raise ValueError("zero_tol must be nonnegative")


@dataclass(frozen=True)
class Certificate:
    z: np.ndarray
    S: tuple  # sorted 0-based indices
    theta_value: float

    def as_dict(self):
        return {"z": [float(v) for v in self.z], "S": [int(i) for i in self.S], "theta": self.theta_value}


@dataclass(frozen=True)
class NscEstimate:
    query: NscQuery
    value: float
    status: Status
    certificate: Optional[Certificate]
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def finite(self) -> bool:
        return self.status is not Status.INFINITE


@dataclass(frozen=True)
class NscConfig:
    restarts: int = 64
    grid_points: int = 720
    eps_schedule: tuple = EPS_SCHEDULE
    max_iter: int = 500
    seed: int = 0
    exhaustive_supports: bool = False
    force: Optional[str] = None  # None | "multistart" | "grid" | "l1enum"
    l1_max_n: int = 12
    l1_max_d: int = 4
    rank_tol: Optional[float] = None

    def __post_init__(self):
        if self.restarts < 1 or self.grid_points < 4 or self.max_iter < 1:
            raise ValueError("restarts, grid_points and max_iter must be positive")
        if self.force not in (None, "multistart", "grid", "l1enum"):
            raise ValueError(f"unknown forced method {self.force!r}")


# -- theta and supports ------------------------------------------------------

def _powers(z: np.ndarray, p: float, zero_tol: float) -> np.ndarray:
    a = np.abs(z)
    if p == 0.0:
        return (a > zero_tol * a.max()).astype(float)
    return a ** p


def theta(p: float, z, S, zero_tol: float = ZERO_TOL) -> float:
    """Ratio of the l_p mass on ``S`` to the mass off ``S``.

    At p = 0 an entry counts when it exceeds ``zero_tol * max|z|``.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size == 0 or not np.any(z != 0.0):
        raise ZeroVector("theta is undefined for the zero vector")
    a = _powers(z, p, zero_tol)
    mask = np.zeros(z.size, dtype=bool)
    mask[list(S)] = True
    num = float(a[mask].sum())
    den = float(a[~mask].sum())
    if den == 0.0:
        return math.inf if num > 0 else 0.0
    return num / den


def top_k_support(z, k: int) -> tuple:
    """Indices of the k largest |z_i|, ties broken toward the smaller index."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if not 1 <= k <= z.size:
        raise ValueError(f"k={k} out of range for a vector of length {z.size}")
    order = np.argsort(-np.abs(z), kind="stable")
    return tuple(sorted(int(i) for i in order[:k]))


def _certify(z, k, p, zero_tol) -> Certificate:
    z = np.asarray(z, dtype=float)
    z = z / np.linalg.norm(z)
    S = top_k_support(z, k)
    return Certificate(z, S, theta(p, z, S, zero_tol))


# -- exact paths -------------------------------------------------------------

def _infinite(query, method, **diag) -> NscEstimate:
    return NscEstimate(query, math.inf, Status.INFINITE, None, method, dict(diag))


def nsc_l0(A, spark: SparkResult, k: int, zero_tol: float = ZERO_TOL) -> NscEstimate:
    """gamma(l_0, A, k) = k / (L + 1 - k) for k <= L, infinite beyond."""
    query = NscQuery(0.0, k, zero_tol)
    L = spark.L
    if k > L:
        return _infinite(query, "l0_closed_form", spark=spark.spark)
    if spark.witness is None:
        return _trivial(query)
    z = dependence_vector(A, spark.witness)
    mask = np.zeros(z.size, dtype=bool)
    mask[list(spark.witness)] = True
    z[~mask] = 0.0
    cert = _certify(z, k, 0.0, zero_tol)
    value = k / (L + 1 - k)
    if abs(cert.theta_value - value) > 1e-12:
        raise NumericalInconsistency(
            f"spark witness gives theta={cert.theta_value}, closed form {value}")
    return NscEstimate(query, value, Status.EXACT, cert, "l0_closed_form", {"spark": spark.spark})


def _trivial(query) -> NscEstimate:
    # ker(A) = {0}: the defining inequality holds for every gamma >= 0
    return NscEstimate(query, 0.0, Status.EXACT, None, "trivial_null_space")


def nsc_exact_d1(basis: NullSpaceBasis, p: float, k: int, zero_tol: float = ZERO_TOL) -> NscEstimate:
    """Closed form for a one-dimensional null space: sort the single null vector."""
    if basis.dim != 1:
        raise WrongDimension(f"nsc_exact_d1 needs a 1-dimensional null space, got d={basis.dim}")
    query = NscQuery(p, k, zero_tol)
    z = basis.basis[:, 0]
    cert = _certify(z, k, p, zero_tol)
    if math.isinf(cert.theta_value):
        return _infinite(query, "d1_closed_form")
    return NscEstimate(query, cert.theta_value, Status.EXACT, cert, "d1_closed_form")


def _feasible_orthants(B: np.ndarray):
    """Sign patterns of the full-dimensional cells cut by the hyperplanes B_i w = 0.

    Every null vector lies in the closure of such a cell, so the closed
    orthants of these patterns cover ker(A). A prefix of signs survives when
    ``sigma_i (B w)_i >= 1`` is feasible on the assigned rows, which is
    monotone under extension. The first nonzero row is fixed to +1 (theta
    is even in z); rows of B that vanish carry no constraint.
    """
    N, d = B.shape
    live = np.linalg.norm(B, axis=1) > 1e-14 * max(1.0, np.abs(B).max(initial=0.0))
    out = []

    def feasible(signs):
        rows = [i for i in range(len(signs)) if live[i]]
        if not rows:
            return True
        Bs = np.asarray(signs)[rows, None] * B[rows]
        # w = u - v with u, v >= 0
        res = linprog_max(np.zeros(2 * d), -np.hstack([Bs, -Bs]), -np.ones(len(rows)))
        return res.status == OPTIMAL

    def dfs(signs, fixed):
        i = len(signs)
        if i == N:
            out.append(np.array(signs, dtype=float))
            return
        if not live[i]:
            dfs(signs + [1.0], fixed)
            return
        for s in ((1.0,) if not fixed else (1.0, -1.0)):
            nxt = signs + [s]
            if feasible(nxt):
                dfs(nxt, True)

    dfs([], False)
    return out


def nsc_exact_l1_enum(basis: NullSpaceBasis, k: int, max_n: int = 12, max_d: int = 4,
                      zero_tol: float = ZERO_TOL) -> NscEstimate:
    """Exact gamma(l_1, A, k) by linear programming over orthants and supports.

    Inside the closed orthant with signs sigma, |z_i| = sigma_i z_i is linear
    in w, so for each support S the problem
    ``max sum_S sigma_i (Bw)_i  s.t.  sum_{not S} sigma_i (Bw)_i = 1,
    sigma_i (Bw)_i >= 0`` is an LP whose optimum is the largest theta in
    that orthant.
    """
    B = basis.basis
    N, d = B.shape
    query = NscQuery(1.0, k, zero_tol)
    if N > max_n or d > max_d:
        raise TooLarge(f"l1 enumeration limited to N<={max_n}, d<={max_d}; got N={N}, d={d}")
    if d == 0:
        return _trivial(query)
    if k > N:
        raise ValueError("k exceeds N")
    best_val, best_w, best_S = -1.0, None, None
    orthants = _feasible_orthants(B)
    lps = 0
    for sigma in orthants:
        Bs = sigma[:, None] * B
        A_ub = -np.hstack([Bs, -Bs])
        for S in combinations(range(N), k):
            mask = np.zeros(N, dtype=bool)
            mask[list(S)] = True
            obj = Bs[mask].sum(axis=0)
            row = Bs[~mask].sum(axis=0)
            res = linprog_max(np.concatenate([obj, -obj]), A_ub, np.zeros(N),
                              np.concatenate([row, -row])[None, :], [1.0])
            lps += 1
            if res.status == INFEASIBLE:
                continue
            if res.status == UNBOUNDED:
                raise NumericalInconsistency(f"unbounded l1 ratio on support {S}; k is not below spark")
            if res.value > best_val:
                best_val, best_w, best_S = res.value, res.x[:d] - res.x[d:], S
    if best_w is None:
        raise NumericalInconsistency("no feasible orthant produced a finite ratio")
    z = B @ best_w
    z[np.abs(z) <= 1e-13 * np.abs(z).max()] = 0.0
    z = z / np.linalg.norm(z)
    val = theta(1.0, z, best_S, zero_tol)
    if abs(val - best_val) > 1e-7 * max(1.0, best_val):
        raise NumericalInconsistency(f"LP optimum {best_val} does not match its certificate {val}")
    cert = Certificate(z, tuple(best_S), val)
    return NscEstimate(query, val, Status.EXACT, cert, "l1_lp_enum",
                       {"orthants": len(orthants), "lps": lps})


# -- two-dimensional null space: angular search -------------------------------

_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def _circle_points(B, phi):
    return np.stack([np.cos(phi), np.sin(phi)], axis=1) @ B.T


def nsc_grid_d2(basis: NullSpaceBasis, p: float, k: int, grid_points: int = 720,
                zero_tol: float = ZERO_TOL, bracket_tol: float = 1e-8) -> NscEstimate:
    """Dense search over the half circle in coefficient space.

    theta is even in z, so angles in [0, pi) cover the unit null sphere. The
    candidates are the grid, the angles where some z_i vanishes (evaluated
    with that coordinate set exactly to zero, where the ratio has its cusps
    for p < 1), and golden-section refinements of every interior grid
    maximum. Exact is reported when every refinement bracket closes within
    ``bracket_tol`` in value.
    """
    B = basis.basis
    N, d = B.shape
    if d != 2:
        raise WrongDimension(f"angular search needs d=2, got d={d}")
    query = NscQuery(p, k, zero_tol)
    grid = np.pi * np.arange(grid_points) / grid_points
    nz_rows = np.flatnonzero(np.linalg.norm(B, axis=1) > 1e-14)
    kinks = np.mod(np.arctan2(B[nz_rows, 0], -B[nz_rows, 1]), np.pi)

    def f(phi):
        return _kernels.theta_topk_rows(_circle_points(B, phi), p, k, zero_tol)

    # cusp candidates: set the vanishing coordinate(s) exactly to zero
    Zk = _circle_points(B, kinks)
    Zk[np.abs(Zk) <= 1e-12 * np.abs(Zk).max(axis=1, keepdims=True)] = 0.0
    vk = _kernels.theta_topk_rows(Zk, p, k, zero_tol)

    phis = np.concatenate([grid, kinks])
    is_grid = np.concatenate([np.ones(grid.size, bool), np.zeros(kinks.size, bool)])
    order = np.argsort(phis, kind="stable")
    phis, is_grid = phis[order], is_grid[order]
    vals = np.concatenate([f(grid), vk])[order]

    n = phis.size
    prev, nxt = np.roll(np.arange(n), 1), np.roll(np.arange(n), -1)
    peak = is_grid & (vals >= vals[prev]) & (vals >= vals[nxt]) & np.isfinite(vals)
    lo = phis[prev[peak]].copy()
    hi = phis[nxt[peak]].copy()
    lo[lo > phis[peak]] -= np.pi  # wrap-around neighbours
    hi[hi < phis[peak]] += np.pi

    worst_gap = 0.0
    ref_phi, ref_val = np.zeros(0), np.zeros(0)
    if lo.size:
        a, b = lo, hi
        c = b - _GOLD * (b - a)
        e = a + _GOLD * (b - a)
        fc, fe = f(c), f(e)
        for _ in range(200):
            if np.all(b - a < 1e-12):
                break
            left = fc >= fe  # maximum lies in [a, e]
            a, b = np.where(left, a, c), np.where(left, e, b)
            c, e = np.where(left, b - _GOLD * (b - a), e), np.where(left, c, a + _GOLD * (b - a))
            fc, fe = np.where(left, 0.0, fe), np.where(left, fc, 0.0)
            fresh = f(np.where(left, c, e))
            fc = np.where(left, fresh, fc)
            fe = np.where(left, fe, fresh)
        ref_phi = 0.5 * (a + b)
        ref_val = f(ref_phi)
        gaps = np.abs(f(a) - f(b))
        worst_gap = float(gaps.max())

    cand_phi = np.concatenate([phis, ref_phi])
    cand_val = np.concatenate([vals, ref_val])
    j = int(np.argmax(cand_val))
    if j < n and not is_grid[j]:
        z = _circle_points(B, phis[j:j + 1])[0]
        z[np.abs(z) <= 1e-12 * np.abs(z).max()] = 0.0
    else:
        z = _circle_points(B, cand_phi[j:j + 1])[0]
    cert = _certify(z, k, p, zero_tol)
    status = Status.EXACT if worst_gap <= bracket_tol else Status.LOWER_BOUND
    if math.isinf(cert.theta_value):
        return _infinite(query, "grid_d2")
    return NscEstimate(query, cert.theta_value, status, cert, "grid_d2",
                       {"grid_points": grid_points, "refinements": int(lo.size), "bracket_gap": worst_gap})


# -- general path: multistart smoothed ascent ---------------------------------

def _polish(B, w, p, k, zero_tol):
    """Snap the smallest coordinates of z = B w to exact zeros.

    For p <= 1 the ratio has upward cusps where an off-support coordinate
    vanishes; smoothing leaves the iterate a hair away from them. Returns
    the best unit z seen among the snapped variants and the original.
    """
    N, d = B.shape
    z = B @ w
    best_z = z / np.linalg.norm(z)
    best = theta(p, best_z, top_k_support(best_z, k), zero_tol)
    order = np.argsort(np.abs(z), kind="stable")
    for m in range(1, d):
        I = order[:m]
        Bi = B[I]
        try:
            wp = w - Bi.T @ np.linalg.solve(Bi @ Bi.T, Bi @ w)
        except np.linalg.LinAlgError:
            break
        nw = np.linalg.norm(wp)
        if nw < 1e-8:
            break
        zp = B @ (wp / nw)
        zp[I] = 0.0
        if not np.any(zp):
            break
        zp /= np.linalg.norm(zp)
        v = theta(p, zp, top_k_support(zp, k), zero_tol)
        if v > best:
            best, best_z = v, zp
    return best, best_z


def _distinct_directions(W, tol=1e-9):
    """Rows of W up to sign, with near-duplicates (restarts that met the same maximum) dropped."""
    W = W * np.where(W[np.arange(len(W)), np.argmax(np.abs(W), axis=1)] < 0, -1.0, 1.0)[:, None]
    keep = []
    for w in W:
        if all(np.max(np.abs(w - u)) > tol for u in keep):
            keep.append(w)
    return keep


def nsc_multistart(basis: NullSpaceBasis, p: float, k: int, config: NscConfig = NscConfig(),
                   zero_tol: float = ZERO_TOL) -> NscEstimate:
    """Lower bound from multistart projected-gradient ascent.

    Restart ``r`` draws its start from the stream ``(seed, "restart", r)`` so
    results do not depend on how restarts are scheduled.
    """
    B = basis.basis
    N, d = B.shape
    query = NscQuery(p, k, zero_tol)
    if d == 0:
        return _trivial(query)
    t0 = time.perf_counter()
    W0 = np.stack([stream(config.seed, "restart", r).standard_normal(d) for r in range(config.restarts)])
    W0[np.linalg.norm(W0, axis=1) == 0.0, 0] = 1.0
    p_obj = max(p, P_FLOOR)
    supports = [None]
    if config.exhaustive_supports:
        supports = list(combinations(range(N), k))
    best_val, best_z, iters = -1.0, None, 0
    for S in supports:
        fixed = None
        if S is not None:
            fixed = np.zeros(N, dtype=bool)
            fixed[list(S)] = True
        W, it = _kernels.ascend(B, W0, p_obj, k, config.eps_schedule, config.max_iter, fixed)
        iters += it
        for w in _distinct_directions(W):
            v, z = _polish(B, w, p, k, zero_tol)
            if v > best_val:
                best_val, best_z = v, z
    cert = _certify(best_z, k, p, zero_tol)
    if math.isinf(cert.theta_value):
        return _infinite(query, "multistart")
    return NscEstimate(query, cert.theta_value, Status.LOWER_BOUND, cert, "multistart",
                       {"restarts": config.restarts, "iterations": iters, "supports": len(supports),
                        "seconds": time.perf_counter() - t0})


# -- dispatcher ----------------------------------------------------------------

@dataclass
class Prepared:
    """Matrix-level data shared by many queries on the same A."""

    A: np.ndarray
    spark: SparkResult
    basis: NullSpaceBasis

    @classmethod
    def from_matrix(cls, A, rank_tol: Optional[float] = None) -> "Prepared":
        arr = as_array(A)
        tol = default_rank_tol(arr.shape) if rank_tol is None else rank_tol
        return cls(arr, compute_spark(arr, tol), null_space_basis(arr, tol))


def nsc_estimate(A, query: NscQuery, config: NscConfig = NscConfig(),
                 prepared: Optional[Prepared] = None) -> NscEstimate:
    """Best available value of gamma(l_p, A, k) with an honest status label."""
    prep = prepared or Prepared.from_matrix(A, config.rank_tol)
    p, k, zt = query.p, query.k, query.zero_tol
    t0 = time.perf_counter()

    def done(est):
        diag = dict(est.diagnostics)
        diag.setdefault("seconds", time.perf_counter() - t0)
        return replace(est, query=query, diagnostics=diag)

    if k >= prep.spark.spark:
        return done(_infinite(query, "spark", spark=prep.spark.spark))
    d = prep.basis.dim
    if d == 0:
        return done(_trivial(query))
    force = config.force
    if force == "multistart":
        return done(nsc_multistart(prep.basis, p, k, config, zt))
    if force == "grid":
        return done(nsc_grid_d2(prep.basis, p, k, config.grid_points, zt))
    if force == "l1enum":
        if p != 1.0:
            raise ValueError("l1 enumeration only computes p = 1")
        return done(nsc_exact_l1_enum(prep.basis, k, config.l1_max_n, config.l1_max_d, zt))
    if p == 0.0:
        return done(nsc_l0(prep.A, prep.spark, k, zt))
    if d == 1:
        return done(nsc_exact_d1(prep.basis, p, k, zt))
    N = prep.A.shape[1]
    if p == 1.0 and N <= config.l1_max_n and d <= config.l1_max_d:
        return done(nsc_exact_l1_enum(prep.basis, k, config.l1_max_n, config.l1_max_d, zt))
    if d == 2:
        return done(nsc_grid_d2(prep.basis, p, k, config.grid_points, zt))
    return done(nsc_multistart(prep.basis, p, k, config, zt))
