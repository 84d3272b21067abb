"""Small dense two-phase simplex (Bland's rule).

Solves ``max c @ x  s.t.  A_ub @ x <= b_ub,  A_eq @ x == b_eq,  x >= 0``
for problems with a handful of variables and a few dozen constraints.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

TOL = 1e-10


@dataclass
class LPResult:
    status: str
    x: Optional[np.ndarray] = None
    value: float = float("nan")
    pivots: int = 0


def _pivot(T, r, c):
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T, basis, ncols, max_pivots):
    """Maximize the objective held in the last row of ``T`` (stored as -c).

    Only the first ``ncols`` columns may enter. Returns (status, pivots).
    """
    m = T.shape[0] - 1
    pivots = 0
    while pivots < max_pivots:
        obj = T[-1, :ncols]
        enter = np.flatnonzero(obj < -TOL)
        if enter.size == 0:
            return OPTIMAL, pivots
        c = int(enter[0])
        colv = T[:m, c]
        pos = colv > TOL
        if not pos.any():
            return UNBOUNDED, pivots
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / colv[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + TOL * max(1.0, abs(best)))
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, r, c)
        basis[r] = c
        pivots += 1
    raise RuntimeError("simplex pivot limit reached")


def linprog_max(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_pivots=10000) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # columns: x (n) | slacks (m_ub) | artificials (m) | rhs
    nx = n + m_ub
    A = np.zeros((m, nx))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:nx] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1.0
    b = np.abs(b)

    T = np.zeros((m + 1, nx + m + 1))
    T[:m, :nx] = A
    T[:m, nx:nx + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(nx, nx + m))

    # phase 1: maximize -sum(artificials)
    T[-1, nx:nx + m] = 1.0
    T[-1] -= T[:m].sum(axis=0)
    _, piv1 = _run(T, basis, nx + m, max_pivots)
    if T[-1, -1] < -1e-9 * max(1.0, np.abs(b).max(initial=0.0)):
        return LPResult(INFEASIBLE, pivots=piv1)

    # drive artificials out of the basis where possible
    for r, bv in enumerate(basis):
        if bv >= nx:
            cand = np.flatnonzero(np.abs(T[r, :nx]) > TOL)
            if cand.size:
                _pivot(T, r, int(cand[0]))
                basis[r] = int(cand[0])
    keep = [r for r, bv in enumerate(basis) if bv < nx]
    T = np.vstack([T[keep], T[-1:]])
    T = np.hstack([T[:, :nx], T[:, -1:]])
    basis = [basis[r] for r in keep]

    # phase 2
    T[-1] = 0.0
    T[-1, :n] = -c
    for r, bv in enumerate(basis):
        if T[-1, bv] != 0.0:
            T[-1] -= T[-1, bv] * T[r]
    status, piv2 = _run(T, basis, nx, max_pivots)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, pivots=piv1 + piv2)
    x = np.zeros(nx)
    for r, bv in enumerate(basis):
        x[bv] = T[r, -1]
    return LPResult(OPTIMAL, x[:n], float(c @ x[:n]), piv1 + piv2)
