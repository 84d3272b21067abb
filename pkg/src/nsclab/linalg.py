"""Dense linear algebra: rank, orthonormal null-space bases, weighted minimum-norm solves."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import InvalidMatrix, RankDeficient


@dataclass(frozen=True)
class SensingMatrix:
    """A real M x N matrix with optional provenance ``(generator, seed)``."""

    data: np.ndarray
    provenance: Optional[tuple] = None

    def __post_init__(self):
        arr = np.array(self.data, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidMatrix(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidMatrix("matrix has non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


@dataclass(frozen=True)
class NullSpaceBasis:
    parent_shape: tuple
    basis: np.ndarray = field(repr=False)
    rank: int = 0

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def as_array(A) -> np.ndarray:
    """Return ``A`` as a finite float 2-D array; raises InvalidMatrix otherwise."""
    if isinstance(A, SensingMatrix):
        return A.data
    arr = np.asarray(A, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidMatrix(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidMatrix("matrix has non-finite entries")
    return arr


def default_rank_tol(shape) -> float:
    return 1e-10 * max(shape)


def singular_values(A) -> np.ndarray:
    return np.linalg.svd(as_array(A), compute_uv=False)


def rank(A, rank_tol: Optional[float] = None) -> int:
    """Count singular values above ``rank_tol`` times the largest one."""
    arr = as_array(A)
    if rank_tol is None:
        rank_tol = default_rank_tol(arr.shape)
    s = np.linalg.svd(arr, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rank_tol * s[0]))


def condition_report(A) -> dict:
    """Singular-value diagnostics for borderline rank decisions."""
    s = singular_values(A)
    smax = float(s[0]) if s.size else 0.0
    smin = float(s[-1]) if s.size else 0.0
    return {
        "sigma_max": smax,
        "sigma_min": smin,
        "cond": smax / smin if smin > 0 else float("inf"),
    }


def _canonical_signs(Q: np.ndarray) -> np.ndarray:
    Q = Q.copy()
    for j in range(Q.shape[1]):
        col = Q[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            Q[:, j] = -col
    return Q


def null_space_basis(A, rank_tol: Optional[float] = None) -> NullSpaceBasis:
    """Orthonormal basis of ker(A) from a column-pivoted QR of A^T.

    Columns are re-orthonormalized and sign-normalized so that the first
    nonzero entry of each is positive.
    """
    arr = as_array(A)
    M, N = arr.shape
    r = rank(arr, rank_tol)
    Q, _, _ = sla.qr(arr.T, mode="full", pivoting=True)
    B = Q[:, r:]
    if B.shape[1]:
        B, _ = np.linalg.qr(B)
        B = _canonical_signs(B)
    else:
        B = np.zeros((N, 0))
    B.setflags(write=False)
    return NullSpaceBasis(parent_shape=(M, N), basis=B, rank=r)


def weighted_min_norm_solve(A, y, weights, rank_tol: Optional[float] = None) -> np.ndarray:
    """Minimize ``sum(weights * x**2)`` subject to ``A @ x == y``.

    With ``D = diag(weights)**-1/2`` the solution is ``D @ pinv(A @ D) @ y``,
    computed through a QR factorization of ``(A D)^T`` to stay well scaled when
    the weights span many orders of magnitude.
    """
    arr = as_array(A)
    y = np.asarray(y, dtype=float).reshape(-1)
    w = np.asarray(weights, dtype=float).reshape(-1)
    M, N = arr.shape
    if y.shape[0] != M or w.shape[0] != N:
        raise ValueError("dimension mismatch between A, y and weights")
    if not np.all(w > 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and strictly positive")
    if rank_tol is None:
        rank_tol = default_rank_tol(arr.shape)
    d = 1.0 / np.sqrt(w)
    AD = arr * d
    Q, R = np.linalg.qr(AD.T)  # AD^T = Q R, Q is N x M
    diag = np.abs(np.diag(R))
    if diag.size < M or diag.max(initial=0.0) == 0.0 or diag.min() <= rank_tol * diag.max():
        raise RankDeficient("A W^-1 A^T is singular within tolerance")
    u = Q @ sla.solve_triangular(R, y, trans="T")
    return d * u
