"""Spark(A): the smallest number of linearly dependent columns."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from .errors import TooLarge
from .linalg import as_array, default_rank_tol, rank

MAX_COLS = 24


@dataclass(frozen=True)
class SparkResult:
    spark: int
    witness: Optional[tuple]  # 0-based column indices, None when no dependent subset exists
    full_column_rank: bool = False

    @property
    def L(self) -> int:
        return self.spark - 1


def compute_spark(A, rank_tol: Optional[float] = None, max_cols: int = MAX_COLS) -> SparkResult:
    """Exhaustive search over column subsets of increasing size.

    Subsets of each size are visited in lexicographic order and the first
    dependent one is returned as the witness. A matrix with independent
    columns gets ``spark = N + 1`` and ``full_column_rank=True``.
    """
    arr = as_array(A)
    M, N = arr.shape
    if N > max_cols:
        raise TooLarge(f"N={N} exceeds max_cols={max_cols}")
    if rank_tol is None:
        rank_tol = default_rank_tol(arr.shape)
    # a zero column is dependent on its own; rank() of a zero matrix is 0
    for s in range(1, min(M + 1, N) + 1):
        for cols in combinations(range(N), s):
            if rank(arr[:, cols], rank_tol) < s:
                return SparkResult(s, cols)
    return SparkResult(N + 1, None, full_column_rank=True)


def dependence_vector(A, cols) -> np.ndarray:
    """Unit null vector of A supported on ``cols`` (a minimal dependent set)."""
    arr = as_array(A)
    sub = arr[:, list(cols)]
    _, _, vt = np.linalg.svd(sub)
    coef = vt[-1]
    z = np.zeros(arr.shape[1])
    z[list(cols)] = coef
    return z / np.linalg.norm(z)
