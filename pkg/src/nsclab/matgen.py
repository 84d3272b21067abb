"""Seeded matrix / sparse-vector generation and plain-text matrix IO.

Random streams come from numpy's counter-based Philox generator keyed by
``(seed, crc32(purpose tag), index)``, so any worker can reproduce any
substream without coordination.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, ParseError
from .linalg import SensingMatrix, as_array

DISTRIBUTIONS = ("gaussian", "uniform")
MIN_MAGNITUDE = 0.1


def stream(seed: int, tag: str = "", index: int = 0) -> np.random.Generator:
    """Independent reproducible generator for ``(seed, tag, index)``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(tag.encode()), int(index)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class GeneratorSpec:
    distribution: str
    rows: int
    cols: int
    seed: int = 0
    normalize_columns: bool = False

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.distribution!r}; expected one of {DISTRIBUTIONS}")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")

    @classmethod
    def parse(cls, text: str, seed: int = 0, normalize_columns: bool = False) -> "GeneratorSpec":
        """Parse ``DIST:MxN`` such as ``gaussian:4x8``."""
        try:
            dist, dims = text.split(":")
            m, n = dims.lower().split("x")
            return cls(dist.strip().lower(), int(m), int(n), seed, normalize_columns)
        except ValueError as exc:
            raise ValueError(f"bad generator spec {text!r}; expected DIST:MxN") from exc

    @property
    def label(self) -> str:
        tag = f"{self.distribution}:{self.rows}x{self.cols}"
        return tag + ("n" if self.normalize_columns else "") + f"@{self.seed}"


def gen_matrix(spec: GeneratorSpec) -> SensingMatrix:
    rng = stream(spec.seed, "matrix:" + spec.distribution, spec.rows * 100003 + spec.cols)
    shape = (spec.rows, spec.cols)
    if spec.distribution == "gaussian":
        A = rng.standard_normal(shape)
    else:
        A = rng.uniform(-1.0, 1.0, shape)
    if spec.normalize_columns:
        A = A / np.linalg.norm(A, axis=0)
    return SensingMatrix(A, provenance=(spec.distribution, spec.seed))


def gaussian(rows: int, cols: int, seed: int, normalize_columns: bool = False) -> SensingMatrix:
    return gen_matrix(GeneratorSpec("gaussian", rows, cols, seed, normalize_columns))


def gen_sparse_vector(n: int, k: int, seed: int, distribution: str = "gaussian", index: int = 0) -> np.ndarray:
    """Random k-sparse vector with uniformly random support.

    Nonzero magnitudes are kept at or above ``MIN_MAGNITUDE`` so the support
    is unambiguous under any reasonable zero threshold.
    """
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    rng = stream(seed, "sparse:" + distribution, index)
    support = rng.choice(n, size=k, replace=False)
    if distribution == "gaussian":
        mag = MIN_MAGNITUDE + np.abs(rng.standard_normal(k))
    elif distribution == "uniform":
        mag = rng.uniform(MIN_MAGNITUDE, 1.0, k)
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    signs = rng.choice([-1.0, 1.0], size=k)
    x = np.zeros(n)
    x[support] = signs * mag
    return x


def _rows(path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def _parse_float(tok: str, lineno: int, col: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"cannot parse {tok!r} as a number", lineno, col) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite entry {tok!r}", lineno, col)
    return v


def read_matrix(path) -> SensingMatrix:
    rows = []
    for lineno, line in _rows(path):
        if line.endswith(","):
            raise ParseError("trailing delimiter", lineno, len(line))
        rows.append([_parse_float(tok.strip(), lineno, c + 1) for c, tok in enumerate(line.split(","))])
        if len(rows[-1]) != len(rows[0]):
            raise DimensionMismatch(f"line {lineno}: expected {len(rows[0])} entries, got {len(rows[-1])}")
    if not rows:
        raise ParseError("no matrix rows found")
    return SensingMatrix(np.array(rows), provenance=("file", str(Path(path))))


def write_matrix(A, path, comment: str | None = None) -> None:
    arr = as_array(A)
    with open(path, "w") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_vector(path) -> np.ndarray:
    vals = []
    for lineno, line in _rows(path):
        vals.append(_parse_float(line, lineno, 1))
    return np.array(vals)


def write_vector(x, path) -> None:
    with open(path, "w") as fh:
        for v in np.asarray(x, dtype=float).reshape(-1):
            fh.write(repr(float(v)) + "\n")


def derive_seed(seed: int, tag: str, index: int) -> int:
    """Child seed for task ``index`` of a named experiment."""
    return int(stream(seed, "derive:" + tag, index).integers(0, 2**63 - 1))
