"""Null space constant laboratory for l_p minimization."""
from ._accel import backend
from .errors import *  # noqa: F401,F403
from .linalg import SensingMatrix, null_space_basis, rank, weighted_min_norm_solve
from .nsc import (Certificate, NscConfig, NscEstimate, NscQuery, Prepared, Status, nsc_estimate, theta,
                  top_k_support)
from .spark import SparkResult, compute_spark

__version__ = "0.1.0"
