"""l_p recovery experiments: exhaustive l_0 search, IRLS for l_p, failure witnesses.

IRLS weight convention: each inner step minimizes sum_i w_i x_i^2 subject
to A x = y with w_i = (x_i^2 + eps^2)^(p/2 - 1) evaluated at the previous
iterate, i.e. the inverse weights (x_i^2 + eps^2)^(1 - p/2) scale the
minimum-norm solve. For fixed eps this is a majorize-minimize step on
sum_i (x_i^2 + eps^2)^(p/2), so that smoothed objective never increases.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .errors import MaxIterations, NoSolutionWithinKmax, NotAWitness, TooLarge
from .linalg import as_array, null_space_basis, rank, weighted_min_norm_solve
from .matgen import gen_sparse_vector, stream
from .nsc import ZERO_TOL, Certificate, theta


def lp_objective(x, p: float, zero_tol: float = ZERO_TOL) -> float:
    """||x||_p^p, counting entries above ``zero_tol * max|x|`` when p = 0."""
    a = np.abs(np.asarray(x, dtype=float))
    if p == 0.0:
        return float(np.count_nonzero(a > zero_tol * a.max())) if a.size and a.max() > 0 else 0.0
    return float(np.sum(a ** p))


@dataclass(frozen=True)
class RecoveryInstance:
    A: np.ndarray
    x_true: np.ndarray
    y: np.ndarray

    @classmethod
    def from_signal(cls, A, x_true) -> "RecoveryInstance":
        arr = as_array(A)
        x = np.asarray(x_true, dtype=float)
        return cls(arr, x, arr @ x)

    @property
    def sparsity(self) -> int:
        return int(np.count_nonzero(np.abs(self.x_true) > ZERO_TOL * max(np.abs(self.x_true).max(initial=0), 1e-300)))


@dataclass
class L0Result:
    solutions: list
    unique: bool
    sparsity: int


def solve_l0_exhaustive(A, y, k_max: Optional[int] = None, feas_tol: float = 1e-8, max_n: int = 20,
                        cap: int = 64) -> L0Result:
    """All sparsest solutions of A x = y with at most ``k_max`` nonzeros.

    Supports are scanned by increasing size; each is fitted by least squares
    and accepted when the residual is within ``feas_tol * (1 + ||y||)``.
    """
    arr = as_array(A)
    y = np.asarray(y, dtype=float).reshape(-1)
    M, N = arr.shape
    if N > max_n:
        raise TooLarge(f"N={N} exceeds max_n={max_n}")
    k_max = M if k_max is None else k_max
    if k_max > M:
        raise ValueError("k_max must not exceed M")
    tol = feas_tol * (1.0 + np.linalg.norm(y))
    if np.linalg.norm(y) <= tol:
        return L0Result([np.zeros(N)], True, 0)
    for s in range(1, k_max + 1):
        found, unique = [], True
        for S in combinations(range(N), s):
            sub = arr[:, S]
            coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
            if np.linalg.norm(sub @ coef - y) > tol:
                continue
            if rank(sub) < s:
                unique = False  # a whole affine family of solutions on this support
            x = np.zeros(N)
            x[list(S)] = coef
            if not any(np.max(np.abs(x - u)) <= 1e-9 * (1 + np.max(np.abs(u))) for u in found):
                found.append(x)
            if len(found) >= cap:
                break
        if found:
            return L0Result(found, unique and len(found) == 1, s)
    raise NoSolutionWithinKmax(f"no solution with at most {k_max} nonzeros")


@dataclass(frozen=True)
class IrlsConfig:
    eps0: float = 1.0
    eps_factor: float = 10.0
    eps_floor: float = 1e-9
    rel_tol: float = 1e-6
    max_iter: int = 500
    feas_tol: float = 1e-8
    recover_tol: float = 1e-5
    restarts: int = 8
    seed: int = 0
    polish: bool = True


@dataclass
class SolverResult:
    x_hat: np.ndarray
    objective: float
    residual: float
    iterations: int
    converged: bool
    success: Optional[bool] = None
    history: list = field(default_factory=list)  # (eps, smoothed objective, residual) per iterate


def _irls_run(A, y, p, x, cfg: IrlsConfig):
    eps = cfg.eps0
    history = []
    iters = 0
    stage_iters = 0
    prev = np.sum((x * x + eps * eps) ** (0.5 * p))
    while True:
        x = weighted_min_norm_solve(A, y, (x * x + eps * eps) ** (0.5 * p - 1.0))
        iters += 1
        stage_iters += 1
        obj = np.sum((x * x + eps * eps) ** (0.5 * p))
        history.append((eps, float(obj), float(np.linalg.norm(A @ x - y))))
        if abs(prev - obj) <= cfg.rel_tol * max(abs(obj), 1e-300):
            if eps <= cfg.eps_floor:
                return x, iters, True, history
            eps = max(eps / cfg.eps_factor, cfg.eps_floor)
            stage_iters = 0
            obj = np.sum((x * x + eps * eps) ** (0.5 * p))
        elif stage_iters >= cfg.max_iter:
            return x, iters, False, history
        prev = obj


def _polish(A, y, x, p, tol):
    """Least-squares refit on the numerical support; kept only if feasible and no worse."""
    a = np.abs(x)
    if a.max(initial=0.0) == 0.0:
        return x
    S = np.flatnonzero(a > 1e-6 * a.max())
    M = A.shape[0]
    if S.size > M or rank(A[:, S]) < S.size:
        return x
    coef, *_ = np.linalg.lstsq(A[:, S], y, rcond=None)
    xp = np.zeros_like(x)
    xp[S] = coef
    if np.linalg.norm(A @ xp - y) <= tol and lp_objective(xp, p) <= lp_objective(x, p) + 1e-12:
        return xp
    return x


def irls_lp(A, y, p: float, config: IrlsConfig = IrlsConfig(), x_true=None) -> SolverResult:
    """Heuristic minimizer of ||x||_p^p subject to A x = y, 0 < p <= 1.

    p = 1 is convex and uses a single start; for p < 1 the minimum-norm start
    is followed by ``restarts - 1`` starts perturbed within the solution set
    and the lowest objective wins. Raises MaxIterations only when every start
    stalls; the best stalled iterate is then still returned via the
    exception's ``result`` attribute.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError("irls_lp needs 0 < p <= 1")
    arr = as_array(A)
    y = np.asarray(y, dtype=float).reshape(-1)
    M, N = arr.shape
    tol = config.feas_tol * (1.0 + np.linalg.norm(y))
    x0 = weighted_min_norm_solve(arr, y, np.ones(N))
    starts = [x0]
    if p < 1.0 and config.restarts > 1:
        B = null_space_basis(arr).basis
        scale = max(np.abs(x0).max(), 1e-3)
        for r in range(1, config.restarts):
            if B.shape[1] == 0:
                break
            c = stream(config.seed, "irls", r).standard_normal(B.shape[1])
            starts.append(x0 + scale * (B @ c))
    best = None
    for x in starts:
        xr, iters, conv, hist = _irls_run(arr, y, p, x, config)
        if config.polish:
            xr = _polish(arr, y, xr, p, tol)
        res = SolverResult(xr, lp_objective(xr, p), float(np.linalg.norm(arr @ xr - y)), iters, conv,
                           history=hist)
        if best is None or (res.converged, -res.objective) > (best.converged, -best.objective):
            best = res
    if x_true is not None:
        best.success = bool(np.max(np.abs(best.x_hat - np.asarray(x_true, dtype=float))) <= config.recover_tol)
    if not best.converged:
        err = MaxIterations(f"IRLS did not converge within {config.max_iter} iterations per stage")
        err.result = best
        raise err
    return best


@dataclass(frozen=True)
class Witness:
    instance: RecoveryInstance
    x_alt: np.ndarray
    objective_true: float
    objective_alt: float
    theta_value: float


def failure_witness(A, cert: Certificate, p: float, zero_tol: float = ZERO_TOL) -> Witness:
    """Turn a certificate with theta >= 1 into two feasible points.

    x* = z on S (zero elsewhere) is #S-sparse; x' = x* - z = -z off S has
    the same measurements and ||x'||_p^p <= ||x*||_p^p, strictly when
    theta > 1, so x* is not the unique l_p minimizer.
    """
    arr = as_array(A)
    z = np.asarray(cert.z, dtype=float)
    if np.linalg.norm(arr @ z) > 1e-8 * max(1.0, np.linalg.norm(arr)) * np.linalg.norm(z):
        raise ValueError("certificate vector is not in the null space of A")
    th = theta(p, z, cert.S, zero_tol)
    if th < 1.0:
        raise NotAWitness(f"theta={th} < 1 cannot witness a recovery failure")
    mask = np.zeros(z.size, dtype=bool)
    mask[list(cert.S)] = True
    x_true = np.where(mask, z, 0.0)
    x_alt = np.where(mask, 0.0, -z)
    inst = RecoveryInstance(arr, x_true, arr @ x_true)
    return Witness(inst, x_alt, lp_objective(x_true, p, zero_tol), lp_objective(x_alt, p, zero_tol), th)


@dataclass
class ExperimentReport:
    k: int
    p: float
    trials: list
    seed: int

    @property
    def rate(self) -> float:
        return float(np.mean([t["success"] for t in self.trials])) if self.trials else float("nan")


def _signal(N, S, seed, index):
    rng = stream(seed, "signal", index)
    mag = 0.1 + np.abs(rng.standard_normal(len(S)))
    x = np.zeros(N)
    x[list(S)] = rng.choice([-1.0, 1.0], size=len(S)) * mag
    return x


def recovery_experiment(A, k: int, p: float, trials: int = 10, seed: int = 0,
                        config: IrlsConfig = IrlsConfig(), supports: Optional[Sequence] = None,
                        draws: int = 3) -> ExperimentReport:
    """Success rate of l_p recovery on random k-sparse signals.

    With ``supports="all"`` every size-k support gets ``draws`` signals;
    an explicit list of supports does the same for just those supports;
    otherwise ``trials`` supports are drawn uniformly. p = 0 uses the
    exhaustive l_0 search and counts a trial as recovered only when the
    sparsest solution is unique and equals the signal.
    """
    arr = as_array(A)
    M, N = arr.shape
    if supports is None:
        if trials < 1:
            raise ValueError("trials must be at least 1")
        signals = [gen_sparse_vector(N, k, seed, index=t) for t in range(trials)]
    else:
        sup = list(combinations(range(N), k)) if supports == "all" else [tuple(s) for s in supports]
        if not sup or draws < 1:
            raise ValueError("need at least one support and one draw")
        signals = [_signal(N, S, seed, i * draws + j) for i, S in enumerate(sup) for j in range(draws)]
    out = []
    for t, x in enumerate(signals):
        y = arr @ x
        rec = {"trial": t, "support": [int(i) for i in np.flatnonzero(x)]}
        if p == 0.0:
            res = solve_l0_exhaustive(arr, y, k_max=min(M, max(k, 1)))
            err = min(np.max(np.abs(s - x)) for s in res.solutions)
            rec.update(success=bool(res.unique and err <= config.recover_tol), error=float(err), converged=True)
        else:
            try:
                res = irls_lp(arr, y, p, config, x_true=x)
            except MaxIterations as exc:
                res = exc.result
                res.success = bool(np.max(np.abs(res.x_hat - x)) <= config.recover_tol)
            rec.update(success=bool(res.success), error=float(np.max(np.abs(res.x_hat - x))),
                       converged=res.converged)
        out.append(rec)
    return ExperimentReport(k, p, out, seed)
