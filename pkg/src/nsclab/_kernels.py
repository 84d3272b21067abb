"""Hot numeric kernels with numba and pure-numpy implementations.

``theta_topk_rows`` scores many candidate null vectors at once and
``ascend`` runs the smoothed projected-gradient ascent for a batch of
restarts. Each has a loop-style ``_nb_*`` version compiled by numba and a
vectorized ``_np_*`` version; the public names dispatch on ``_accel``.
"""
import numpy as np

from ._accel import HAVE_NUMBA, njit

MIN_STEP = 1e-12
MIN_MOVE = 1e-12
STAGE_MOVE = 1e-3  # smoothing stages above the last stop once moves drop below STAGE_MOVE * eps


# -- theta over rows, S = top-k magnitudes ---------------------------------

def _np_theta_topk_rows(Z, p, k, zero_tol):
    A = np.abs(Z)
    if p == 0.0:
        thr = zero_tol * A.max(axis=1, keepdims=True)
        P = (A > thr).astype(float)
    else:
        P = A ** p
    P = -np.sort(-P, axis=1)
    num = P[:, :k].sum(axis=1)
    den = P[:, k:].sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return out


@njit
def _nb_theta_topk_rows(Z, p, k, zero_tol):
    n, N = Z.shape
    out = np.empty(n)
    P = np.empty(N)
    for r in range(n):
        amax = 0.0
        for i in range(N):
            a = abs(Z[r, i])
            if a > amax:
                amax = a
        for i in range(N):
            a = abs(Z[r, i])
            if p == 0.0:
                P[i] = 1.0 if a > zero_tol * amax else 0.0
            else:
                P[i] = a ** p
        total = 0.0
        for i in range(N):
            total += P[i]
        num = 0.0
        for _ in range(k):  # k passes of max selection; k is small
            j = 0
            for i in range(1, N):
                if P[i] > P[j]:
                    j = i
            num += P[j]
            P[j] = -1.0
        den = total - num
        if den > 0.0:
            out[r] = num / den
        elif num > 0.0:
            out[r] = np.inf
        else:
            out[r] = 0.0
    return out


def theta_topk_rows(Z, p, k, zero_tol=1e-9):
    """theta(p, z, top_k(z)) for every row z of ``Z``."""
    Z = np.ascontiguousarray(Z, dtype=float)
    if HAVE_NUMBA:
        return _nb_theta_topk_rows(Z, float(p), int(k), float(zero_tol))
    return _np_theta_topk_rows(Z, float(p), int(k), float(zero_tol))


# -- smoothed ascent on the unit sphere of coefficient space ----------------

@njit
def _nb_objective(B, w, p, k, eps, fixed, use_fixed, z, a, mask):
    N, d = B.shape
    for i in range(N):
        s = 0.0
        for j in range(d):
            s += B[i, j] * w[j]
        z[i] = s
        a[i] = (s * s + eps * eps) ** (0.5 * p)
    if use_fixed:
        for i in range(N):
            mask[i] = fixed[i]
    else:
        # top-k by |z|, ties to the smallest index
        order = np.argsort(-np.abs(z), kind="mergesort")
        for i in range(N):
            mask[i] = False
        for i in range(k):
            mask[order[i]] = True
    num = 0.0
    den = 0.0
    for i in range(N):
        if mask[i]:
            num += a[i]
        else:
            den += a[i]
    return np.log(num) - np.log(den), num, den


@njit
def _nb_ascend_one(B, w0, p, k, eps_schedule, max_iter, fixed, use_fixed):
    N, d = B.shape
    z = np.empty(N)
    a = np.empty(N)
    mask = np.zeros(N, dtype=np.bool_)
    zt = np.empty(N)
    at = np.empty(N)
    maskt = np.zeros(N, dtype=np.bool_)
    w = w0 / np.sqrt(np.sum(w0 * w0))
    gz = np.empty(N)
    g = np.empty(d)
    iters = 0
    for eps in eps_schedule:
        step = 0.5
        for _ in range(max_iter):
            f, num, den = _nb_objective(B, w, p, k, eps, fixed, use_fixed, z, a, mask)
            for i in range(N):
                c = p * z[i] * a[i] / (z[i] * z[i] + eps * eps)
                gz[i] = c / num if mask[i] else -c / den
            gw = 0.0
            for j in range(d):
                s = 0.0
                for i in range(N):
                    s += B[i, j] * gz[i]
                g[j] = s
                gw += s * w[j]
            gn = 0.0
            for j in range(d):
                g[j] -= gw * w[j]
                gn += g[j] * g[j]
            gn = np.sqrt(gn)
            iters += 1
            if gn < 1e-15:
                break
            t = step
            moved = -1.0
            while t >= MIN_STEP:
                wn = w + (t / gn) * g
                wn /= np.sqrt(np.sum(wn * wn))
                fn, _, _ = _nb_objective(B, wn, p, k, eps, fixed, use_fixed, zt, at, maskt)
                if fn > f:
                    moved = np.sqrt(np.sum((wn - w) ** 2))
                    w = wn
                    break
                t *= 0.5
            if moved < 0.0:
                break
            step = min(2.0 * t, 1.0)
            if moved < max(MIN_MOVE, STAGE_MOVE * eps):
                break
    return w, iters


@njit
def _nb_ascend(B, W0, p, k, eps_schedule, max_iter, fixed, use_fixed):
    R, d = W0.shape
    out = np.empty((R, d))
    iters = 0
    for r in range(R):
        w, it = _nb_ascend_one(B, W0[r].copy(), p, k, eps_schedule, max_iter, fixed, use_fixed)
        out[r] = w
        iters += it
    return out, iters


def _np_objective(B, W, p, k, eps, fixed):
    Z = W @ B.T
    Aa = (Z * Z + eps * eps) ** (0.5 * p)
    if fixed is not None:
        mask = np.broadcast_to(fixed, Z.shape)
    else:
        order = np.argsort(-np.abs(Z), axis=1, kind="stable")
        mask = np.zeros(Z.shape, dtype=bool)
        np.put_along_axis(mask, order[:, :k], True, axis=1)
    num = np.where(mask, Aa, 0.0).sum(axis=1)
    den = np.where(mask, 0.0, Aa).sum(axis=1)
    return np.log(num) - np.log(den), Z, Aa, mask, num, den


def _np_ascend(B, W0, p, k, eps_schedule, max_iter, fixed):
    W = W0 / np.linalg.norm(W0, axis=1, keepdims=True)
    R = W.shape[0]
    iters = 0
    for eps in eps_schedule:
        step = np.full(R, 0.5)
        active = np.ones(R, dtype=bool)
        for _ in range(max_iter):
            if not active.any():
                break
            idx = np.flatnonzero(active)
            Wa = W[idx]
            f, Z, Aa, mask, num, den = _np_objective(B, Wa, p, k, eps, fixed)
            c = p * Z * Aa / (Z * Z + eps * eps)
            gz = np.where(mask, c / num[:, None], -c / den[:, None])
            G = gz @ B
            G -= np.sum(G * Wa, axis=1, keepdims=True) * Wa
            gn = np.linalg.norm(G, axis=1)
            iters += idx.size
            live = gn >= 1e-15
            t = step[idx].copy()
            accepted = np.zeros(idx.size, dtype=bool)
            Wnew = Wa.copy()
            pending = live.copy()
            while pending.any():
                pi = np.flatnonzero(pending)
                cand = Wa[pi] + (t[pi] / gn[pi])[:, None] * G[pi]
                cand /= np.linalg.norm(cand, axis=1, keepdims=True)
                fn = _np_objective(B, cand, p, k, eps, fixed)[0]
                ok = fn > f[pi]
                Wnew[pi[ok]] = cand[ok]
                accepted[pi[ok]] = True
                pending[pi[ok]] = False
                t[pi[~ok]] *= 0.5
                pending &= t >= MIN_STEP
            moved = np.linalg.norm(Wnew - Wa, axis=1)
            W[idx] = Wnew
            step[idx] = np.minimum(2.0 * t, 1.0)
            done = ~accepted | (moved < max(MIN_MOVE, STAGE_MOVE * eps))
            active[idx[done]] = False
    return W, iters


def ascend(B, W0, p, k, eps_schedule, max_iter=500, fixed=None):
    """Maximize the smoothed log-ratio from every row of ``W0``.

    The objective at ``w`` is ``log sum_S (z_i^2+eps^2)^(p/2) - log sum_rest``
    with ``z = B w`` and ``S`` either ``fixed`` (boolean mask) or the top-k
    magnitudes of ``z``. Iterates stay on the unit sphere. Returns the final
    points (one row per restart) and the total iteration count.
    """
    B = np.ascontiguousarray(B, dtype=float)
    W0 = np.ascontiguousarray(np.atleast_2d(W0), dtype=float)
    eps_schedule = np.asarray(eps_schedule, dtype=float)
    if HAVE_NUMBA:
        use_fixed = fixed is not None
        fx = np.asarray(fixed, dtype=np.bool_) if use_fixed else np.zeros(B.shape[0], dtype=np.bool_)
        return _nb_ascend(B, W0, float(p), int(k), eps_schedule, int(max_iter), fx, use_fixed)
    fx = None if fixed is None else np.asarray(fixed, dtype=bool)
    return _np_ascend(B, W0, float(p), int(k), eps_schedule, int(max_iter), fx)
