import json
import os
import subprocess
import sys

import numpy as np
import pytest

from nsclab import _kernels
from nsclab._accel import HAVE_NUMBA
from nsclab.linalg import null_space_basis
from nsclab.matgen import gaussian, stream
from nsclab.nsc import EPS_SCHEDULE, theta, top_k_support


@pytest.mark.parametrize("p", [0.0, 0.3, 1.0])
def test_theta_rows_matches_scalar(p):
    Z = stream(1, "kern").standard_normal((50, 7))
    Z[3, 2] = 0.0
    for k in (1, 3):
        got = _kernels.theta_topk_rows(Z, p, k)
        ref = [theta(p, z, top_k_support(z, k)) for z in Z]
        np.testing.assert_allclose(got, ref, rtol=1e-13)


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not active")
def test_numpy_and_numba_kernels_agree():
    B = null_space_basis(gaussian(4, 8, 0).data).basis
    W0 = stream(2, "kern").standard_normal((6, B.shape[1]))
    Z = stream(3, "kern").standard_normal((40, 8))
    for p in (0.0, 0.5, 1.0):
        np.testing.assert_allclose(_kernels._nb_theta_topk_rows(Z, p, 2, 1e-9),
                                   _kernels._np_theta_topk_rows(Z, p, 2, 1e-9), rtol=1e-13)
    eps = np.asarray(EPS_SCHEDULE)
    Wn, _ = _kernels._nb_ascend(B, W0, 0.5, 2, eps, 500, np.zeros(8, dtype=bool), False)
    Wp, _ = _kernels._np_ascend(B, W0, 0.5, 2, eps, 500, None)
    vn = _kernels.theta_topk_rows(Wn @ B.T, 0.5, 2)
    vp = _kernels.theta_topk_rows(Wp @ B.T, 0.5, 2)
    np.testing.assert_allclose(vn, vp, rtol=1e-6)


SCRIPT = r"""
import json
from nsclab import backend
from nsclab.matgen import gaussian
from nsclab.nsc import NscConfig, NscQuery, nsc_estimate
A = gaussian(4, 8, 6).data
out = {"backend": backend()}
for p in (0.3, 0.8):
    e = nsc_estimate(A, NscQuery(p, 2), NscConfig(force="multistart", restarts=16))
    out[str(p)] = e.value
print(json.dumps(out))
"""


def _run(disable):
    env = dict(os.environ)
    env.pop("NSCLAB_DISABLE_NUMBA", None)
    if disable:
        env["NSCLAB_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def test_fallback_backend_end_to_end():
    fallback = _run(True)
    assert fallback["backend"] == "numpy"
    native = _run(False)
    for key in ("0.3", "0.8"):
        assert fallback[key] == pytest.approx(native[key], rel=1e-8)
