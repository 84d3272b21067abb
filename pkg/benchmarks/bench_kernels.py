"""Time the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is made once at
import time from NSCLAB_DISABLE_NUMBA. Usage:

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from nsclab import backend
from nsclab._kernels import ascend, theta_topk_rows
from nsclab.matgen import gaussian, stream
from nsclab.linalg import null_space_basis
from nsclab.nsc import EPS_SCHEDULE, NscConfig, NscQuery, nsc_estimate

repeat = int(sys.argv[1])
A = gaussian(4, 8, 11).data
B = null_space_basis(A).basis
rng = stream(0, "bench")
W0 = rng.standard_normal((64, B.shape[1]))
Z = rng.standard_normal((20000, 8))

def best(fn):
    fn()  # warm-up (includes JIT compilation when numba is on)
    times = []
    for _ in range(repeat):
        t = time.perf_counter(); fn(); times.append(time.perf_counter() - t)
    return min(times)

cfg = NscConfig(force="multistart")
out = {
    "backend": backend(),
    "theta_topk_rows[20000x8]": best(lambda: theta_topk_rows(Z, 0.5, 2)),
    "ascend[64 restarts, 4x8]": best(lambda: ascend(B, W0, 0.5, 2, EPS_SCHEDULE)),
    "nsc_estimate multistart": best(lambda: nsc_estimate(A, NscQuery(0.5, 2), cfg)),
}
print(json.dumps(out))
"""


def run(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("NSCLAB_DISABLE_NUMBA", None)
    if disable:
        env["NSCLAB_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", CHILD, str(repeat)], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    nb, np_ = run(False, args.repeat), run(True, args.repeat)
    if nb["backend"] != "numba":
        print("numba unavailable; both columns use numpy", file=sys.stderr)
    print(f"{'kernel':32s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for key in nb:
        if key == "backend":
            continue
        a, b = 1e3 * nb[key], 1e3 * np_[key]
        print(f"{key:32s} {a:10.2f} {b:10.2f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()
