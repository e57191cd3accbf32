"""Time the numba and numpy kernel paths on T^4 and T^3 workloads.

    python benchmarks/bench_kernels.py [--N 16] [--repeat 5]

Each path runs in a fresh interpreter so the FLATCW_NO_NUMBA flag is read
cleanly; the numba path is warmed up once before timing.
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from flatcw import TorusGrid, curvature, preset_polynomial, u, su2
from flatcw._kernels import numba_enabled
from flatcw.connection import random_connection, random_tangent
from flatcw.invariants import beta

N, repeat = int(sys.argv[1]), int(sys.argv[2])
rng = np.random.default_rng(0)
out = {"numba": numba_enabled()}

def timed(fn):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best

g4 = TorusGrid(4, N)
A = random_connection(g4, u(2), rng, max_mode=1)
out["curvature_u2_T4"] = timed(lambda: curvature(A))
p = preset_polynomial("u2_p2p1", u(2))
xi, eta = random_tangent(g4, u(2), rng, max_mode=1), random_tangent(g4, u(2), rng, max_mode=1)
F = curvature(A)
out["beta2_p2p1_T4"] = timed(lambda: beta(p, A, xi, eta, F=F))
g3 = TorusGrid(3, 2 * N)
B = random_connection(g3, su2(), rng, max_mode=1)
q = preset_polynomial("su2_inner_product", su2())
zeta = random_tangent(g3, su2(), rng, max_mode=1)
out["beta1_su2_T3"] = timed(lambda: beta(q, B, zeta))
print(json.dumps(out))
"""


def run(no_numba: bool, N: int, repeat: int) -> dict:
    env = dict(os.environ)
    if no_numba:
        env["FLATCW_NO_NUMBA"] = "1"
    else:
        env.pop("FLATCW_NO_NUMBA", None)
    res = subprocess.run([sys.executable, "-c", WORKER, str(N), str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--N", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fast, slow = run(False, args.N, args.repeat), run(True, args.N, args.repeat)
    print(f"{'kernel':<18}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for key in fast:
        if key == "numba":
            continue
        print(f"{key:<18}{fast[key]:>12.4f}{slow[key]:>12.4f}{slow[key] / fast[key]:>10.2f}")
    if not fast["numba"]:
        print("(numba unavailable: both columns use the numpy path)")


if __name__ == "__main__":
    main()
