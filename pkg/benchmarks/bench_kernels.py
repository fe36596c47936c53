"""Compare the compiled and pure-Python flow kernels.

Run with ``python benchmarks/bench_kernels.py``.  Each backend is timed in a
fresh interpreter (the backend is fixed at import through
``SEMIQUANT_KERNELS``) on the Hamiltonian jet, the flow right-hand side with
Jacobian and a full trajectory integration.
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, timeit
import numpy as np
from semiquant import kernels
from semiquant.phase_space import ModelGeometry, integrate_flow, parse_preset
from semiquant.phase_space.orbits import point_from_u_theta

rng = np.random.default_rng(0)
out = {"backend": kernels.BACKEND}
for name, preset, s in (("perturbed", "perturbed:0.1,0.15", 1),
                        ("product", "product:1,sqrt(2)", 2)):
    f = parse_preset(preset, s)
    P = __POINTS__
    z = (rng.uniform(-1, 1, (P, s)) + 1j * rng.uniform(-1, 1, (P, s))) * 0.7
    ch = np.zeros((P, s), dtype=np.int64)
    y = np.empty((P, 2 * s))
    y[:, 0::2], y[:, 1::2] = z.real, z.imag
    jet = lambda: kernels.hamiltonian_jet(f.coef, f.ea, f.eb, f.ed, z, ch, 2)
    rhs = lambda: kernels.flow_rhs(f.coef, f.ea, f.eb, f.ed, y, ch, True)
    x = point_from_u_theta([0.6] * s, [0.3] * s)
    geom = ModelGeometry(s)
    traj = lambda: integrate_flow(geom, f, x, 0.5, variational=True)
    cases = (("jet", jet, __REPS__), ("rhs_jac", rhs, __REPS__), ("trajectory", traj, 3))
    for label, fn, reps in cases:
        t = min(timeit.repeat(fn, number=1, repeat=reps))
        out[f"{name}/{label}"] = t
print(json.dumps(out))
"""


def run_backend(backend, n, reps):
    env = dict(os.environ, SEMIQUANT_KERNELS=backend)
    code = WORKLOAD.replace("__POINTS__", str(n)).replace("__REPS__", str(reps))
    res = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--points", type=int, default=2000, help="batch size for kernel calls")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    compiled = run_backend("compiled", args.points, args.repeat)
    python = run_backend("python", args.points, args.repeat)
    if compiled["backend"] != "compiled":
        print("compiled extension not available; only the fallback was timed")
    print(f"{'workload':28s} {'compiled [s]':>14s} {'python [s]':>14s} {'speedup':>9s}")
    for key in compiled:
        if key == "backend":
            continue
        c, p = compiled[key], python[key]
        print(f"{key:28s} {c:14.6f} {p:14.6f} {p / c:9.1f}")


if __name__ == "__main__":
    main()
