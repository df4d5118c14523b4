#!/usr/bin/env python3
"""Time the numba kernels against their numpy twins, then a full split step under each backend.

    python3 benchmarks/bench_kernels.py [--n 64] [--repeat 20] [--steps 50]

The per-kernel table calls both implementations in this process. The
split-step timing runs a child interpreter per backend, since the backend
is fixed at import time by NLS2_DISABLE_NUMBA.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from nls2 import _kernels

STEP_SNIPPET = """
import time
from nls2 import _kernels
from nls2.grid import make_grid
from nls2.groundstate import solve_ground_state
from nls2.evolve import EvolutionConfig, evolve
g = make_grid({n}, 16.0)
s = solve_ground_state(1.0).embed(g, 0.9)
evolve(s, EvolutionConfig(dt=1e-3, t_end=2e-3, report_every=2))  # warm-up / jit
t = time.perf_counter()
evolve(s, EvolutionConfig(dt=1e-3, t_end={steps} * 1e-3, report_every={steps}))
print(_kernels.BACKEND, (time.perf_counter() - t) / {steps})
"""


def _time(fn, repeat):
    fn()
    t = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t) / repeat


def kernel_table(n, repeat):
    rng = np.random.default_rng(0)
    shape = (n, n, n)
    u = 0.3 * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    v = 0.3 * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    w = rng.random(shape)
    cases = {
        "nonlinear_phase": lambda k: k(u.copy(), v.copy(), 1e-3, 1.0),
        "quartic_sum": lambda k: k(u, v, 1.0),
        "power_sum": lambda k: k(u, 5.0),
        "max_potential": lambda k: k(u, v, 1.0),
        "weighted_power": lambda k: k(u, w),
        "tail_power": lambda k: k(u, w, 0.5),
    }
    print(f"kernels on {n}^3 (backend in use: {_kernels.BACKEND})")
    print(f"{'kernel':18s} {'numpy ms':>10s} {'numba ms':>10s} {'speed-up':>9s}")
    for name, call in cases.items():
        t_np = _time(lambda: call(_kernels.NUMPY_KERNELS[name]), repeat)
        if _kernels.HAS_NUMBA:
            t_nb = _time(lambda: call(getattr(_kernels, name)), repeat)
            print(f"{name:18s} {1e3 * t_np:10.3f} {1e3 * t_nb:10.3f} {t_np / t_nb:8.1f}x")
        else:
            print(f"{name:18s} {1e3 * t_np:10.3f} {'n/a':>10s}")


def step_timing(n, steps):
    print(f"\nsplit step on {n}^3, {steps} steps")
    for disable in ("0", "1"):
        env = dict(os.environ, NLS2_DISABLE_NUMBA=disable)
        out = subprocess.run([sys.executable, "-c", STEP_SNIPPET.format(n=n, steps=steps)],
                             env=env, capture_output=True, text=True, check=True)
        backend, per = out.stdout.split()
        print(f"{backend:6s} {1e3 * float(per):8.2f} ms/step")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--no-step", action="store_true", help="skip the full split-step timing")
    args = ap.parse_args()
    kernel_table(args.n, args.repeat)
    if not args.no_step:
        step_timing(args.n, args.steps)


if __name__ == "__main__":
    main()
