"""Compare the compiled and NumPy propagation kernels.

    python benchmarks/bench_kernels.py [--steps N] [--repeat R]

Times ``propagate`` on random blocks of the sizes the integrator meets
(S^z sectors of 1-4 spin groups) and one full resonant pi pulse through
``evolve`` with each backend.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from spinpair import _kernels_py

try:
    from spinpair import _kernels
except ImportError:
    _kernels = None


def random_problem(d: int, n_steps: int, seed: int = 0):
    rng = np.random.default_rng(seed)

    def herm():
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        return (a + a.conj().T) / 2

    return (np.ascontiguousarray(herm()), np.ascontiguousarray(np.stack([herm(), herm()])),
            rng.uniform(0, 1, 2), rng.uniform(0, 2, 2), rng.uniform(0, 6, 2), 0.0, 0.01, n_steps)


def bench_block(d: int, n_steps: int, repeat: int) -> dict:
    args = random_problem(d, n_steps)
    row = {"dim": d, "steps": n_steps}
    for name, mod in (("python", _kernels_py), ("cython", _kernels)):
        if mod is None:
            row[name] = None
            continue
        best = min(timeit.repeat(lambda: mod.propagate(*args), number=1, repeat=repeat))
        row[name] = best / n_steps * 1e6  # microseconds per step
    if _kernels is not None:
        row["max_diff"] = float(np.max(np.abs(_kernels.propagate(*args) - _kernels_py.propagate(*args))))
    return row


PULSE = """
import time
from spinpair import kernels
from spinpair.dynamics import evolve, rabi_frequency, synthesize_resonant_pulse
from spinpair.spins import Bond, DeviceConfig
dev = DeviceConfig(2, (1.0, 1.5), 1.0, (Bond(1, 2),))
sched = synthesize_resonant_pulse(dev, 3.141592653589793, 0.05 * rabi_frequency(dev))
t = time.perf_counter()
evolve(sched, tol=1e-8)
print(kernels.BACKEND, time.perf_counter() - t)
"""


def bench_pulse(pure: bool) -> tuple[str, float]:
    env = dict(os.environ)
    if pure:
        env["SPINPAIR_PURE_PYTHON"] = "1"
    else:
        env.pop("SPINPAIR_PURE_PYTHON", None)
    out = subprocess.run([sys.executable, "-c", PULSE], env=env, capture_output=True, text=True, check=True)
    name, secs = out.stdout.split()
    return name, float(secs)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=1 << 14)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    print(f"{'dim':>4} {'python us/step':>15} {'cython us/step':>15} {'speedup':>8} {'max diff':>10}")
    for d in (1, 2, 3, 4, 6):
        r = bench_block(d, args.steps, args.repeat)
        if r["cython"] is None:
            print(f"{d:>4} {r['python']:>15.3f} {'n/a':>15}")
            continue
        print(f"{d:>4} {r['python']:>15.3f} {r['cython']:>15.3f} {r['python'] / r['cython']:>7.1f}x "
              f"{r['max_diff']:>10.1e}")

    print("\nresonant pi pulse through evolve (tol 1e-8):")
    for pure in (True, False):
        name, secs = bench_pulse(pure)
        print(f"  {name:<7} {secs:8.3f} s")


if __name__ == "__main__":
    main()
