"""Time the compiled waterfill kernel against the numpy fallback.

Run: python benchmarks/bench_kernels.py [--rows N] [--sources I]
"""
import argparse
import os
import subprocess
import sys

SNIPPET = """
import numpy as np
from aoimech import kernels
from aoimech.aoi_cost import PowerCost
rng = np.random.default_rng(0)
phi = rng.uniform(0.0, 10.0, size=({rows}, {sources}))
fmax = np.full({sources}, 2.0)
aoi = PowerCost(1.0)
"""


def run(backend, rows, sources, repeat):
    env = dict(os.environ)
    env["AOIMECH_PURE_PYTHON"] = "1" if backend == "numpy" else "0"
    code = (
        "import timeit\n"
        f"setup = {SNIPPET.format(rows=rows, sources=sources)!r}\n"
        "t = min(timeit.repeat('kernels.waterfill(phi, fmax, aoi)', setup=setup, number=1, repeat=%d))\n"
        "import aoimech.kernels as k\n"
        "print(k.BACKEND, t)\n" % repeat
    )
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    name, t = out.stdout.split()
    return name, float(t)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=200_000)
    p.add_argument("--sources", type=int, nargs="+", default=[1, 2, 4, 8])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    print(f"{'I':>3} {'numpy [s]':>10} {'compiled [s]':>13} {'speedup':>8}")
    for I in args.sources:
        _, t_np = run("numpy", args.rows, I, args.repeat)
        name, t_c = run("cython", args.rows, I, args.repeat)
        if name != "cython":
            print(f"{I:>3} {t_np:>10.4f} {'n/a':>13} {'-':>8}  (extension not built)")
            continue
        print(f"{I:>3} {t_np:>10.4f} {t_c:>13.4f} {t_np / t_c:>8.2f}")


if __name__ == "__main__":
    main()
