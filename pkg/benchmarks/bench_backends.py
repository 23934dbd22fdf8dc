"""Time the compiled kernels against the pure-Python fallback.

Each (ring size, algorithm) pair is solved under both backends; timings are
the best of ``--repeat`` runs and the final states must match bit for bit.

    python benchmarks/bench_backends.py --sizes 5,10,15,20,25 --repeat 5 --out bench.csv
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from tfa import generators, kernels
from tfa.calculus import with_line_shaping
from tfa.solvers import SolveOptions, run_alt, run_async, run_fptfa, run_sync

SOLVERS = {
    "sync": lambda net, o: run_sync(net, o),
    "async[rr]": lambda net, o: run_async(net, "rr", o),
    "alt": lambda net, o: run_alt(net, o),
    "fptfa[dfs]": lambda net, o: run_fptfa(net, "dfs", o),
}


def best_time(fn, repeat: int):
    best, result = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="5,10,15,20,25")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--eps-rel", type=float, default=1e-13)
    ap.add_argument("--out", default=None, help="CSV destination (stdout when omitted)")
    args = ap.parse_args(argv)

    if "compiled" not in kernels.available():
        print("compiled backend not built; nothing to compare", file=sys.stderr)
        return 1
    opts = SolveOptions(eps_rel=args.eps_rel)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("n", "algorithm", "iterations", "python_s", "compiled_s", "speedup", "identical"))
    mismatches = 0
    for n in (int(s) for s in args.sizes.split(",")):
        # line shaping keeps large rings convergent, so every size does real work
        net = with_line_shaping(generators.ring(n), generators.RING_R, generators.RING_B)
        for name, solve in SOLVERS.items():
            timings, states = {}, {}
            for backend in ("python", "compiled"):
                with kernels.use_backend(backend):
                    timings[backend], out = best_time(lambda: solve(net, opts), args.repeat)
                states[backend] = out
            same = np.array_equal(states["python"].state.vector(), states["compiled"].state.vector())
            mismatches += not same
            w.writerow(
                (
                    n,
                    name,
                    states["compiled"].iterations,
                    f"{timings['python']:.6f}",
                    f"{timings['compiled']:.6f}",
                    f"{timings['python'] / timings['compiled']:.1f}",
                    str(same).lower(),
                )
            )
    if args.out:
        fh.close()
    return 1 if mismatches else 0


if __name__ == "__main__":
    raise SystemExit(main())
