"""Time the compiled kernels against the pure-Python engine.

Both backends return identical reports for a given seed, so the table
also checks that every pair of runs agrees.

    python3 benchmarks/bench_kernels.py --n 256 --p 0.05 --repeats 5
"""

import argparse
import statistics
import sys
import time

from beepsim.graph import make_erdos_renyi, max_degree
from beepsim.kernels import available_backends, simulate

ALGORITHMS = ("colouring", "k_colouring", "two_hop_colouring", "degree", "mis", "two_hop_mis")


def _time(algorithm, g, seed, backend, K, emulate_k):
    t0 = time.perf_counter()
    rep = simulate(algorithm, g, seed, K=K, backend=backend, emulate_k=emulate_k)
    return time.perf_counter() - t0, rep


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--p", type=float, default=0.05)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--emulate-k", type=int, default=None, help="also transpile to BL with this k")
    args = ap.parse_args(argv)

    if "cython" not in available_backends():
        print("compiled kernels not built; run `python3 setup.py build_ext --inplace`", file=sys.stderr)
        return 1
    g = make_erdos_renyi(args.n, args.p, args.seed)
    K = max(max_degree(g), 1)
    print(f"# G({args.n}, {args.p}), max degree {K}, k={args.emulate_k}, median of {args.repeats}")
    print("algorithm,python_ms,cython_ms,speedup,identical")
    for name in ALGORITHMS:
        times = {"python": [], "cython": []}
        same = True
        for r in range(args.repeats):
            reps = {}
            for backend in times:
                dt, reps[backend] = _time(name, g, args.seed + r, backend, K, args.emulate_k)
                times[backend].append(dt)
            same = same and reps["python"] == reps["cython"]
        py = statistics.median(times["python"]) * 1e3
        cy = statistics.median(times["cython"]) * 1e3
        print(f"{name},{py:.1f},{cy:.2f},{py / cy:.0f},{int(same)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
