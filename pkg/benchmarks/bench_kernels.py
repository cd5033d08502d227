"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--n 1000] [--races 200] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from consensus_net import graph as gr
from consensus_net.kernels import get_backend


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--races", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    graphs = {
        "er": gr.sample_connected(lambda r: gr.gen_erdos_renyi(args.n, 8 / args.n, r), rng)[0],
        "ba": gr.sample_connected(lambda r: gr.gen_barabasi_albert(args.n, 8, r), rng)[0],
    }
    pairs = [tuple(int(x) for x in rng.choice(args.n, 2, replace=False)) for _ in range(args.races)]

    backends = {}
    for name in ("python", "cython"):
        try:
            backends[name] = get_backend(name)
        except ImportError:
            print(f"{name}: not available")

    print(f"{'kernel':<14}{'graph':<6}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for gname, g in graphs.items():
        rows = {
            "diffuse_two": lambda k: [k.diffuse_two(g.indptr, g.indices, g.delays, a, b, i % 4, i, 10**6)
                                      for i, (a, b) in enumerate(pairs)],
            "distance_sums": lambda k: k.distance_sums(g.indptr, g.indices),
        }
        for kname, fn in rows.items():
            t = {b: best_of(lambda: fn(k), args.repeat) for b, k in backends.items()}
            speed = f"{t['python'] / t['cython']:>9.1f}x" if len(t) == 2 else ""
            print(f"{kname:<14}{gname:<6}" + "".join(f"{v:>11.4f}s" for v in t.values()) + speed)


if __name__ == "__main__":
    main()
