"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_backends.py --runs 200000 --repeat 5
"""
import argparse
import time
from pathlib import Path

import numpy as np

import btkit
from btkit import _accel
from btkit.cli.textformat import parse
from btkit.reliability import analyze, monte_carlo
from btkit.reliability.markov import transient_probabilities

DATA = Path(btkit.__file__).parent / "data"


def best_of(fn, repeat):
    fn()  # warm up, pays the jit cost once
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def random_generator(n, rng):
    Q = rng.random((n, n)) * (rng.random((n, n)) < 0.2)
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tree", default="search_grasp.bt")
    ap.add_argument("--runs", type=int, default=200_000)
    ap.add_argument("--states", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    doc = parse((DATA / args.tree).read_text())
    rng = np.random.default_rng(0)
    Q = random_generator(args.states, rng)
    pi0 = np.zeros(args.states)
    pi0[0] = 1.0
    grid = np.linspace(0, 50, 26)

    backends = ["numpy"] + (["numba"] if _accel.numba is not None else [])
    cases = {
        f"monte_carlo {args.tree} x{args.runs}":
            lambda b: monte_carlo(doc.tree, doc.profiles, args.runs, 1, backend=b),
        f"uniformization {args.states} states":
            lambda b: transient_probabilities(Q, pi0, grid, backend=b),
    }
    print(f"{'case':44s}" + "".join(f"{b:>12s}" for b in backends) + "     speedup")
    for name, fn in cases.items():
        secs = {b: best_of(lambda: fn(b), args.repeat) for b in backends}
        row = f"{name:44s}" + "".join(f"{secs[b]:11.4f}s" for b in backends)
        if "numba" in secs:
            row += f"{secs['numpy'] / secs['numba']:11.1f}x"
        print(row)

    ref = monte_carlo(doc.tree, doc.profiles, 20_000, 3, backend="numpy")
    for b in backends[1:]:
        other = monte_carlo(doc.tree, doc.profiles, 20_000, 3, backend=b)
        assert np.array_equal(ref.outcomes, other.outcomes), "backends disagree"
    print(f"analytic p_s {analyze(doc.tree, doc.profiles).ps_inf:.4f}, "
          f"sampled {ref.p_s:.4f} (20000 runs)")


if __name__ == "__main__":
    main()
