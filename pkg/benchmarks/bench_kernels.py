"""Time each kernel on every available backend and check that results agree.

    python benchmarks/bench_kernels.py --size 512 --repeat 3
"""

import argparse
import time

import numpy as np

from glacier_mapper import kernels


def fractal_dem(size, rng):
    """Sum of smoothed noise octaves: pits, flats after rounding, and long flow paths."""
    from scipy import ndimage

    dem = np.zeros((size, size))
    for sigma in (32, 8, 2):
        dem += ndimage.gaussian_filter(rng.normal(size=(size, size)), sigma) * sigma
    return np.round(dem * 50, 0)


def cases(size, rng):
    dem = fractal_dem(size, rng)
    valid = np.ones(dem.shape, bool)
    ref = kernels.python
    filled = ref.priority_flood(dem, valid)
    dirs = ref.resolve_flats(filled, valid, ref.d8_flowdir(filled, valid))
    order = ref.topo_order(dirs)
    targets = np.zeros(dirs.size, np.int64)
    samples = rng.random((400, 12))
    labels = (rng.random(400) < 0.5).astype(np.uint8)
    queries = rng.random((size * 8, 12))
    return {
        "priority_flood": (dem, valid),
        "d8_flowdir": (filled, valid),
        "resolve_flats": (filled, valid, ref.d8_flowdir(filled, valid)),
        "topo_order": (dirs,),
        "accumulate": (dirs, order),
        "basins": (dirs, order, targets),
        "knn_predict": (samples, labels, queries, 5),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=256)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    backends = kernels.available()
    print(f"grid {args.size}x{args.size}, best of {args.repeat}; backends: {', '.join(backends)}")
    print(f"{'kernel':<16}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for name, inputs in cases(args.size, rng).items():
        times, results = {}, {}
        for backend, module in backends.items():
            fn = getattr(module, name)
            best = float("inf")
            for _ in range(args.repeat):
                copies = [a.copy() if isinstance(a, np.ndarray) else a for a in inputs]
                start = time.perf_counter()
                results[backend] = fn(*copies)
                best = min(best, time.perf_counter() - start)
            times[backend] = best
        outs = list(results.values())
        agree = all(np.array_equal(np.asarray(outs[0]), np.asarray(o)) for o in outs[1:])
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        row = f"{name:<16}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times.values()) + f"{speed:>9.1f}x"
        print(row + ("" if agree else "  MISMATCH"))


if __name__ == "__main__":
    main()
