"""Compare the compiled persistence kernel against the pure-Python fallback.

The backend is chosen at import time, so each side runs in its own
subprocess with WAFERTOPO_PURE_PYTHON toggled.  Workload: full cubical
persistence (H0 + H1) on random smooth images.

Usage: python3 benchmarks/benchmark_persistence.py [--size 64] [--count 20]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys


def run_one(size: int, count: int) -> dict:
    import time

    import numpy as np
    from scipy.ndimage import gaussian_filter

    from wafertopo.persist import backend
    from wafertopo.persist.filtration import build_filtration, compute_persistence

    rng = np.random.default_rng(0)
    images = [gaussian_filter(rng.random((size, size)), sigma=2.0) for _ in range(count)]

    # warm-up pass so one-time costs do not skew the timing
    compute_persistence(build_filtration(images[0]))
    t0 = time.perf_counter()
    n_pairs = 0
    for img in images:
        d0, d1 = compute_persistence(build_filtration(img))
        n_pairs += len(d0.intervals) + len(d1.intervals)
    elapsed = time.perf_counter() - t0
    return {
        "backend": backend.BACKEND,
        "size": size,
        "count": count,
        "seconds": elapsed,
        "ms_per_image": 1000.0 * elapsed / count,
        "pairs": n_pairs,
    }


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--count", type=int, default=20)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        print(json.dumps(run_one(args.size, args.count)))
        return

    results = []
    for pure in ("0", "1"):
        env = dict(os.environ, WAFERTOPO_PURE_PYTHON=pure)
        out = subprocess.run(
            [sys.executable, __file__, "--worker", "--size", str(args.size), "--count", str(args.count)],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        results.append(json.loads(out.stdout.strip()))

    for r in results:
        print(f"{r['backend']:>8}: {r['ms_per_image']:8.2f} ms/image "
              f"({r['count']} images of {r['size']}x{r['size']}, {r['pairs']} pairs)")
    if results[0]["pairs"] != results[1]["pairs"]:
        print("WARNING: backends disagree on pair counts")
        sys.exit(1)
    speedup = results[1]["seconds"] / results[0]["seconds"]
    print(f"speedup: {speedup:.1f}x ({results[0]['backend']} over {results[1]['backend']})")


if __name__ == "__main__":
    main()
