"""Per-stage timing of the back end (segmentation excluded) on a VGA synthetic instance.

    python scripts/benchmark.py --repeats 5
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mtdepth.metrics import evaluate
from mtdepth.pipeline import run_pipeline
from mtdepth.sampler import random_sample
from mtdepth.segmentation import relabel_external
from mtdepth.synthetic import piecewise_scene


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--height", type=int, default=480)
    ap.add_argument("--width", type=int, default=640)
    ap.add_argument("--fraction", type=float, default=0.0005)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    sc = piecewise_scene(args.height, args.width, 4, 5, seeds_per_segment=1, rng_seed=1)
    seeds = random_sample(sc.gt, args.fraction, rng_seed=1)
    seg = relabel_external(sc.labels)
    run_pipeline(sc.relative, seeds, segments=seg)  # JIT warm-up

    walls, stages = [], []
    for _ in range(args.repeats):
        t0 = time.perf_counter()
        res = run_pipeline(sc.relative, seeds, segments=seg)
        walls.append(time.perf_counter() - t0)
        stages.append(res.timings)
    best = int(np.argmin(walls))
    print(f"{args.height}x{args.width}, {len(seeds)} seeds, AbsRel {evaluate(res.depth, sc.gt).absrel:.2e}")
    for name, t in stages[best].items():
        print(f"  {name:<10}{1000 * t:8.1f} ms")
    print(f"  {'total':<10}{1000 * walls[best]:8.1f} ms  (best of {args.repeats}, median {1000 * np.median(walls):.1f} ms)")


if __name__ == "__main__":
    main()
