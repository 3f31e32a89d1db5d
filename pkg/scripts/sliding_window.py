"""Exact sliding-window checks on tiny sources with a searched two-source extractor."""

import argparse
import time

from onosf.pipelines import sliding_window_harness
from onosf.prims import search_object

INSTANCES = [(3, 1, 1), (4, 1, 1), (4, 1, 2), (5, 1, 2), (3, 2, 1), (4, 2, 1), (4, 2, 2), (3, 3, 1), (3, 3, 2)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--budget", type=int, default=20_000, help="strategy budget per bad pattern")
    a = ap.parse_args()
    print("ell,n,d,eps_2ext,checks,skipped,max_distance,passed,seconds")
    for ell, n, d in INSTANCES:
        t0 = time.perf_counter()
        ext, rep0 = search_object("two_source_ext", {"n1": d * n, "n2": n, "m": 1},
                                  {"k1": n, "k2": n, "strong": "x"}, 0.25, rng_seed=1)
        rep = sliding_window_harness(ext, ell, n, d, a.budget)
        worst = max((c.distance for c in rep.checks), default=0.0)
        print(f"{ell},{n},{d},{rep0.measured:.12g},{len(rep.checks)},{len(rep.skipped)},{worst:.12g},"
              f"{rep.passed},{time.perf_counter() - t0:.2f}")


if __name__ == "__main__":
    main()
