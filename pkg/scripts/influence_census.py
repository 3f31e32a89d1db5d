"""Poincare and sandwich census over every function of small arity plus random samples."""

import argparse

from onosf.verify import all_tables, fourier_gap, poincare_violations, random_tables, sandwich_violations


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--random", type=int, default=10_000)
    ap.add_argument("--random-ell", type=int, default=10)
    a = ap.parse_args()
    print("family,functions,poincare_violations,sandwich_violations,fourier_gap")
    for ell in (1, 2, 3, 4):
        t = all_tables(ell)
        print(f"all_ell{ell},{len(t)},{poincare_violations(t)},{sandwich_violations(t)},{fourier_gap(t):.3g}")
    t = random_tables(a.random, a.random_ell, 0)
    print(f"random_ell{a.random_ell},{len(t)},{poincare_violations(t)},{sandwich_violations(t)},{fourier_gap(t):.3g}")


if __name__ == "__main__":
    main()
