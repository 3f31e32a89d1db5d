"""Survivor trajectories of the lightest-bin stage under the crowding adversary."""

import argparse

from onosf.protocols import estimate_leader_quality, two_stage_leader_election


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=7)
    a = ap.parse_args()
    runs = [
        ("one_bit", two_stage_leader_election(1024, "one_bit", threshold=32)),
        ("one_bit", two_stage_leader_election(4096, "one_bit")),
        ("multi_bit", two_stage_leader_election(4096, "multi_bit", C0=2, C1=1, delta=0.1)),
        ("multi_bit", two_stage_leader_election(10**6, "multi_bit", C0=3, C1=1.5, delta=0.1)),
    ]
    print("variant,ell,threshold,planned_rounds,good_leader,survivor_bound_fraction,good_fraction_bound")
    for name, spec in runs:
        trials = a.trials if spec.ell <= 4096 else a.trials // 10
        st = estimate_leader_quality(spec, "crowd", 0.1, trials, a.seed)
        key = "survivor_stated" if name == "one_bit" else "survivor_multi"
        print(f"{name},{spec.ell},{spec.threshold:.12g},{len(spec.planned_rounds())},"
              f"{st.good_leader_frequency:.12g},{st.checks[key]:.12g},{st.checks['good_fraction']:.12g}")


if __name__ == "__main__":
    main()
