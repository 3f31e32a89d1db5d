"""Exact errors of extractors built from protocols, and of the address extractor."""

from onosf.protocols import (
    FixedLeader,
    address_extractor_errors,
    composition_checks,
    two_stage_leader_election,
)


def main():
    print("address extractor: ell,bad_block,error,limit")
    for ell in (3, 4, 5):
        for b, err in address_extractor_errors(ell).items():
            print(f"{ell},{b},{err:.12g},{1 / (ell - 1):.12g}")
    print()
    print("protocol extractor: protocol,ell,bad_blocks,bad_players,extractor_error,bad_leader_probability")
    for ell in (2, 3):
        protos = {
            "fixed": FixedLeader(ell),
            "index": two_stage_leader_election(ell, threshold=ell),
            "lightest": two_stage_leader_election(ell, threshold=1, final_stage="first"),
        }
        for name, spec in protos.items():
            for c in composition_checks(spec, 2):
                print(f"{name},{ell},{' '.join(map(str, sorted(c.bad_blocks)))},"
                      f"{' '.join(map(str, sorted(c.bad_players)))},{c.extractor_error:.12g},"
                      f"{c.bad_leader_probability:.12g}")


if __name__ == "__main__":
    main()
