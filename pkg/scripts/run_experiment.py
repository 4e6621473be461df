"""Train, plot and compare one experiment group.

    python3 scripts/run_experiment.py point_reach --root runs
    python3 scripts/run_experiment.py voltvar --root runs --seeds 0 1 2
"""

import argparse
import logging

from intsac.harness.curves import similar
from intsac.harness.experiments import GROUPS, run_group


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("group", choices=sorted(GROUPS))
    p.add_argument("--root", default="runs")
    p.add_argument("--only", nargs="+", default=None, help="subset of run names")
    p.add_argument("--seeds", nargs="+", type=int, default=None)
    p.add_argument("--total-steps", type=int, default=None)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    overrides = {}
    if args.seeds:
        overrides["seeds"] = args.seeds
    if args.total_steps:
        overrides["total_steps"] = args.total_steps
    res = run_group(args.group, args.root, args.only, **overrides)

    print(f"curves: {res['plot']['csv']}  {res['plot']['svg']}")
    for label, s in res["scores"].items():
        print(f"{label:>18s}  final {s.mean:9.3f} +- {s.std:.3f}  seeds {[round(v, 3) for v in s.per_seed]}")
    for a, b, v in res["verdicts"]:
        if v:
            print(f"{a} > {b}")
    if args.group == "point_reach" and "sac_continuous" in res["scores"]:
        ref = res["scores"]["sac_continuous"]
        for label, s in res["scores"].items():
            if label != "sac_continuous":
                print(f"{label} similar to sac_continuous: {similar(s, ref)}")


if __name__ == "__main__":
    main()
