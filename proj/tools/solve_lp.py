#!/usr/bin/env python3
"""Solve an exported LP file with HiGHS and write a "name value" solution file.

Usage: solve_lp.py model.lp solution.sol [--time-limit SECONDS]
Exit status: 0 optimal, 2 infeasible, 3 other solver outcome, 4 highspy missing.
"""

import argparse
import sys


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("lp")
    ap.add_argument("solution")
    ap.add_argument("--time-limit", type=float, default=600.0)
    args = ap.parse_args()
    try:
        import highspy
    except ImportError:
        print("solve_lp.py: highspy is not installed", file=sys.stderr)
        return 4

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("time_limit", args.time_limit)
    # Tight tolerances: the big-M rows otherwise admit visible slack.
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 1e-12)
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    h.setOptionValue("mip_feasibility_tolerance", 1e-9)
    if h.readModel(args.lp) != highspy.HighsStatus.kOk:
        print(f"solve_lp.py: cannot read {args.lp}", file=sys.stderr)
        return 3
    h.run()
    status = h.getModelStatus()
    if status == highspy.HighsModelStatus.kInfeasible:
        print("solve_lp.py: infeasible", file=sys.stderr)
        return 2
    if status != highspy.HighsModelStatus.kOptimal:
        print(f"solve_lp.py: {h.modelStatusToString(status)}", file=sys.stderr)
        return 3

    lp = h.getLp()
    values = h.getSolution().col_value
    with open(args.solution, "w") as out:
        out.write(f"# objective {h.getInfo().objective_function_value:.17g}\n")
        for name, v in zip(lp.col_names_, values):
            out.write(f"{name} {v:.17g}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
