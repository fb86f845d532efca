"""Run the comparison cases and print per-condition metric means.

usage: python3 scripts/directional_cases.py [replicates] [Case1,Case2,...]

Defaults to 4 replicates of LengthPriority, Interface, Capitalization and
Ablations. Each case trains its own base agents, so a full run takes several
minutes on one core.
"""
import argparse
import time

from wstypist.cases import CaseSpec, run_case

COLS = ("picked", "failed", "start", "gaze_sugg", "gaze_kbd", "gaze_input", "uer", "wpm", "ks",
        "gaze_shifts_per_word", "picked_cap", "failed_cap", "skip_rate")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("replicates", nargs="?", type=int, default=4)
    ap.add_argument("cases", nargs="?", default="LengthPriority,Interface,Capitalization,Ablations")
    ap.add_argument("--all-rows", action="store_true", help="print every replicate, not just means")
    args = ap.parse_args()
    for case in args.cases.split(","):
        t0 = time.time()
        res = run_case(CaseSpec(case=case, replicates=args.replicates))
        print(f"== {case} ({time.time() - t0:.0f}s)", flush=True)
        for r in res.with_means():
            if r["replicate"] != "mean" and not args.all_rows:
                continue
            vals = " ".join(f"{c}={r[c]:.3f}" for c in COLS if r.get(c) is not None)
            print(f"  {r['condition']:>18} {str(r['replicate']):>4} {vals}", flush=True)


if __name__ == "__main__":
    main()
