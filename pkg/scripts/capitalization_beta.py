"""Sweep the UER exponent used in the Capitalization case.

usage: python3 scripts/capitalization_beta.py 0.5,1.0 [replicates]

Prints skip rate and picked-capitalized share per condition; this is how the
default cap_beta was chosen.
"""
import sys
import time

from wstypist.cases import CaseSpec, run_case

COLS = ("picked", "uer", "wpm", "picked_cap", "failed_cap", "skip_rate")


def main():
    betas = [float(x) for x in (sys.argv[1] if len(sys.argv) > 1 else "0.5,1.0").split(",")]
    reps = int(sys.argv[2]) if len(sys.argv) > 2 else 4
    for beta in betas:
        t0 = time.time()
        res = run_case(CaseSpec(case="Capitalization", replicates=reps, cap_beta=beta))
        print(f"== cap_beta {beta} ({time.time() - t0:.0f}s)", flush=True)
        for r in res.with_means():
            vals = " ".join(f"{c}={r[c]:.3f}" for c in COLS if r.get(c) is not None)
            print(f"  {r['condition']:>9} {str(r['replicate']):>4} {vals}", flush=True)


if __name__ == "__main__":
    main()
