"""Residual battery on Beltrami pairs across dimensions and matrices A.

    python3 scripts/beltrami_battery.py --samples 50 --out beltrami.csv
"""
import argparse
import csv

import numpy as np

from georigid.catalog import beltrami_pullback, sphere_stereo
from georigid.equivalence import (EINSTEIN_IDENTITIES, EQUIVALENCE_SUITE, GENERAL_IDENTITIES, build_pair,
                                  evaluate_identity)

CASES = [(2, "diag(2,1,1)"), (3, "diag(2,1,1,0.5)"), (4, "diag(2,1,1,1,1)"), (4, "diag(3,2,1,0.7,0.4)"),
         (5, "diag(1.5,1,1,1,1,0.8)")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="CSV of per-case maxima")
    args = ap.parse_args()
    names = EQUIVALENCE_SUITE + GENERAL_IDENTITIES + EINSTEIN_IDENTITIES
    rows = []
    for n, A in CASES:
        pair = build_pair(sphere_stereo(n), beltrami_pullback(n, A))
        worst, status = dict.fromkeys(names, 0.0), {}
        for x in pair.sample(args.samples, np.random.default_rng(args.seed)):
            for name in names:
                r = evaluate_identity(pair, name, x)
                status[r.status] = status.get(r.status, 0) + 1
                if r.status == "ok":
                    worst[name] = max(worst[name], r.value)
        rows.append({"dim": n, "A": A, **worst, "statuses": status})
        print(f"dim {n} A={A:22s} max residual {max(worst.values()):.2e}  statuses {status}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
