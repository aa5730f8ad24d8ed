"""Survey of jet derivatives against fourth-order central differences on random expression trees.

Reports error quantiles per derivative order and per tree depth, and how often the stated step
had to be halved before the difference quotient was resolved.

    python3 scripts/jets_fd_survey.py --trees 2000
"""
import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "tests"))

from exprgen import STEPS, check_against_fd, jet_of, random_point, random_tree  # noqa: E402
from georigid import jets as J  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trees", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    by_depth = {d: [] for d in range(1, 7)}
    unresolved = 0
    for _ in range(args.trees):
        d = int(rng.integers(1, 7))
        e, x = random_tree(rng, d), random_point(rng)
        j = jet_of(e, x)
        if not isinstance(j, J.Jet):
            j = J.constant(j, 3)
        errs, used = check_against_fd(j, e, x)
        unresolved += any(u < s for u, s in zip(used, STEPS))
        by_depth[d].append(errs)
    print(f"{'depth':>5} {'trees':>5}  {'grad p50/max':>20}  {'hess p50/max':>20}  {'third p50/max':>20}")
    for d, rows in by_depth.items():
        if not rows:
            continue
        a = np.array(rows)
        cols = "  ".join(f"{np.median(a[:, k]):9.1e}/{a[:, k].max():9.1e}" for k in range(3))
        print(f"{d:>5} {len(rows):>5}  {cols}")
    print(f"step halved on {unresolved} of {args.trees} trees")


if __name__ == "__main__":
    main()
