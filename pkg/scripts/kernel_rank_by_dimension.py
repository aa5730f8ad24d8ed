"""Nullspace dimension of the system v^i Z_ijkl = 0 over curvature-like Z, by dimension and signature.

Dimension 4 with a non-null v is the only case in which the kernel condition forces Z = 0.

    python3 scripts/kernel_rank_by_dimension.py --trials 20
"""
import argparse
from collections import Counter

import numpy as np

from georigid.rigidity import kernel_forces_zero


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'n':>2} {'neg':>3} {'vector':>7}  nullspace dims")
    for n in (3, 4, 5, 6):
        for neg in range(0, n // 2 + 1):
            signs = np.array([1.0] * (n - neg) + [-1.0] * neg)
            for kind in ("nonnull", "null") if neg else ("nonnull",):
                dims = Counter()
                for _ in range(args.trials):
                    S = rng.normal(size=(n, n))
                    g = S.T @ np.diag(signs) @ S
                    if kind == "null":
                        y = np.zeros(n)
                        y[0], y[-1] = 1.0, 1.0
                        v = np.linalg.solve(S, y)
                    else:
                        while True:
                            v = rng.normal(size=n)
                            if abs(v @ g @ v) > 0.1 * np.linalg.norm(g, 2) * (v @ v):
                                break
                    dims[kernel_forces_zero(g, v).nullspace_dim] += 1
                print(f"{n:>2} {neg:>3} {kind:>7}  {dict(sorted(dims.items()))}")


if __name__ == "__main__":
    main()
