"""Classify the reparametrization p(t) = exp(-2 (phi - phi0)) along random geodesics for several pairs.

    python3 scripts/tau_dichotomy.py --count 20
"""
import argparse
import os
from collections import Counter

import numpy as np

from georigid.catalog import euclidean, hyperbolic_ball, minkowski, sphere_stereo, beltrami_pullback
from georigid.dsl import load_metric
from georigid.equivalence import build_pair
from georigid.geodesics import classify_tau, integrate_geodesic, null_vector, random_unit_vector

METRICS = os.path.join(os.path.dirname(__file__), os.pardir, "metrics")


def pairs():
    flat = lambda name, base=euclidean: build_pair(base(3), load_metric(os.path.join(METRICS, name)))  # noqa: E731
    return [
        ("euclidean x2 (affine)", build_pair(euclidean(3), euclidean(3, scale=2.0)), None, 0.5, 1),
        ("hyperbolic x3 (affine)", build_pair(hyperbolic_ball(3), hyperbolic_ball(3, scale=3.0)), None, 0.3, 1),
        ("euclidean / gnomonic sphere", flat("gnomonic_sphere3.metric"), 0.3, 0.6, 1),
        ("euclidean / Klein ball", flat("klein_ball3.metric"), 0.15, 0.3, 1),
        ("sphere / Beltrami", build_pair(sphere_stereo(3), beltrami_pullback(3, "diag(2,1,1,0.5)")), None, 0.5, 1),
        ("minkowski / gnomonic de Sitter, null", flat("gnomonic_de_sitter3.metric", minkowski), 0.05, 1.0, 0),
    ]


def trace(pair, rng, box, T, kind):
    g = pair.g
    while True:
        x0 = g.sample(1, rng)[0] if box is None else rng.uniform(-box, box, g.dim)
        v0 = 0.3 * null_vector(g.matrix(x0), rng) if kind == 0 else random_unit_vector(g.matrix(x0), rng, kind)
        tr = integrate_geodesic(g, x0, v0, T, 200)
        if not tr.truncated:
            return tr


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    for label, pair, box, T, kind in pairs():
        verdicts, fit = Counter(), 0.0
        for _ in range(args.count):
            c = classify_tau(pair, trace(pair, rng, box, T, kind))
            verdicts[(c.regime, c.verdict)] += 1
            if np.isfinite(c.fit_residual):
                fit = max(fit, c.fit_residual)
        print(f"{label:38s} fit<= {fit:.1e}  " + ", ".join(f"{r}/{v}: {k}" for (r, v), k in verdicts.items()))


if __name__ == "__main__":
    main()
