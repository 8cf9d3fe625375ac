#!/usr/bin/env python3
"""Score the weighted-sum baseline against epsilon-constraint references.

Builds a small corpus per family, evaluates uniform-weight scalarization
frontiers against the reference pipeline, and prints per-family means.
"""

import argparse

from paretogen.frontier import (
    FrontierBuildError,
    build_reference,
    weighted_sum_predictions,
)
from paretogen.instances import GenConfig, generate
from paretogen.metrics import aggregate, evaluate_prediction
from paretogen.problems import FAMILIES


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=10, help="instances per family")
    parser.add_argument("--n", type=int, default=10)
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--points", type=int, default=20, help="baseline frontier size")
    parser.add_argument("--tol", type=float, default=1e-4)
    args = parser.parse_args()

    print(f"{'family':<10} {'feasibility':>12} {'HVR':>8} {'IGD+':>10}")
    for family in FAMILIES:
        reports = []
        skipped = 0
        for i in range(args.count):
            instance = generate(GenConfig(family=family, n=args.n, seed=args.seed + i))
            try:
                reference = build_reference(instance)
            except FrontierBuildError:
                # tiny or degenerate instances may not span 20 grid points
                skipped += 1
                continue
            baseline = weighted_sum_predictions(instance, count=args.points)
            reports.append(
                evaluate_prediction(instance, baseline, reference, tol=args.tol)
            )
        if not reports:
            print(f"{family:<10} all {skipped} instances degenerate, skipped")
            continue
        summary = aggregate(reports)
        igd_text = (
            f"{summary.igd_plus_mean:.6f}"
            if summary.igd_plus_mean is not None
            else "n/a"
        )
        print(
            f"{family:<10} {summary.feasibility_mean:>12.4f}"
            f" {summary.hvr_mean:>8.4f} {igd_text:>10}"
        )


if __name__ == "__main__":
    main()
