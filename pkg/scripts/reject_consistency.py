#!/usr/bin/env python3
"""Step-toy rejection experiment: excess risk of the confidence rule vs plug-in.

Prints, per sample size, the Monte-Carlo mean excess rejection risk over the
evaluation grid and at each grid point, for both rules.
"""

import argparse

from nuq.reject import excess_risk_curve
from nuq.toys import StepToy


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--ns", type=int, nargs="+", default=[500, 2000, 8000])
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--lambda", dest="lam", type=float, default=0.2)
    parser.add_argument("--beta", type=float, default=0.05)
    parser.add_argument("--scale", type=float, default=0.7,
                        help="bandwidth constant in h = scale * n**(-1/5)")
    parser.add_argument("--s", type=float, default=0.05, help="step smoothing")
    args = parser.parse_args()

    toy = StepToy(s=args.s)
    results = {}
    for rule in ("nuq", "plugin"):
        results[rule] = excess_risk_curve(
            toy, ns=args.ns, lam=args.lam, beta=args.beta,
            seeds=range(args.seeds), bandwidth_scale=args.scale, rule=rule,
        )

    points = sorted(results["nuq"][0].per_point)
    header = "rule       n     mean      se   " + "".join(f"x={x:<8}" for x in points)
    print(header)
    for rule in ("nuq", "plugin"):
        for entry in results[rule]:
            cells = "".join(f"{entry.per_point[x]:<10.4f}" for x in points)
            print(f"{rule:<8} {entry.n:>5}  {entry.mean_excess:.4f}  {entry.std_error:.4f}  {cells}")


if __name__ == "__main__":
    main()
