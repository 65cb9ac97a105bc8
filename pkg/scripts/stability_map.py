#!/usr/bin/env python3
#
# Sample the von Neumann amplification factors of the Kahan and PDGM
# schemes for linearized KdV over a (lambda, theta) grid and report the
# worst deviation of |g| from 1. Optionally plot the phase of g.

import argparse

import numpy as np

from polarstep.analysis import stability_grid


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-lambda", type=int, default=100)
    ap.add_argument("--n-theta", type=int, default=100)
    ap.add_argument("--lambda-max", type=float, default=10.0)
    ap.add_argument("--plot", default=None, help="write a phase plot to this SVG path")
    args = ap.parse_args()

    for method in ("kahan", "pdgm"):
        rows = stability_grid(method, args.n_lambda, args.n_theta, args.lambda_max)
        worst = max(abs(abs(g) - 1.0) for _, _, roots in rows for g in roots)
        print(f"{method}: {len(rows)} grid points, worst ||g| - 1| = {worst:.3e}")

    if args.plot is not None:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
        for ax, method in zip(axes, ("kahan", "pdgm")):
            rows = stability_grid(method, args.n_lambda, args.n_theta, args.lambda_max)
            lam = np.array([r[0] for r in rows])
            theta = np.array([r[1] for r in rows])
            phase = np.array([np.angle(r[2][0]) for r in rows])
            sc = ax.scatter(theta, lam, c=phase, s=2, cmap="twilight")
            ax.set_title(method)
            ax.set_xlabel("theta")
        axes[0].set_ylabel("lambda")
        fig.colorbar(sc, ax=axes, label="arg g1")
        fig.savefig(args.plot)
        print(f"phase plot: {args.plot}")


if __name__ == "__main__":
    main()
