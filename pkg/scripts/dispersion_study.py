#!/usr/bin/env python3
#
# Tabulate the discrete dispersion relations of the Kahan and PDGM
# schemes against the exact branch omega = xi^3 of linearized KdV.

import argparse

import numpy as np

from polarstep.analysis import dispersion_curves


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lambda", dest="lam", type=float, default=1.0)
    ap.add_argument("--samples", type=int, default=32)
    ap.add_argument("--xi-max", type=float, default=float(np.pi))
    ap.add_argument("--plot", default=None, help="write an SVG plot to this path")
    args = ap.parse_args()

    xi = np.linspace(0.0, args.xi_max, args.samples + 1)
    samples = dispersion_curves(args.lam, xi)
    print(f"{'xi':>8} {'exact':>12} {'kahan':>12} {'pdgm':>12}")
    for s in samples:
        pdgm = f"{s.omega_pdgm:12.6f}" if s.omega_pdgm is not None else "     bracket"
        print(f"{s.xi:8.4f} {s.omega_exact:12.6f} {s.omega_kahan:12.6f} {pdgm}")

    if args.plot is not None:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot([s.xi for s in samples], [s.omega_exact for s in samples], "k-", label="exact")
        ax.plot([s.xi for s in samples], [s.omega_kahan for s in samples], label="kahan")
        ax.plot(
            [s.xi for s in samples if s.omega_pdgm is not None],
            [s.omega_pdgm for s in samples if s.omega_pdgm is not None],
            label="pdgm",
        )
        ax.set_xlabel("xi")
        ax.set_ylabel("omega")
        ax.legend()
        fig.savefig(args.plot)
        print(f"plot: {args.plot}")


if __name__ == "__main__":
    main()
