#!/usr/bin/env python3
#
# Run one KdV or CH preset with several schemes and write the states /
# diagnostics CSVs (and SVG plots) side by side for comparison.
#
# Usage: python scripts/soliton_comparison.py [--preset kdv-1soliton]
#        [--schemes kahan,pdgm-quadratic] [--T 10] [--out results]

import argparse

from polarstep.runner import PRESETS, make_config, run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--preset", default="kdv-1soliton", choices=sorted(PRESETS))
    ap.add_argument("--schemes", default="kahan,pdgm-quadratic")
    ap.add_argument("--T", type=float, default=None, help="override the preset horizon")
    ap.add_argument("--out", default="results")
    ap.add_argument("--plots", action="store_true")
    args = ap.parse_args()

    for scheme in args.schemes.split(","):
        overrides = {"scheme": scheme, "output_dir": args.out,
                     "basename": f"{args.preset}_{scheme}"}
        if args.T is not None:
            overrides["T"] = args.T
        cfg = make_config(preset=args.preset, **overrides)
        record, paths = run(cfg, make_plots=args.plots)
        if record.blew_up:
            print(f"{scheme}: blow-up at t = {record.blow_up_time:.6g}")
        else:
            print(f"{scheme}: completed {record.n_steps_completed} steps")
        for kind, path in paths.items():
            print(f"  {kind}: {path}")


if __name__ == "__main__":
    main()
