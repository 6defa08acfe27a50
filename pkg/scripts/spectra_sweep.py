#!/usr/bin/env python3
"""Eigenvalues and inequality margins of the interval layer operators
across an eps sweep.

    python scripts/spectra_sweep.py --eps 0.1 0.05 0.025 [--json sweep.json]
"""

import argparse
import json

from macflow import spectra


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.05, 0.025])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also dump the full reports as JSON")
    args = ap.parse_args()

    payload = {}
    print(f"{'eps':>7} {'op':>3} {'lam_1':>12} {'lam_2':>12} {'checks':>7} {'worst margin':>13}")
    for eps in args.eps:
        for idx in (1, 2, 3, 4, 5):
            rep = spectra.run_operator_suite(idx, eps, seed=args.seed)
            worst = min((r.margin for r in rep.checks), default=float("nan"))
            npass = sum(r.passed for r in rep.checks)
            print(
                f"{eps:7g} {idx:3d} {rep.eigenvalues[0]:12.4e} {rep.eigenvalues[1]:12.4e} "
                f"{npass:4d}/{len(rep.checks):<3d} {worst:13.3e}"
            )
            payload[f"eps={eps:g},op={idx}"] = rep.to_dict()
    rows, vals = spectra.gap_stability_rows(args.eps)
    print(f"gap * eps^2 across sweep: {[f'{v:.5f}' for v in vals]} (ratio {max(vals)/min(vals):.4f})")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
        print(f"wrote {args.json}")


if __name__ == "__main__":
    main()
