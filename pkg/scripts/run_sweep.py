"""Retention-ratio sweep on the synthetic noisy generator; prints a table and writes CSV."""

import argparse
from pathlib import Path

from freemask import theory
from freemask.curation import SyntheticGenerator, retention_sweep
from freemask.rng import SplitMix64


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ratios", default="0.3,0.5,0.6,0.7,0.8,0.9,1.0")
    ap.add_argument("--iterations", default="30,40,50")
    ap.add_argument("--corruption", type=float, default=0.3)
    ap.add_argument("--batch", type=int, default=30)
    ap.add_argument("--held-out", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--replace", action="store_true", help="literal replace semantics instead of accumulate")
    ap.add_argument("--out", type=Path, default=Path("sweep.csv"))
    args = ap.parse_args()

    ratios = [float(v) for v in args.ratios.split(",")]
    iters = [int(v) for v in args.iterations.split(",")]
    gen = SyntheticGenerator(batch=args.batch, corruption=args.corruption)
    held = SyntheticGenerator(batch=args.held_out, corruption=0.0)(SplitMix64(args.seed).spawn())
    rows = retention_sweep(gen, ratios, iters, args.seed, held, accumulate=not args.replace)
    theory.write_csv(args.out, rows, ["ratio", "iterations", "held_out_accuracy"])

    print("ratio " + " ".join(f"T={t:>4d}" for t in iters))
    for r in ratios:
        vals = [next(x["held_out_accuracy"] for x in rows if x["ratio"] == r and x["iterations"] == t) for t in iters]
        print(f"{r:5.2f} " + " ".join(f"{v:6.3f}" for v in vals))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
