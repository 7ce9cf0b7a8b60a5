"""Write the small file fixtures used by the CLI tests.

The golden mask comes from a plain-Python threshold scan, independent of
``select_threshold``.
"""

import argparse
from pathlib import Path

import numpy as np

from freemask import io
from freemask.attention import AttentionMap

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def attention_fixture() -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(20240901)
    rows = cols = 8
    yy, xx = np.mgrid[0:rows, 0:cols] + 0.5
    blob = np.exp(-((yy - 3.2) ** 2 + (xx - 4.6) ** 2) / (2 * 1.6**2))
    scores = np.stack([0.3 * rng.random((rows, cols)), blob + 0.35 * rng.random((rows, cols)), rng.random((rows, cols))], axis=2)
    reference = ((yy - 2.4) ** 2 + (xx - 5.1) ** 2) <= 2.6**2
    return scores.astype(np.float32), reference


def brute_force_mask(grid, reference):
    rows, cols = len(grid), len(grid[0])
    best = None
    for k in range(1, 20):
        tau = k / 20
        inter = union = 0
        for i in range(rows):
            for j in range(cols):
                a = grid[i][j] >= tau
                b = bool(reference[i][j])
                inter += a and b
                union += a or b
        iou = 1.0 if union == 0 else inter / union
        if best is None or iou > best[1]:
            best = (tau, iou)
    tau = best[0]
    return [[grid[i][j] >= tau for j in range(cols)] for i in range(rows)], best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", type=Path, default=FIXTURES)
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    scores, reference = attention_fixture()
    io.write_fmgrid(args.out_dir / "attention.fmgrid", AttentionMap(scores))
    io.write_mask(args.out_dir / "reference.pgm", reference)
    grid = io.read_fmgrid(args.out_dir / "attention.fmgrid").token(1).tolist()
    mask, (tau, iou) = brute_force_mask(grid, reference.tolist())
    io.write_mask(args.out_dir / "golden_mask.pgm", np.array(mask))
    print(f"token 1: tau*={tau} iou={iou:.4f}; wrote fixtures to {args.out_dir}")


if __name__ == "__main__":
    main()
