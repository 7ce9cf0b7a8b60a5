"""Regenerate the frozen curation history used by the test suite.

Run only when the generator or classifier changes on purpose; the file is
compared byte-for-byte.
"""

import argparse
from pathlib import Path

from freemask.curation import SyntheticGenerator, curate

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden" / "curate_history_seed7_T5.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=GOLDEN)
    args = ap.parse_args()
    text = curate(SyntheticGenerator(), 5, 0.7, seed=7).history_json()
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(text)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
