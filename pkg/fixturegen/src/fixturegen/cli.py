"""Command-line entry: generate fixtures, optionally formula-check them."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from fixturegen.core import generate_fixtures
from fixturegen.formula import validate_against_formula


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fixturegen",
        description="Generate golden JSON fixtures for the grid operators.")
    parser.add_argument("--out", default="fixtures",
                        help="output directory (default: ./fixtures)")
    parser.add_argument("--seed", type=int, default=42,
                        help="RNG seed for the random cases (default: 42)")
    parser.add_argument("--validate", action="store_true",
                        help="re-derive avgpool/bilinear cases from the "
                             "closed-form formulas after writing")
    args = parser.parse_args(argv)

    try:
        count = generate_fixtures(args.out, seed=args.seed)
    except OSError as e:
        print(f"fixturegen: cannot write fixtures: {e}", file=sys.stderr)
        return 1
    print(f"wrote {count} cases to {args.out}")

    if args.validate:
        failures = 0
        for path in sorted(Path(args.out).glob("*/*.json")):
            obj = json.loads(path.read_text(encoding="utf-8"))
            if obj["op"] not in ("avgpool2", "bilinear_upsample"):
                continue
            ok, detail = validate_against_formula(obj)
            tag = "ok" if ok else f"MISMATCH {detail}"
            print(f"  formula {obj['op']}/{obj['case']}: {tag}")
            if not ok:
                failures += 1
        if failures:
            print(f"fixturegen: {failures} formula mismatches", file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
