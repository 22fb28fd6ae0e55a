"""Write the three figure data sets as CSV into a directory (default ./figures)."""

import argparse
import json
import os

from telescopy import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("outdir", nargs="?", default="figures")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    os.makedirs(args.outdir, exist_ok=True)
    for fig in cli.FIGURES:
        path = os.path.join(args.outdir, f"{fig}.csv")
        code = cli.main(["reproduce", fig, "--out", path, "--seed", str(args.seed)])
        if code:
            raise SystemExit(code)
    print(json.dumps({"outdir": args.outdir, "figures": list(cli.FIGURES)}))


if __name__ == "__main__":
    main()
