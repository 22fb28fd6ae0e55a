"""Plot the CSVs written by reproduce_figures.py (needs matplotlib, not a package dependency)."""

import argparse
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from telescopy.tables import read_csv  # noqa: E402

LABELS = {
    "ratio-vs-D": ("rounds D", "Fisher ratio, quantum / classical randomness"),
    "gamma-vs-M": ("telescopes M", "gamma_D at D = 70"),
    "tau-profile": ("round r", "optimized tau_r"),
}


def series(path):
    _, header, rows = read_csv(path)
    ix, iseries, ival = header.index("x"), header.index("series"), header.index("value")
    out = defaultdict(lambda: ([], []))
    for r in rows:
        xs, ys = out[r[iseries]]
        xs.append(int(r[ix]))
        ys.append(float(r[ival]))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("indir", nargs="?", default="figures")
    args = ap.parse_args()
    for fig, (xl, yl) in LABELS.items():
        path = os.path.join(args.indir, f"{fig}.csv")
        if not os.path.exists(path):
            continue
        fig_, ax = plt.subplots(figsize=(5, 3.5))
        for name, (xs, ys) in series(path).items():
            ax.plot(xs, ys, "--" if name in ("ansatz", "fit") else "-", label=name)
        ax.set_xlabel(xl)
        ax.set_ylabel(yl)
        ax.legend()
        fig_.tight_layout()
        fig_.savefig(os.path.join(args.indir, f"{fig}.png"), dpi=120)
        plt.close(fig_)


if __name__ == "__main__":
    main()
