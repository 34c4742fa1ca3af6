#!/usr/bin/env python3
"""Plot K^M components of a sweep.csv against the moisture gradient.

One curve per group of rows sharing the --group columns, e.g.

    plot_sweep.py out/sweep.csv --group alpha_int beta_int -o interfaces.png
    plot_sweep.py out/sweep.csv --group Phi0 -o loading.png
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("csv")
    ap.add_argument("--group", nargs="+", default=["alpha_int", "beta_int"])
    ap.add_argument("--x", default="gradPhi_x")
    ap.add_argument("--components", nargs="+", default=["KM_tt_xx", "KM_pp_xx"])
    ap.add_argument("-o", "--output", default="sweep.png")
    args = ap.parse_args()

    df = pd.read_csv(args.csv, comment="#")
    df = df[df["status"] == "ok"]
    fig, axes = plt.subplots(1, len(args.components), figsize=(5 * len(args.components), 4), squeeze=False)
    for ax, comp in zip(axes[0], args.components):
        for key, g in df.groupby(args.group):
            key = key if isinstance(key, tuple) else (key,)
            label = ", ".join(f"{n}={v:g}" for n, v in zip(args.group, key))
            g = g.sort_values(args.x)
            ax.plot(g[args.x], g[comp], marker="o", label=label)
        ax.set_xlabel(args.x)
        ax.set_ylabel(comp)
        ax.grid(True, alpha=0.3)
    axes[0][-1].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)


if __name__ == "__main__":
    main()
