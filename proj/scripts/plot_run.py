#!/usr/bin/env python3
"""Render the TSV tables written by `stratsim run` as PNGs.

Usage: plot_run.py <run-output-dir> [--out <dir>]

Reads loss_vs_step.tsv and usage_vs_step.tsv and writes loss_vs_step.png /
usage_vs_step.png. Rendering is a convenience; everything asserted by the
test suite lives in the tables themselves.
"""

import argparse
import csv
import pathlib
import sys


def read_table(path):
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle, delimiter="\t"))
    header, body = rows[0], rows[1:]
    columns = {name: [float(r[k]) for r in body] for k, name in enumerate(header)}
    return header, columns


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("run_dir", type=pathlib.Path)
    parser.add_argument("--out", type=pathlib.Path, default=None)
    args = parser.parse_args()
    out_dir = args.out or args.run_dir

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        sys.exit("matplotlib is required for rendering (pip install matplotlib)")

    for stem, ylabel in (("loss_vs_step", "usage-weighted loss"),
                         ("usage_vs_step", "usage total")):
        table = args.run_dir / f"{stem}.tsv"
        if not table.exists():
            sys.exit(f"{table} not found; point me at a run output directory")
        header, columns = read_table(table)
        steps = columns["step"]
        fig, ax = plt.subplots(figsize=(7, 4))
        for name in header[1:]:
            style = "--" if name.endswith("_neg") else "-"
            ax.plot(steps, columns[name], style, label=name)
        ax.set_xlabel("step")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)
        fig.tight_layout()
        target = out_dir / f"{stem}.png"
        fig.savefig(target, dpi=120)
        print(f"wrote {target}")


if __name__ == "__main__":
    main()
