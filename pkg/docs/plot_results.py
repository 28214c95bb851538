#!/usr/bin/env python3
"""Plot CSV outputs of the anisochill experiments.

Usage: python docs/plot_results.py <output_dir> [--save DIR]

Reads whichever of gamma.csv / sweep.csv / sim.csv / ehrling.csv exist in
the directory and draws one figure per table. The CSVs are the contract;
this script is a convenience viewer and needs matplotlib.
"""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    return header, body


def plot_gamma(path, out):
    header, body = read_csv(path)
    fields = {}
    for row in body:
        fields.setdefault(row[0], []).append((float(row[1]), float(row[4])))
    fig, ax = plt.subplots(figsize=(5, 4))
    for fid, pts in fields.items():
        pts.sort(reverse=True)
        eps = [p[0] for p in pts]
        gaps = [p[1] for p in pts]
        if max(gaps) > 0:
            ax.loglog(eps, gaps, "o-", label=fid)
    ax.set_xlabel("eps")
    ax.set_ylabel("relative energy gap")
    ax.legend()
    ax.set_title("nonlocal-to-local energy gap")
    fig.tight_layout()
    fig.savefig(out / "gamma.png", dpi=150)


def plot_sweep(path, out):
    header, body = read_csv(path)
    eps = [float(r[0]) for r in body]
    l2 = [float(r[1]) for r in body]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(eps, l2, "s-")
    ax.set_xlabel("eps")
    ax.set_ylabel("|| c_eps(T) - c_local(T) ||_2")
    ax.set_title("solution error against the local reference")
    fig.tight_layout()
    fig.savefig(out / "sweep.png", dpi=150)


def plot_sim(path, out):
    header, body = read_csv(path)
    t, energy, slack = [], [], []
    for row in body:
        if row[1] == "":
            continue
        t.append(float(row[0]))
        energy.append(float(row[1]))
        slack.append(float(row[6]))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(t, energy)
    ax1.set_xlabel("t")
    ax1.set_ylabel("E_lambda")
    ax1.set_title("energy decay")
    ax2.semilogy(t, [max(s, 1e-18) for s in slack])
    ax2.set_xlabel("t")
    ax2.set_ylabel("inequality slack")
    ax2.set_title("per-step energy budget slack")
    fig.tight_layout()
    fig.savefig(out / "sim.png", dpi=150)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("directory", type=Path)
    parser.add_argument("--save", type=Path, default=None)
    args = parser.parse_args()
    out = args.save or args.directory
    out.mkdir(parents=True, exist_ok=True)
    made = []
    for name, fn in (("gamma.csv", plot_gamma), ("sweep.csv", plot_sweep),
                     ("sim.csv", plot_sim)):
        path = args.directory / name
        if path.exists():
            fn(path, out)
            made.append(name)
    print(f"plotted {made} into {out}" if made else "no known CSVs found")


if __name__ == "__main__":
    main()
