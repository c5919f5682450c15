#!/usr/bin/env python3
"""Plot whatever eitshape outputs are present in a directory.

usage: python3 plot_results.py [DIR]    (needs matplotlib)
"""
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def rows(path):
    with open(path) as f:
        return list(csv.DictReader(line for line in f if not line.startswith("#")))


def save(fig, out, name):
    fig.tight_layout()
    fig.savefig(os.path.join(out, name), dpi=150)
    plt.close(fig)
    print("wrote", name)


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))
    have = lambda name: os.path.exists(os.path.join(out, name))

    if have("voltages.csv"):
        r = rows(os.path.join(out, "voltages.csv"))
        fig, ax = plt.subplots()
        ax.bar([x["measurement"] for x in r], [float(x["voltage"]) * 1e3 for x in r])
        ax.set_xlabel("measurement")
        ax.set_ylabel("voltage (mV)")
        save(fig, out, "voltages.png")

    if have("frames.csv"):
        r = rows(os.path.join(out, "frames.csv"))
        keys = [k for k in r[0] if k.startswith("m")]
        t = [float(x["timestamp"]) for x in r]
        fig, ax = plt.subplots()
        for k in keys:
            ax.plot(t, [float(x[k]) * 1e3 for x in r], label=k)
        ax.set_xlabel("time (s)")
        ax.set_ylabel("in-phase voltage (mV)")
        ax.legend(ncol=3, fontsize="small")
        save(fig, out, "frames.png")

    if have("snr.csv"):
        r = rows(os.path.join(out, "snr.csv"))
        fig, ax = plt.subplots()
        ax.bar([x["measurement"] for x in r], [float(x["snr_db"]) for x in r])
        ax.set_xlabel("measurement")
        ax.set_ylabel("SNR (dB)")
        save(fig, out, "snr.png")

    if have("dv.csv"):
        r = rows(os.path.join(out, "dv.csv"))
        keys = [k for k in r[0] if k.startswith("m")]
        fig, ax = plt.subplots()
        for k in keys:
            ax.plot(range(len(r)), [float(x[k]) * 1e3 for x in r], marker="o", label=k)
        ax.set_xticks(range(len(r)))
        ax.set_xticklabels([x["state"] for x in r], rotation=90, fontsize="x-small")
        ax.set_ylabel("voltage change (mV)")
        ax.legend(ncol=3, fontsize="small")
        save(fig, out, "dv.png")

    if have("cv_scores.csv"):
        r = rows(os.path.join(out, "cv_scores.csv"))
        fig, ax = plt.subplots()
        ax.loglog([float(x["relative_lambda"]) for x in r], [float(x["score"]) for x in r])
        ax.set_xlabel("lambda / s_max^2")
        ax.set_ylabel("CV error")
        save(fig, out, "cv_scores.png")

    if have("phantom.csv"):
        r = rows(os.path.join(out, "phantom.csv"))
        fig, ax = plt.subplots()
        for load in sorted({x["load_ohm"] for x in r}, key=float):
            sel = [x for x in r if x["load_ohm"] == load]
            ax.plot([float(x["frequency_hz"]) / 1e3 for x in sel],
                    [float(x["estimate_ohm"]) / float(load) for x in sel], marker="o", label=f"{load} ohm")
        ax.set_xlabel("frequency (kHz)")
        ax.set_ylabel("estimate / true load")
        ax.legend()
        save(fig, out, "phantom.png")


if __name__ == "__main__":
    main()
