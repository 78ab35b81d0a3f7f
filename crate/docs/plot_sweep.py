"""Plot `harq sweep` output: energy against the swept parameter, one line per method.

    harq --snr 10 sweep --parameter snr --values 10:50:2 --out sweep.csv
    python docs/plot_sweep.py sweep.csv energy
"""
import sys

import matplotlib.pyplot as plt
import pandas as pd


def main():
    path = sys.argv[1]
    column = sys.argv[2] if len(sys.argv) > 2 else "energy"
    df = pd.read_csv(path, comment="#")
    df = df[df["feasible"]]
    for method, group in df.groupby("method"):
        plt.plot(group["x"], group[column], marker="o", label=method)
    plt.xlabel("x")
    plt.ylabel(column)
    plt.legend()
    plt.grid(True, alpha=0.3)
    plt.show()


if __name__ == "__main__":
    main()
