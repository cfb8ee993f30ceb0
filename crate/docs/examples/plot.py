"""Quick-look plots for btc output directories.

    python docs/examples/plot.py OUTDIR [OUTDIR ...]

Every CSV found in each directory is plotted against its first column and
saved next to it as a PNG.
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

# columns worth a log-log view when the run is critical
LOG_COLUMNS = {"qdot", "Sdot"}


def plot_csv(path: Path) -> None:
    df = pd.read_csv(path)
    x = df.columns[0]
    cols = [c for c in df.columns[1:] if df[c].notna().any()]
    fig, axes = plt.subplots(len(cols), 1, figsize=(6, 2.2 * len(cols)), sharex=True, squeeze=False)
    for ax, c in zip(axes[:, 0], cols):
        if path.name.startswith("ep_"):
            ax.vlines(df[x], 0, df[c])
            ax.axhline(0, color="k", lw=0.5)
        else:
            ax.plot(df[x], df[c])
        ax.set_ylabel(c)
    axes[-1, 0].set_xlabel(x)
    fig.tight_layout()
    fig.savefig(path.with_suffix(".png"), dpi=120)
    plt.close(fig)

    if x == "t" and LOG_COLUMNS & set(cols):
        late = df[df[x] > 0]
        fig, ax = plt.subplots(figsize=(5, 4))
        for c in sorted(LOG_COLUMNS & set(cols)):
            y = (late[c] - late[c].iloc[-1]).abs()
            ax.loglog(late[x], y, label=f"|{c} - final|")
        ax.set_xlabel(x)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path.with_name(path.stem + "_loglog.png"), dpi=120)
        plt.close(fig)


def main(dirs: list[str]) -> None:
    for d in dirs:
        for csv in sorted(Path(d).glob("*.csv")):
            plot_csv(csv)
            print(f"plotted {csv}")


if __name__ == "__main__":
    main(sys.argv[1:])
