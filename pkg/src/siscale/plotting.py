"""PNG figures for the CLI artifacts (matplotlib, Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {"figure.figsize": (5.0, 3.6), "font.size": 9, "axes.grid": True, "grid.alpha": 0.3}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_frontiers(fronts: dict, path, title=None):
    """Sum-rate envelopes r_sum(r1) of several bounds on one set of axes."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for name, fr in fronts.items():
            ax.step(fr.r1, fr.r_sum, where="post", marker=".", label=name)
        ax.set_xlabel("R1 [bits]")
        ax.set_ylabel("R1 + R2 [bits]")
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_dsbs_sweep(rows: list, path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for d2 in sorted({r["D2"] for r in rows}):
            sel = [r for r in rows if r["D2"] == d2 and r["R_HB"] is not None]
            if sel:
                ax.plot([r["D1"] for r in sel], [r["R_HB"] for r in sel], marker="o", label=f"R_HB, D2={d2:g}")
        d1s = sorted({r["D1"] for r in rows})
        wz = {r["D1"]: r["R_WZ"] for r in rows}
        ax.plot(d1s, [wz[d] for d in d1s], "k--", label="R_WZ(D1)")
        ax.set_xlabel("D1")
        ax.set_ylabel("rate [bits]")
        ax.legend(fontsize=7)
        return _save(fig, path)


def plot_cover_grid(grid, path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        im = ax.imshow(grid.cells, origin="lower", cmap="viridis")
        n = grid.N
        ax.set_xticks(range(n), [str(j + 1) for j in range(n)])
        ax.set_yticks(range(n), [str(i + 1) for i in range(n)])
        ax.set_xlabel("side-information level j")
        ax.set_ylabel("auxiliary rank i")
        fig.colorbar(im, ax=ax, label="bits")
        return _save(fig, path)


def plot_rateloss(rows: list, path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        g1 = np.array([r["gap_r1"] for r in rows])
        gs = np.array([r["gap_sum"] for r in rows])
        ax.scatter(g1, gs, s=8)
        ax.axvline(0.5, color="r", ls="--", lw=0.8)
        ax.axhline(1.0, color="r", ls="--", lw=0.8)
        ax.set_xlabel("R1 gap [bits]")
        ax.set_ylabel("sum-rate gap [bits]")
        return _save(fig, path)


def plot_trend(rows: list, path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.plot([r["n"] for r in rows], [r["error_frequency"] for r in rows], marker="o")
        ax.set_xlabel("blocklength n")
        ax.set_ylabel("error frequency")
        ax.set_ylim(-0.02, 1.02)
        return _save(fig, path)
