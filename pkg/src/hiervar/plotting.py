"""Figures for the report paths of the CLI.  Rendering is file-only (Agg)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _figure(width=6.0, height=None):
    golden = (np.sqrt(5) - 1.0) / 2.0
    fig, ax = plt.subplots(figsize=(width, height or width * golden))
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_fscore_curve(f_scores, stage1, threshold, path, title=None):
    """Descending F-scores with first-stage members highlighted and the cut line."""
    f = np.asarray(f_scores, dtype=float)
    members = np.zeros(f.size, dtype=bool)
    members[np.asarray(stage1, dtype=int)] = True
    order = np.argsort(-f, kind="stable")
    finite_max = f[np.isfinite(f)].max() if np.isfinite(f).any() else 1.0
    shown = np.where(np.isfinite(f[order]), f[order], finite_max)
    rank = np.arange(1, f.size + 1)

    fig, ax = _figure()
    ax.plot(rank, shown, color="0.6", lw=1, label="all features")
    sel = members[order]
    ax.scatter(rank[sel], shown[sel], s=6, color="tab:blue", label="first-stage selected", zorder=3)
    ax.axhline(threshold, color="tab:red", ls="--", lw=1, label=f"threshold {threshold:.3g}")
    ax.set_yscale("symlog", linthresh=max(threshold, 1e-3))
    ax.set_xlabel("rank")
    ax.set_ylabel("F-score")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    _save(fig, path)


def plot_d_sweep(rows, path, title=None):
    """Selected feature count against the divider."""
    d = [r[0] for r in rows]
    counts = [r[1] for r in rows]
    fig, ax = _figure()
    ax.plot(d, counts, marker="o")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("divider d")
    ax.set_ylabel("selected features")
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_knee(magnitudes, knee_index, path, title=None):
    fig, ax = _figure()
    ax.plot(np.arange(len(magnitudes)), magnitudes, lw=1)
    if knee_index is not None:
        ax.axvline(knee_index, color="tab:red", ls="--", lw=1, label=f"knee {knee_index}")
        ax.legend(frameon=False, fontsize=8)
    ax.set_xlabel("sorted position")
    ax.set_ylabel("|coefficient|")
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_suite(aggregates, path):
    """Per-config mean accuracy against mean feature count, one marker per dataset."""
    rows = [r for r in aggregates if r.get("dataset") != "ALL" and r.get("runs")]
    fig, ax = _figure(7.0)
    configs = sorted({r["config"] for r in rows})
    for i, cfg in enumerate(configs):
        sub = [r for r in rows if r["config"] == cfg]
        ax.scatter([r["after_hiervar"] for r in sub],
                   [100 * r["selected_accuracy"] for r in sub],
                   label=cfg, color=f"C{i}", s=18)
    base = {r["dataset"]: (r["K"], r["baseline_accuracy"]) for r in rows}
    if base:
        k, acc = zip(*base.values())
        ax.scatter(k, [100 * a for a in acc], marker="x", color="k", label="baseline (all K)")
    ax.set_xscale("log")
    ax.set_xlabel("features used")
    ax.set_ylabel("test accuracy (%)")
    ax.legend(frameon=False, fontsize=8)
    _save(fig, path)
