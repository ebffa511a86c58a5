"""SVG plots built from experiment CSV rows."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .diagnostics import read_rows  # noqa: E402

# Stable element ids so identical inputs give identical SVG bytes.
plt.rcParams["svg.hashsalt"] = "inviscid"
plt.rcParams["svg.fonttype"] = "path"
_META = {"Date": None, "Creator": None}


def _series(rows, quantity_prefix):
    """{quantity: [(nu, time, value), ...]} for rows whose name starts with the prefix."""
    out = defaultdict(list)
    for _, t, nu, name, value in rows:
        if name.startswith(quantity_prefix):
            out[name].append((nu, t, value))
    return out


def _save(fig, path):
    path = Path(path)
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def plot_error_vs_nu(rows, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, pts in sorted(_series(rows, "sup_error").items()):
        pts = sorted(p for p in pts if p[0] > 0)
        ax.loglog([p[0] for p in pts], [p[2] for p in pts], "o-", label=name.replace("sup_error_", ""))
    ax.set_xlabel("nu")
    ax.set_ylabel("sup_t error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_w1_vs_nu(rows, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    pts = _series(rows, "W1").get("W1", [])
    t_end = max((p[1] for p in pts), default=0.0)
    final = sorted((p[0], p[2]) for p in pts if p[1] == t_end and p[0] > 0)
    ax.loglog([p[0] for p in final], [p[1] for p in final], "o-")
    ax.set_xlabel("nu")
    ax.set_ylabel(f"W1 at t = {t_end:g}")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_besov_vs_t(rows, path):
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, pts in sorted(_series(rows, "besov").items()):
        by_nu = defaultdict(list)
        for nu, t, v in pts:
            by_nu[nu].append((t, v))
        for nu in sorted(by_nu, reverse=True):
            tv = sorted(by_nu[nu])
            ax.semilogy([p[0] for p in tv], [p[1] for p in tv], label=f"{name} nu={nu:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("Besov seminorm")
    ax.legend(fontsize=6)
    return _save(fig, path)


PLOTS = {
    "E1": [("error_vs_nu", plot_error_vs_nu)],
    "E2": [("w1_vs_nu", plot_w1_vs_nu)],
    "E4": [("besov_vs_t", plot_besov_vs_t)],
}


def write_report(out_dir) -> list:
    """Render every plot whose source CSV exists in ``out_dir``; returns written paths."""
    out_dir = Path(out_dir)
    written = []
    for exp, plots in PLOTS.items():
        csv = out_dir / f"{exp}.csv"
        if not csv.exists():
            continue
        rows = read_rows(csv)
        for name, fn in plots:
            written.append(fn(rows, out_dir / f"{exp}_{name}.svg"))
    return written
