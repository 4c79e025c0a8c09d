"""Figures for bench reports, written next to the JSON/CSV output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

COLORS = {"original": "#555555", "full": "#1f77b4", "casf": "#ff7f0e"}


def _ok(v) -> bool:
    return v.get("status") == "ok"


def plot_report(report: dict, path) -> Path:
    """Firings and median wall time per variant, side by side, log scale."""
    variants = report["variants"]
    names = [v["variant"] for v in variants]
    colors = [COLORS.get(n, "#2ca02c") for n in names]
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.2))
    for ax, key, label in ((axes[0], "rule_firings", "rule firings"),
                           (axes[1], "wall_time_median", "evaluation time [s]")):
        values = [v[key] if _ok(v) and v[key] else 0 for v in variants]
        bars = ax.bar(names, [max(x, 1e-6) for x in values], color=colors)
        for bar, v in zip(bars, variants):
            if not _ok(v):
                bar.set_hatch("//")
                ax.annotate(v["status"], (bar.get_x() + bar.get_width() / 2, 1e-6),
                            ha="center", va="bottom", fontsize=7, rotation=90)
        ax.set_yscale("log")
        ax.set_ylabel(label)
    fig.suptitle(report["name"], fontsize=10)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_scaling(reports: list[dict], path, key: str = "rule_firings", xkey: str | None = None) -> Path:
    """One line per variant across a suite of reports."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    series: dict[str, list] = {}
    for i, rep in enumerate(reports):
        params = rep.get("params", {})
        x = params.get(xkey) if xkey else next(iter(params.values()), i)
        for v in rep["variants"]:
            if _ok(v) and v.get(key) is not None:
                series.setdefault(v["variant"], []).append((x, v[key]))
    for name, pts in series.items():
        pts.sort()
        ax.plot([p[0] for p in pts], [max(p[1], 1e-9) for p in pts], marker="o",
                color=COLORS.get(name), label=name)
    ax.set_yscale("log")
    ax.set_xlabel(xkey or "size")
    ax.set_ylabel(key.replace("_", " "))
    ax.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_iterations(rows: list[dict], path) -> Path:
    """Filter passes against size, with 2^size for reference."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    modes = sorted({r["mode"] for r in rows})
    for mode in modes:
        pts = sorted((r["size"], r["iteration_count"]) for r in rows if r["mode"] == mode)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", color=COLORS.get(mode), label=mode)
    sizes = sorted({r["size"] for r in rows})
    ax.plot(sizes, [2 ** s for s in sizes], ls="--", color="#999999", label="2^size")
    ax.set_yscale("log", base=2)
    ax.set_xlabel("size")
    ax.set_ylabel("passes")
    ax.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
