"""Figure rendering for the CLI report paths.

Every function takes already-computed table rows and writes one PNG next to
the delimited output. Rendering is optional (the ``--figures`` flag); the
CSV files remain the primary interface.
"""

from __future__ import annotations

import math
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_DPI = 150


def _finish(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def pvalue_histogram(support: Sequence[float], counts: Sequence[int], path: str) -> str:
    """Bar chart of the discrete p-value distribution on its support points."""
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / max(len(support), 1)
    ax.bar(list(support), list(counts), width=width, color="#33557a")
    ax.set_xlabel("p-value support point")
    ax.set_ylabel("rules")
    ax.set_title("Discrete p-value distribution")
    return _finish(fig, path)


def annual_returns(rows: Sequence[dict], path: str, market: str = "") -> str:
    """Bars of annual mean OOS excess return with the survivor share overlaid."""
    years = [r["year"] for r in rows]
    rets = [100 * r["oos_annualized_return"] for r in rows]
    pct = [r["survivor_pct_mean"] for r in rows]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(years, rets, color=["#2d7a3a" if not math.isnan(v) and v >= 0 else "#a03030" for v in rets])
    ax.set_ylabel("annualized OOS excess return (%)")
    ax.set_xlabel("year")
    ax2 = ax.twinx()
    ax2.plot(years, pct, "o-", color="#555555", linewidth=1)
    ax2.set_ylabel("survivors (% of universe)")
    title = "Rolling out-of-sample performance"
    if market:
        title += f" - {market}"
    ax.set_title(title)
    return _finish(fig, path)


def breakeven_by_year(rows: Sequence[dict], path: str, market: str = "") -> str:
    """Average break-even one-way cost of the best in-sample rule, by year."""
    years = [r["year"] for r in rows]
    values = [100 * r["breakeven_mean"] for r in rows]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(years, values, "o-", color="#33557a")
    ax.set_xlabel("year")
    ax.set_ylabel("break-even one-way cost (%)")
    title = "Break-even transaction cost of the best in-sample rule"
    if market:
        title += f" - {market}"
    ax.set_title(title)
    return _finish(fig, path)


def power_comparison(method_rows: Sequence[dict], target: float, path: str) -> str:
    """Grouped bars: discovery power by Sharpe pair for the competing methods."""
    pairs = sorted({(r["sr_pos"], r["sr_neg"]) for r in method_rows})
    labels = [f"({sp:g},{sn:g})" for sp, sn in pairs]
    fig, ax = plt.subplots(figsize=(9, 4))
    methods = ["dfdr", "storey"]
    colors = {"dfdr": "#2d7a3a", "storey": "#7a5a2d"}
    width = 0.35
    for k, method in enumerate(methods):
        vals = []
        for pair in pairs:
            row = next(
                r for r in method_rows
                if (r["sr_pos"], r["sr_neg"]) == pair
                and r["method"] == method and r["target"] == target
            )
            vals.append(100 * row["power"])
        ax.bar(
            [i + (k - 0.5) * width for i in range(len(pairs))],
            vals,
            width=width,
            label=method,
            color=colors[method],
        )
    ax.set_xticks(range(len(pairs)))
    ax.set_xticklabels(labels)
    ax.set_xlabel("planted Sharpe pair")
    ax.set_ylabel("power (%)")
    ax.set_title(f"Discovery power at the {target:.0%} false-discovery target")
    ax.legend()
    return _finish(fig, path)


def realized_fdr(method_rows: Sequence[dict], target: float, path: str) -> str:
    """Realized false discovery rate per pair vs. the requested target line."""
    pairs = sorted({(r["sr_pos"], r["sr_neg"]) for r in method_rows})
    labels = [f"({sp:g},{sn:g})" for sp, sn in pairs]
    vals = []
    for pair in pairs:
        row = next(
            r for r in method_rows
            if (r["sr_pos"], r["sr_neg"]) == pair
            and r["method"] == "dfdr" and r["target"] == target
        )
        vals.append(100 * row["fdr_formula"])
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.bar(range(len(pairs)), vals, color="#33557a", width=0.6)
    ax.axhline(100 * target, color="#a03030", linestyle="--", label="target")
    ax.set_xticks(range(len(pairs)))
    ax.set_xticklabels(labels)
    ax.set_xlabel("planted Sharpe pair")
    ax.set_ylabel("realized FDR (%)")
    ax.set_title("Realized false discovery rate of the dynamic procedure")
    ax.legend()
    return _finish(fig, path)
