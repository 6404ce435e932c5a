"""Rolling in-sample/out-of-sample evaluation of selected-rule portfolios.

A window is a block of calendar months: ``is_months`` of look-back data on
which rules are selected (bootstrap p-values, dynamic-lambda selection at the
target rate) followed by ``oos_months`` of evaluation data. Windows roll
forward by ``step_months``; annual aggregates average the windows whose OOS
period *starts* in that calendar year (twelve per year at monthly stepping).

Month boundaries are calendar months mapped onto the trading calendar: a
month's rows are all trading days falling inside it. Selection for window w
derives its bootstrap stream from ``(seed, w)``, so windows are independent,
parallelizable and unaffected by anything outside their in-sample rows.

Portfolios are equal-weight: the daily portfolio excess return is the plain
cross-sectional mean of the members' after-cost excess returns (members that
go neutral contribute their risk-free-benchmark excess automatically).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .backtest import (
    CostModel,
    ExcessReturnPanel,
    Performance,
    cost_charges,
    excess_returns,
    performance,
)
from .bootstrap import BootstrapPlan, Seed, panel_p_values
from .errors import DataError, InsufficientDataError
from .market_data import (
    PriceSeries,
    ReturnSeries,
    RiskFreeSeries,
    StressSeries,
    align,
    forward_fill_to_calendar,
    log_returns,
)
from .mht import DfdrSelection, LambdaGrid, dfdr_procedure
from .rules import REPORT_FAMILIES, SignalMatrix, Universe, generate_signal_matrix

MAX_PERSISTENCE_MONTHS = 18


def _derive_seed(seed: Seed, *parts: int) -> tuple[int, ...]:
    base = seed if isinstance(seed, tuple) else (seed,)
    return base + parts


def prepare_panel(
    prices: PriceSeries,
    rf: RiskFreeSeries,
    universe: Universe,
    cost: CostModel,
) -> tuple[ExcessReturnPanel, SignalMatrix, "ReturnSeries", RiskFreeSeries]:
    """Signals on the full price history, aligned with risk-free quotes.

    Risk-free quotes are forward-filled onto the return calendar before
    alignment (rate series usually skip market holidays). Signal rows are
    subset to the surviving dates after their states were formed, so dropped
    dates never fabricate or shift a position.
    """
    returns = log_returns(prices)
    filled = forward_fill_to_calendar(rf, returns.dates)
    (returns_a, rf_a), _ = align([returns, filled])
    matrix = generate_signal_matrix(universe, prices)
    idx = np.searchsorted(matrix.dates, returns_a.dates)
    matrix_a = SignalMatrix(
        dates=returns_a.dates,
        rules=matrix.rules,
        signals=matrix.signals[idx],
        warmup=matrix.warmup,
    )
    panel = excess_returns(matrix_a, returns_a, rf_a, cost)
    return panel, matrix_a, returns_a, rf_a


@dataclass(frozen=True)
class RollingConfig:
    """Window geometry and selection parameters for the rolling harness."""

    is_months: int = 24
    oos_months: int = 1
    step_months: int = 1
    target: float = 0.10
    cv_target: float = 0.20
    grid_width: float = 0.05
    statistic: str = "sharpe"
    start: np.datetime64 | None = None
    end: np.datetime64 | None = None

    def __post_init__(self):
        if self.is_months < self.oos_months:
            raise DataError("in-sample length must be at least the out-of-sample length")
        if self.step_months < 1:
            raise DataError("step must be at least one month")


@dataclass(frozen=True)
class Window:
    """Row ranges of one IS/OOS split (end indices exclusive)."""

    window_id: int
    is_lo: int
    is_hi: int
    oos_lo: int
    oos_hi: int
    oos_start_month: int  # months since 1970-01


def month_ordinals(dates: np.ndarray) -> np.ndarray:
    """Calendar month index (months since 1970-01) of each date."""
    return dates.astype("datetime64[M]").astype(np.int64)


def enumerate_windows(dates: np.ndarray, cfg: RollingConfig) -> list[Window]:
    """All complete IS+OOS windows inside the data span (and cfg.start/end)."""
    months = month_ordinals(dates)
    first = int(months[0])
    last = int(months[-1])
    if cfg.start is not None:
        first = max(first, int(np.datetime64(cfg.start, "M").astype(np.int64)))
    if cfg.end is not None:
        last = min(last, int(np.datetime64(cfg.end, "M").astype(np.int64)))
    windows: list[Window] = []
    wid = 0
    is_start = first
    while is_start + cfg.is_months + cfg.oos_months - 1 <= last:
        is_end = is_start + cfg.is_months
        oos_end = is_end + cfg.oos_months
        is_lo, is_hi = np.searchsorted(months, [is_start, is_end])
        oos_hi = int(np.searchsorted(months, oos_end))
        if is_hi - is_lo >= 2 and oos_hi - is_hi >= 1:
            windows.append(
                Window(
                    window_id=wid,
                    is_lo=int(is_lo),
                    is_hi=int(is_hi),
                    oos_lo=int(is_hi),
                    oos_hi=oos_hi,
                    oos_start_month=is_end,
                )
            )
            wid += 1
        is_start += cfg.step_months
    return windows


@dataclass(frozen=True)
class PortfolioSeries:
    """Equal-weight daily excess returns of the selected members."""

    dates: np.ndarray
    values: np.ndarray
    members: tuple[int, ...]

    @property
    def is_empty(self) -> bool:
        return len(self.members) == 0


def build_portfolio(
    selection: Sequence[int], panel: ExcessReturnPanel, rows: slice
) -> PortfolioSeries:
    """Cross-sectional mean of the members' excess returns over ``rows``.

    An empty selection yields an empty-portfolio marker (downstream tables
    show a "no survivors" row instead of a return).
    """
    members = tuple(int(j) for j in selection)
    dates = panel.dates[rows]
    if not members:
        return PortfolioSeries(dates=dates, values=np.array([]), members=())
    values = panel.excess[rows, :][:, list(members)].mean(axis=1)
    return PortfolioSeries(dates=dates, values=values, members=members)


def disaggregate_by_family(
    selection: Sequence[int], universe: Universe | Sequence
) -> tuple[float, ...] | None:
    """Percentage of selected rules per family, ordered RSI, FR, MA, SR, CB.

    Percentages total 100; an empty selection returns None (undefined).
    """
    rules = universe.rules if isinstance(universe, Universe) else tuple(universe)
    members = list(selection)
    if not members:
        return None
    families = [rules[j].family for j in members]
    return tuple(100.0 * families.count(f) / len(members) for f in REPORT_FAMILIES)


@dataclass(frozen=True)
class WindowResult:
    """Selection and performance of one rolling window."""

    window_id: int
    is_start: np.datetime64
    is_end: np.datetime64
    oos_start: np.datetime64
    oos_end: np.datetime64
    oos_start_month: int
    selection: DfdrSelection
    is_perf: Performance | None
    oos_perf: Performance | None
    family_pct: tuple[float, ...] | None
    n_rules: int

    @property
    def selected_count(self) -> int:
        return len(self.selection.selected)

    @property
    def is_empty(self) -> bool:
        return self.selected_count == 0

    @property
    def survivor_pct(self) -> float:
        return 100.0 * self.selected_count / self.n_rules

    @property
    def year(self) -> int:
        return int(np.datetime64(self.oos_start, "Y").astype(np.int64)) + 1970


def _map_windows(func: Callable, windows: Sequence[Window], threads: int) -> list:
    if threads <= 1 or len(windows) <= 1:
        return [func(w) for w in windows]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, windows))


def select_window(
    panel: ExcessReturnPanel,
    window: Window,
    plan: BootstrapPlan,
    cfg: RollingConfig,
    target: float | None = None,
    stream: tuple[int, ...] = (),
) -> DfdrSelection:
    """Run the dynamic selection on one window's in-sample rows.

    The bootstrap stream is keyed by (seed, window id[, stream tag]); nothing
    outside rows [is_lo, is_hi) can influence the outcome.
    """
    sub = panel.excess[window.is_lo:window.is_hi]
    wplan = BootstrapPlan(
        b_reps=plan.b_reps,
        expected_block=plan.expected_block,
        seed=_derive_seed(plan.seed, window.window_id, *stream),
    )
    pvals = panel_p_values(sub, wplan, cfg.statistic)
    return dfdr_procedure(pvals, target if target is not None else cfg.target,
                          grid_width=cfg.grid_width)


def rolling_evaluate(
    cfg: RollingConfig,
    panel: ExcessReturnPanel,
    plan: BootstrapPlan,
    universe: Universe | None = None,
    threads: int = 1,
) -> list[WindowResult]:
    """Select on each IS window and evaluate the portfolio IS and OOS."""
    windows = enumerate_windows(panel.dates, cfg)
    if not windows:
        raise InsufficientDataError(
            f"data span too short for {cfg.is_months}+{cfg.oos_months} month windows"
        )
    rules = universe.rules if universe is not None else panel.rules

    def run(window: Window) -> WindowResult:
        sel = select_window(panel, window, plan, cfg)
        is_rows = slice(window.is_lo, window.is_hi)
        oos_rows = slice(window.oos_lo, window.oos_hi)
        is_perf = oos_perf = None
        family_pct = None
        if sel.selected:
            is_perf = performance(build_portfolio(sel.selected, panel, is_rows).values)
            oos_perf = performance(build_portfolio(sel.selected, panel, oos_rows).values)
            if rules:
                family_pct = disaggregate_by_family(sel.selected, rules)
        return WindowResult(
            window_id=window.window_id,
            is_start=panel.dates[window.is_lo],
            is_end=panel.dates[window.is_hi - 1],
            oos_start=panel.dates[window.oos_lo],
            oos_end=panel.dates[window.oos_hi - 1],
            oos_start_month=window.oos_start_month,
            selection=sel,
            is_perf=is_perf,
            oos_perf=oos_perf,
            family_pct=family_pct,
            n_rules=panel.n_rules,
        )

    return _map_windows(run, windows, threads)


def annual_aggregate(
    results: Iterable[WindowResult], empty_policy: str = "exclude"
) -> list[dict]:
    """Average window metrics by the calendar year their OOS starts in.

    ``empty_policy`` controls no-survivor windows: ``"exclude"`` drops them
    from the return/Sharpe means (they still count in ``windows``);
    ``"risk_free"`` counts them as a zero-excess (risk-free) portfolio.
    """
    if empty_policy not in ("exclude", "risk_free"):
        raise DataError(f"unknown empty_policy {empty_policy!r}")
    by_year: dict[int, list[WindowResult]] = {}
    for res in results:
        by_year.setdefault(res.year, []).append(res)
    rows = []
    for year in sorted(by_year):
        group = by_year[year]
        returns, sharpes = [], []
        for res in group:
            if res.oos_perf is not None:
                returns.append(res.oos_perf.annualized_return)
                if not math.isnan(res.oos_perf.annualized_sharpe):
                    sharpes.append(res.oos_perf.annualized_sharpe)
            elif empty_policy == "risk_free":
                returns.append(0.0)
        pct = [res.survivor_pct for res in group]
        rows.append(
            {
                "year": year,
                "windows": len(group),
                "empty_windows": sum(res.is_empty for res in group),
                "oos_annualized_return": float(np.mean(returns)) if returns else math.nan,
                "oos_annualized_sharpe": float(np.mean(sharpes)) if sharpes else math.nan,
                "survivor_pct_mean": float(np.mean(pct)),
                "survivor_pct_std": float(np.std(pct, ddof=1)) if len(pct) > 1 else 0.0,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def count_leading_positive(block_values: Sequence[float]) -> int:
    """Length of the leading run of blocks with excess strictly above zero."""
    count = 0
    for value in block_values:
        if not (value > 0):  # NaN or non-positive stops the run
            break
        count += 1
    return count


def persistence(block_values_per_portfolio: Iterable[Sequence[float]]) -> float:
    """Mean leading-run count over portfolios (the Table-style persistence score)."""
    counts = [count_leading_positive(blocks) for blocks in block_values_per_portfolio]
    if not counts:
        return math.nan
    return float(np.mean(counts))


@dataclass(frozen=True)
class PersistenceRow:
    window_id: int
    year: int
    blocks: tuple[float, ...]
    count: int


def persistence_blocks(
    panel: ExcessReturnPanel,
    results: Sequence[WindowResult],
    horizon_months: int,
    max_months: int = MAX_PERSISTENCE_MONTHS,
) -> list[PersistenceRow]:
    """Portfolio mean excess over consecutive ``horizon_months`` blocks.

    Blocks are non-overlapping, start at each window's OOS start and stop at
    ``max_months`` of OOS or the end of data, whichever comes first. Windows
    with no survivors are skipped (no portfolio to roll forward).
    """
    months = month_ordinals(panel.dates)
    rows: list[PersistenceRow] = []
    n_blocks_cap = max_months // horizon_months
    for res in results:
        if res.is_empty:
            continue
        blocks: list[float] = []
        for k in range(n_blocks_cap):
            lo_m = res.oos_start_month + k * horizon_months
            hi_m = lo_m + horizon_months
            lo, hi = np.searchsorted(months, [lo_m, hi_m])
            if hi <= lo or int(months[-1]) < hi_m - 1:
                break
            block = build_portfolio(res.selection.selected, panel, slice(int(lo), int(hi)))
            blocks.append(float(np.mean(block.values)))
        rows.append(
            PersistenceRow(
                window_id=res.window_id,
                year=res.year,
                blocks=tuple(blocks),
                count=count_leading_positive(blocks),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossValResult:
    """Intersection of IS-selected+OOS-profitable rules with full-sample survivors."""

    window_id: int
    year: int
    is_selected: tuple[int, ...]
    oos_profitable: tuple[int, ...]
    full_sample: tuple[int, ...]
    intersection: tuple[int, ...]
    pct_of_is: float
    oos_perf: Performance | None


def cross_validate(
    cfg: RollingConfig,
    panel: ExcessReturnPanel,
    plan: BootstrapPlan,
    threads: int = 1,
) -> list[CrossValResult]:
    """Per window: IS selection at the base target, filtered to OOS-profitable
    members, intersected with a full-sample (IS+OOS) selection at the more
    lenient ``cfg.cv_target``; the intersection portfolio is evaluated OOS.
    """
    windows = enumerate_windows(panel.dates, cfg)
    if not windows:
        raise InsufficientDataError("data span too short for cross-validation windows")

    def run(window: Window) -> CrossValResult:
        oos_rows = slice(window.oos_lo, window.oos_hi)
        is_sel = select_window(panel, window, plan, cfg)
        profitable: tuple[int, ...] = ()
        if is_sel.selected:
            oos_means = panel.excess[oos_rows, :][:, list(is_sel.selected)].mean(axis=0)
            profitable = tuple(
                j for j, m in zip(is_sel.selected, oos_means) if m > 0
            )
        full_window = Window(
            window_id=window.window_id,
            is_lo=window.is_lo,
            is_hi=window.oos_hi,  # IS+OOS concatenated
            oos_lo=window.oos_lo,
            oos_hi=window.oos_hi,
            oos_start_month=window.oos_start_month,
        )
        full_sel = select_window(panel, full_window, plan, cfg, target=cfg.cv_target, stream=(1,))
        inter = tuple(sorted(set(profitable) & set(full_sel.selected)))
        oos_perf = (
            performance(build_portfolio(inter, panel, oos_rows).values) if inter else None
        )
        pct = (
            100.0 * len(inter) / len(is_sel.selected) if is_sel.selected else math.nan
        )
        year = int(np.datetime64(panel.dates[window.oos_lo], "Y").astype(np.int64)) + 1970
        return CrossValResult(
            window_id=window.window_id,
            year=year,
            is_selected=is_sel.selected,
            oos_profitable=profitable,
            full_sample=full_sel.selected,
            intersection=inter,
            pct_of_is=pct,
            oos_perf=oos_perf,
        )

    return _map_windows(run, windows, threads)


# ---------------------------------------------------------------------------
# Stress conditioning
# ---------------------------------------------------------------------------


def classify_stress(
    results: Sequence[WindowResult],
    stress: StressSeries,
    rule: str = "sign",
) -> dict[int, str]:
    """Label each window ``"high"``/``"low"`` by the stress level of the month
    preceding its OOS start; windows without stress coverage get ``"uncovered"``.

    ``rule="sign"`` splits at zero (the stress index's neutral line);
    ``rule="median"`` splits at the median of the covered windows' values.
    """
    if rule not in ("sign", "median"):
        raise DataError(f"unknown stress classification rule {rule!r}")
    stress_months = month_ordinals(stress.dates)
    month_means: dict[int, float] = {}
    for res in results:
        prior = res.oos_start_month - 1
        lo, hi = np.searchsorted(stress_months, [prior, prior + 1])
        if hi > lo:
            month_means[res.window_id] = float(np.mean(stress.values[lo:hi]))
    threshold = 0.0
    if rule == "median" and month_means:
        threshold = float(np.median(list(month_means.values())))
    labels: dict[int, str] = {}
    for res in results:
        if res.window_id not in month_means:
            labels[res.window_id] = "uncovered"
        else:
            labels[res.window_id] = (
                "high" if month_means[res.window_id] > threshold else "low"
            )
    return labels


def stress_split(
    results: Sequence[WindowResult],
    stress: StressSeries,
    rule: str = "sign",
    empty_policy: str = "exclude",
) -> dict[str, list[dict]]:
    """Annual aggregates computed separately under high and low stress."""
    labels = classify_stress(results, stress, rule)
    split = {"high": [], "low": []}
    for res in results:
        label = labels[res.window_id]
        if label in split:
            split[label].append(res)
    return {
        label: annual_aggregate(group, empty_policy=empty_policy)
        for label, group in split.items()
    }
