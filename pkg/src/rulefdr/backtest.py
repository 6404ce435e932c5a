"""Turn lagged signals into after-cost excess returns and performance metrics.

Daily excess return of rule j::

    excess[t, j] = s[t, j] * r[t] - I[t, j] * tc - ln(1 + rf[t])

where ``s`` is the lagged position matrix, ``r`` the log return, ``tc`` the
one-way proportional transaction cost in return units and ``I`` the closure
indicator. ``I[t, j] = 1`` exactly when the position leaves a nonzero state
at t; the cost is charged on the day the new state first applies. A direct
reversal (-1 to +1 or back) is one closure by default - the new leg pays its
own cost when it eventually closes - with a two-way variant behind a flag.

The benchmark is the risk-free rate: a rule that stays neutral earns exactly
``-ln(1 + rf[t])`` per day, i.e. zero relative to parking wealth in the
risk-free asset.

Undefined quantities (Sharpe ratio of a zero-variance window, break-even cost
of a window without closures) are reported as NaN, never as infinities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, InsufficientDataError
from .market_data import TRADING_DAYS_PER_YEAR, ReturnSeries, RiskFreeSeries
from .rules import RuleSpec, SignalMatrix


@dataclass(frozen=True)
class CostModel:
    """One-way proportional transaction cost, as a decimal fraction.

    ``reversal_two_way=True`` charges a reversal as close-plus-open (2 * tc)
    instead of the default single closure.
    """

    tc: float = 0.0025
    reversal_two_way: bool = False

    def __post_init__(self):
        if self.tc < 0:
            raise DataError("transaction cost must be non-negative")


@dataclass(frozen=True)
class ExcessReturnPanel:
    """Daily after-cost excess returns for every rule.

    ``closures`` is the 0/1 closure indicator matrix; ``n_usable[j]`` counts
    the rows at or past rule j's warmup (informational; means are taken over
    whole windows so the risk-free benchmark identity stays exact).
    """

    dates: np.ndarray
    rules: tuple[RuleSpec, ...]
    excess: np.ndarray
    closures: np.ndarray
    n_usable: np.ndarray

    @property
    def n_days(self) -> int:
        return self.excess.shape[0]

    @property
    def n_rules(self) -> int:
        return self.excess.shape[1]


def closure_indicators(signals: np.ndarray) -> np.ndarray:
    """0/1 matrix marking rows where a nonzero position changes state.

    The state before the first row is neutral, so row 0 never closes anything.
    """
    signals = np.asarray(signals)
    prev = np.zeros_like(signals)
    prev[1:] = signals[:-1]
    return ((prev != 0) & (signals != prev)).astype(np.int8)


def reversal_indicators(signals: np.ndarray) -> np.ndarray:
    """0/1 matrix marking direct sign flips (-1 to +1 or +1 to -1)."""
    signals = np.asarray(signals)
    prev = np.zeros_like(signals)
    prev[1:] = signals[:-1]
    return ((prev != 0) & (signals == -prev)).astype(np.int8)


def cost_charges(signals: np.ndarray, cost: CostModel) -> np.ndarray:
    """Per-day count of one-way costs charged (closures, plus reversal extras)."""
    charges = closure_indicators(signals).astype(np.int64)
    if cost.reversal_two_way:
        charges = charges + reversal_indicators(signals)
    return charges


def excess_returns(
    signals: SignalMatrix,
    returns: ReturnSeries,
    rf: RiskFreeSeries,
    cost: CostModel,
) -> ExcessReturnPanel:
    """Build the T x l panel of daily after-cost excess returns."""
    if signals.n_days != len(returns) or len(returns) != len(rf):
        raise DataError(
            f"misaligned inputs: {signals.n_days} signal rows, "
            f"{len(returns)} returns, {len(rf)} risk-free rows"
        )
    if not (
        np.array_equal(signals.dates, returns.dates)
        and np.array_equal(returns.dates, rf.dates)
    ):
        raise DataError("signals, returns and risk-free series must share one calendar")
    s = signals.signals
    log_rf = np.log1p(rf.daily_rate)
    charges = cost_charges(s, cost)
    excess = s * returns.values[:, None] - charges * cost.tc - log_rf[:, None]
    n_usable = signals.n_days - np.minimum(signals.warmup, signals.n_days)
    return ExcessReturnPanel(
        dates=signals.dates,
        rules=signals.rules,
        excess=excess,
        closures=closure_indicators(s),
        n_usable=n_usable,
    )


@dataclass(frozen=True)
class Performance:
    """Window performance summary; Sharpe fields are NaN when undefined."""

    mean_excess: float
    stdev: float
    sharpe: float
    annualized_return: float
    annualized_sharpe: float


def performance(excess: np.ndarray, trading_days: int = TRADING_DAYS_PER_YEAR) -> Performance:
    """Mean / sample stdev (n-1) / Sharpe for one window of daily excess returns."""
    x = np.asarray(excess, dtype=float)
    if x.ndim != 1:
        raise DataError("performance expects a single excess-return column")
    if len(x) < 2:
        raise InsufficientDataError("performance window needs at least 2 observations")
    mean = float(np.mean(x))
    stdev = float(np.std(x, ddof=1))
    sharpe = mean / stdev if stdev > 0 else math.nan
    return Performance(
        mean_excess=mean,
        stdev=stdev,
        sharpe=sharpe,
        annualized_return=mean * trading_days,
        annualized_sharpe=sharpe * math.sqrt(trading_days),
    )


def break_even_tc(
    signals: np.ndarray,
    returns: np.ndarray,
    rf_daily: np.ndarray,
    charges: np.ndarray | None = None,
) -> float:
    """One-way cost that zeroes the window's mean excess return.

    The mean excess is affine and decreasing in tc, so the root is exact::

        tc* = sum(s[t] * r[t] - ln(1 + rf[t])) / sum(charges[t])

    Negative values are reported as-is (the rule loses money even when free).
    NaN when the window contains no closure. ``charges`` defaults to the
    closure count recomputed from the signal column, which assumes a neutral
    state just before the window; pass a panel slice for exact boundaries.
    """
    s = np.asarray(signals, dtype=float)
    r = np.asarray(returns, dtype=float)
    if charges is None:
        charges = closure_indicators(s[:, None])[:, 0]
    denom = float(np.sum(charges))
    if denom == 0:
        return math.nan
    gross = float(np.sum(s * r - np.log1p(np.asarray(rf_daily, dtype=float))))
    return gross / denom
