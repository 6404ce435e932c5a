"""Technical trading rule universe and daily position signals.

Five rule families are supported:

* ``FR``  filter rules          (momentum; long after an x% rise off the running low)
* ``RSI`` relative strength     (contrarian oscillator with overbought/oversold bands)
* ``MA``  moving average cross  (fast MA vs. slow MA, optional percentage band)
* ``SR``  support/resistance    (breach of the prior d-day high/low)
* ``CB``  channel breakout      (break out of a narrow d-day trading range)

Signal convention
-----------------
Every family function returns the *position state held at each close*,
an int8 array parallel to the price array, entries in {-1, 0, +1}. A state
formed at the close of day ``t`` earns the return from ``t`` to ``t+1``;
:func:`generate_signal_matrix` encodes that one-day implementation lag by
pairing state row ``t`` with return row ``t`` of the log-return series
(which is dated ``t+1``). The lag lives here and only here - the backtester
multiplies row-for-row.

Tie-breaking: every breach/cross condition is a strict inequality; exact
equality never changes state.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError, InsufficientDataError
from .market_data import PriceSeries

#: Enumeration order of families inside a universe.
FAMILIES = ("FR", "RSI", "MA", "SR", "CB")

#: Reporting order used by family-disaggregation tables.
REPORT_FAMILIES = ("RSI", "FR", "MA", "SR", "CB")

PARAM_NAMES: dict[str, tuple[str, ...]] = {
    "FR": ("threshold", "hold"),
    "RSI": ("lookback", "oversold", "overbought"),
    "MA": ("fast", "slow", "band"),
    "SR": ("lookback", "threshold"),
    "CB": ("length", "width"),
}

MAX_LOOKBACK = 260  # lagged values up to one trading year


@dataclass(frozen=True)
class RuleSpec:
    """One parameterized rule: family tag plus its parameter tuple."""

    id: int
    family: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.family not in PARAM_NAMES:
            raise ConfigError(f"unknown rule family {self.family!r}")
        if len(self.params) != len(PARAM_NAMES[self.family]):
            raise ConfigError(
                f"{self.family} expects {len(PARAM_NAMES[self.family])} parameters, "
                f"got {len(self.params)}"
            )

    def param(self, name: str) -> float:
        return self.params[PARAM_NAMES[self.family].index(name)]

    def params_label(self) -> str:
        names = PARAM_NAMES[self.family]
        return ";".join(f"{n}={v:g}" for n, v in zip(names, self.params))

    @property
    def warmup(self) -> int:
        """Index of the first close at which the raw state may be nonzero."""
        if self.family == "FR":
            return 1
        if self.family == "RSI":
            return int(self.param("lookback"))
        if self.family == "MA":
            return int(self.param("slow")) - 1
        return int(self.params[0])  # SR lookback / CB length


@dataclass(frozen=True)
class Universe:
    """Deterministically ordered rule list plus enumeration bookkeeping."""

    rules: tuple[RuleSpec, ...]
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.rules)

    def families(self) -> np.ndarray:
        return np.array([r.family for r in self.rules])

    def max_warmup(self) -> int:
        return max(r.warmup for r in self.rules)


# ---------------------------------------------------------------------------
# Universe enumeration
# ---------------------------------------------------------------------------

#: Shipped default parameter grid: 495 rules. Scale (e.g. toward the ~21k
#: universes used in large studies) is a configuration choice, not a constant.
DEFAULT_GRID: dict[str, dict[str, list]] = {
    "fr": {
        "thresholds": [0.005, 0.01, 0.015, 0.02, 0.03, 0.04, 0.05, 0.075, 0.1, 0.15, 0.2, 0.25],
        "holds": [0, 5, 10, 25],
    },
    "rsi": {
        "lookbacks": [5, 10, 14, 20, 25, 50],
        "oversold": [20, 25, 30],
        "overbought": [70, 75, 80],
    },
    "ma": {
        "fast": [1, 2, 5, 10, 15, 20, 25, 50, 100, 150, 200],
        "slow": [1, 2, 5, 10, 15, 20, 25, 50, 100, 150, 200],
        "bands": [0.0, 0.001, 0.005, 0.01, 0.05],
    },
    "sr": {
        "lookbacks": [2, 5, 10, 15, 20, 25, 50, 100, 150, 200, 250],
        "thresholds": [0.0, 0.001, 0.005, 0.01, 0.05],
    },
    "cb": {
        "lengths": [5, 10, 15, 20, 25, 50, 100, 150, 200],
        "widths": [0.001, 0.005, 0.01, 0.05, 0.075, 0.1, 0.15],
    },
}

#: Rule count produced by DEFAULT_GRID (asserted in the test suite).
DEFAULT_GRID_SIZE = 495

_GRID_AXES: dict[str, tuple[str, ...]] = {
    "fr": ("thresholds", "holds"),
    "rsi": ("lookbacks", "oversold", "overbought"),
    "ma": ("fast", "slow", "bands"),
    "sr": ("lookbacks", "thresholds"),
    "cb": ("lengths", "widths"),
}


def _axis(grid: Mapping, family: str, axis: str) -> list[float]:
    spec = grid.get(family)
    if spec is None:
        return []
    if not isinstance(spec, Mapping):
        raise ConfigError(f"grid section {family!r} must be a mapping")
    unknown = set(spec) - set(_GRID_AXES[family])
    if unknown:
        raise ConfigError(f"grid {family!r}: unknown key {sorted(unknown)[0]!r}")
    values = spec.get(axis)
    if values is None:
        if family == "fr" and axis == "holds":
            return [0]  # hold-until-reversal variant only
        raise ConfigError(f"grid {family!r}: missing axis {axis!r}")
    if not isinstance(values, (list, tuple)) or len(values) == 0:
        raise ConfigError(f"grid {family!r}: axis {axis!r} must be a non-empty list")
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError(f"grid {family!r}: axis {axis!r} has a non-numeric entry") from None


def _validate_lookback(value: float, family: str, axis: str) -> None:
    if value != int(value) or not 1 <= value <= MAX_LOOKBACK:
        raise ConfigError(
            f"grid {family!r}: {axis} value {value:g} must be an integer in [1, {MAX_LOOKBACK}]"
        )


def enumerate_universe(grid: Mapping | None = None) -> Universe:
    """Expand per-family parameter grids into a deterministic rule list.

    Families enumerate in the fixed order FR, RSI, MA, SR, CB, lexicographic
    within a family over the documented axis order. Degenerate combinations
    (MA with fast >= slow; RSI bands violating 0 < oversold < overbought < 100)
    are skipped and counted. Duplicates are removed.
    """
    if grid is None:
        grid = DEFAULT_GRID
    specs: list[tuple[str, tuple[float, ...]]] = []
    skipped = 0

    for x in sorted(_axis(grid, "fr", "thresholds")):
        if x <= 0:
            raise ConfigError(f"grid 'fr': threshold {x:g} must be positive")
    fr_thresholds = sorted(_axis(grid, "fr", "thresholds"))
    fr_holds = sorted(_axis(grid, "fr", "holds")) if fr_thresholds else []
    for x, hold in product(fr_thresholds, fr_holds):
        if hold != int(hold) or hold < 0:
            raise ConfigError(f"grid 'fr': hold {hold:g} must be a non-negative integer")
        specs.append(("FR", (x, hold)))

    rsi_axes = [sorted(_axis(grid, "rsi", a)) for a in _GRID_AXES["rsi"]]
    for h in rsi_axes[0] if rsi_axes[0] else []:
        _validate_lookback(h, "rsi", "lookback")
        if h < 2:
            raise ConfigError("grid 'rsi': lookback must be >= 2")
    for h, lo, up in product(*rsi_axes) if all(rsi_axes) else []:
        if not 0 < lo < up < 100:
            skipped += 1
            continue
        specs.append(("RSI", (h, lo, up)))

    ma_axes = [sorted(_axis(grid, "ma", a)) for a in _GRID_AXES["ma"]]
    for w in (ma_axes[0] + ma_axes[1]) if ma_axes[0] else []:
        _validate_lookback(w, "ma", "window")
    for fast, slow, band in product(*ma_axes) if all(ma_axes) else []:
        if fast >= slow:
            skipped += 1
            continue
        if band < 0:
            raise ConfigError(f"grid 'ma': band {band:g} must be non-negative")
        specs.append(("MA", (fast, slow, band)))

    sr_axes = [sorted(_axis(grid, "sr", a)) for a in _GRID_AXES["sr"]]
    for d in sr_axes[0] if sr_axes[0] else []:
        _validate_lookback(d, "sr", "lookback")
        if d < 2:
            raise ConfigError("grid 'sr': lookback must be >= 2")
    for d, th in product(*sr_axes) if all(sr_axes) else []:
        if th < 0:
            raise ConfigError(f"grid 'sr': threshold {th:g} must be non-negative")
        specs.append(("SR", (d, th)))

    cb_axes = [sorted(_axis(grid, "cb", a)) for a in _GRID_AXES["cb"]]
    for d in cb_axes[0] if cb_axes[0] else []:
        _validate_lookback(d, "cb", "length")
        if d < 2:
            raise ConfigError("grid 'cb': length must be >= 2")
    for d, c in product(*cb_axes) if all(cb_axes) else []:
        if c <= 0:
            raise ConfigError(f"grid 'cb': width {c:g} must be positive")
        specs.append(("CB", (d, c)))

    if not specs:
        raise ConfigError("universe grid produced no rules")

    seen: set[tuple[str, tuple[float, ...]]] = set()
    rules: list[RuleSpec] = []
    for family, params in specs:
        key = (family, params)
        if key in seen:
            skipped += 1
            continue
        seen.add(key)
        rules.append(RuleSpec(id=len(rules), family=family, params=params))
    return Universe(rules=tuple(rules), skipped=skipped)


# ---------------------------------------------------------------------------
# Rolling helpers
# ---------------------------------------------------------------------------


def _rolling_mean(x: np.ndarray, window: int) -> np.ndarray:
    """Mean of the trailing ``window`` values ending at t; NaN before t = window-1."""
    out = np.full(len(x), np.nan)
    if window <= len(x):
        csum = np.concatenate(([0.0], np.cumsum(x)))
        out[window - 1:] = (csum[window:] - csum[:-window]) / window
    return out


def _trailing_extremes(x: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Max/min over the *previous* ``window`` values (t excluded); NaN while warming up."""
    n = len(x)
    hi = np.full(n, np.nan)
    lo = np.full(n, np.nan)
    if n > window:
        view = np.lib.stride_tricks.sliding_window_view(x, window)  # rows end at t-1
        hi[window:] = view.max(axis=1)[:-1]
        lo[window:] = view.min(axis=1)[:-1]
    return hi, lo


# ---------------------------------------------------------------------------
# Family signal functions (raw position state per close)
# ---------------------------------------------------------------------------


def signals_filter_rule(prices: np.ndarray, threshold: float, hold: int = 0) -> np.ndarray:
    """Filter rule: long after a rise of more than ``threshold`` off the running
    low tracked since the last sell/neutral spell, short after the mirror-image
    drop off the running high; optional ``hold`` days force an exit to neutral.
    """
    if threshold <= 0:
        raise DataError("filter rule threshold must be positive")
    prices = np.asarray(prices, dtype=float)
    n = len(prices)
    out = np.zeros(n, dtype=np.int8)
    state = 0
    lo = hi = prices[0]
    days_in_position = 0
    for t in range(1, n):
        p = prices[t]
        lo = min(lo, p)
        hi = max(hi, p)
        if state != 1 and p > lo * (1.0 + threshold):
            state, hi, days_in_position = 1, p, 0
        elif state != -1 and p < hi * (1.0 - threshold):
            state, lo, days_in_position = -1, p, 0
        elif state != 0:
            days_in_position += 1
            if hold and days_in_position >= hold:
                state, lo, hi = 0, p, p
        out[t] = state
    return out


def signals_moving_average(
    prices: np.ndarray,
    fast: int,
    slow: int,
    band: float = 0.0,
    neutral_in_band: bool = False,
) -> np.ndarray:
    """Double moving-average rule (``fast=1`` compares the raw price to the MA).

    Long while fast-MA > slow-MA*(1+band), short while fast-MA < slow-MA*(1-band).
    Inside the band the previous state is held, or forced neutral when
    ``neutral_in_band`` is set.
    """
    if not 1 <= fast < slow:
        raise DataError("moving average windows must satisfy 1 <= fast < slow")
    prices = np.asarray(prices, dtype=float)
    fma = prices if fast == 1 else _rolling_mean(prices, fast)
    sma = _rolling_mean(prices, slow)
    out = np.zeros(len(prices), dtype=np.int8)
    state = 0
    for t in range(slow - 1, len(prices)):
        if fma[t] > sma[t] * (1.0 + band):
            state = 1
        elif fma[t] < sma[t] * (1.0 - band):
            state = -1
        elif neutral_in_band:
            state = 0
        out[t] = state
    return out


def signals_support_resistance(
    prices: np.ndarray, lookback: int, threshold: float = 0.0
) -> np.ndarray:
    """Long above the prior ``lookback``-day high, short below the prior low;
    the position is held until the opposite breach."""
    if lookback < 2:
        raise DataError("support/resistance lookback must be >= 2")
    prices = np.asarray(prices, dtype=float)
    hi, lo = _trailing_extremes(prices, lookback)
    out = np.zeros(len(prices), dtype=np.int8)
    state = 0
    for t in range(lookback, len(prices)):
        if prices[t] > hi[t] * (1.0 + threshold):
            state = 1
        elif prices[t] < lo[t] * (1.0 - threshold):
            state = -1
        out[t] = state
    return out


def signals_channel_breakout(prices: np.ndarray, length: int, width: float) -> np.ndarray:
    """Breakout from a channel: one exists at t when the prior ``length`` closes
    span at most ``width`` times their minimum; long on a close above the channel
    high, short below the channel low, otherwise hold the prior state."""
    if length < 2:
        raise DataError("channel length must be >= 2")
    if width <= 0:
        raise DataError("channel width must be positive")
    prices = np.asarray(prices, dtype=float)
    hi, lo = _trailing_extremes(prices, length)
    out = np.zeros(len(prices), dtype=np.int8)
    state = 0
    for t in range(length, len(prices)):
        if hi[t] - lo[t] <= width * lo[t]:
            if prices[t] > hi[t]:
                state = 1
            elif prices[t] < lo[t]:
                state = -1
        out[t] = state
    return out


def rsi_values(prices: np.ndarray, lookback: int) -> np.ndarray:
    """RSI on the trailing ``lookback`` log returns, simple (unsmoothed) averages.

    ``RSI = 100 * avg_gain / (avg_gain + avg_loss)``; a flat window (0/0) is
    defined as 50. NaN while warming up.
    """
    prices = np.asarray(prices, dtype=float)
    r = np.diff(np.log(prices))
    gains = _rolling_mean(np.maximum(r, 0.0), lookback)
    losses = _rolling_mean(np.maximum(-r, 0.0), lookback)
    out = np.full(len(prices), np.nan)
    total = gains + losses
    with np.errstate(invalid="ignore", divide="ignore"):
        rsi = np.where(total > 0, 100.0 * gains / total, 50.0)
    out[lookback:] = rsi[lookback - 1:]
    return out


def signals_rsi(
    prices: np.ndarray, lookback: int, oversold: float, overbought: float
) -> np.ndarray:
    """Contrarian RSI rule: short when the RSI crosses above ``overbought``,
    long when it crosses below ``oversold``, exit to neutral when it re-crosses
    the 50 midline. The pre-history RSI is taken as the neutral 50, so a first
    reading already beyond a band counts as a crossing.
    """
    if lookback < 2:
        raise DataError("rsi lookback must be >= 2")
    if not 0 < oversold < overbought < 100:
        raise DataError("rsi bands must satisfy 0 < oversold < overbought < 100")
    prices = np.asarray(prices, dtype=float)
    rsi = rsi_values(prices, lookback)
    out = np.zeros(len(prices), dtype=np.int8)
    state = 0
    prev = 50.0
    for t in range(lookback, len(prices)):
        level = rsi[t]
        if level < oversold and prev >= oversold:
            state = 1
        elif level > overbought and prev <= overbought:
            state = -1
        elif state == 1 and level > 50.0 and prev <= 50.0:
            state = 0
        elif state == -1 and level < 50.0 and prev >= 50.0:
            state = 0
        out[t] = state
        prev = level
    return out


def signals_for_spec(spec: RuleSpec, prices: np.ndarray) -> np.ndarray:
    """Dispatch a :class:`RuleSpec` to its family signal function."""
    if spec.family == "FR":
        return signals_filter_rule(prices, spec.param("threshold"), int(spec.param("hold")))
    if spec.family == "RSI":
        return signals_rsi(
            prices, int(spec.param("lookback")), spec.param("oversold"), spec.param("overbought")
        )
    if spec.family == "MA":
        return signals_moving_average(
            prices, int(spec.param("fast")), int(spec.param("slow")), spec.param("band")
        )
    if spec.family == "SR":
        return signals_support_resistance(
            prices, int(spec.param("lookback")), spec.param("threshold")
        )
    if spec.family == "CB":
        return signals_channel_breakout(prices, int(spec.param("length")), spec.param("width"))
    raise ConfigError(f"unknown rule family {spec.family!r}")


# ---------------------------------------------------------------------------
# Signal matrix
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SignalMatrix:
    """T x l matrix of lagged positions.

    Row ``t`` is dated at return day ``t`` (the day the position's return
    accrues) and holds the state formed at the previous close. ``warmup[j]``
    counts the leading rows of column ``j`` that are structurally zero.
    """

    dates: np.ndarray
    rules: tuple[RuleSpec, ...]
    signals: np.ndarray
    warmup: np.ndarray

    def __post_init__(self):
        sig = np.asarray(self.signals)
        if sig.ndim != 2 or sig.shape[1] != len(self.rules):
            raise DataError("SignalMatrix: signals must be T x n_rules")
        if not np.isin(sig, (-1, 0, 1)).all():
            raise DataError("SignalMatrix: entries must be in {-1, 0, +1}")

    @property
    def n_days(self) -> int:
        return self.signals.shape[0]

    @property
    def n_rules(self) -> int:
        return self.signals.shape[1]


def generate_signal_matrix(
    universe: Universe | Iterable[RuleSpec], prices: PriceSeries
) -> SignalMatrix:
    """Run every rule over the price history and assemble the lagged matrix.

    Column ``j`` equals ``signals_for_spec(rules[j], prices)[:-1]``: the final
    close's state has no following return and is dropped, and row ``t`` of the
    matrix meets return ``r[t]`` (dated one day after the state was formed).
    """
    rules = tuple(universe.rules if isinstance(universe, Universe) else universe)
    if not rules:
        raise ConfigError("cannot generate signals for an empty universe")
    max_look = max(r.warmup for r in rules)
    if len(prices) <= max_look:
        raise InsufficientDataError(
            f"need more than {max_look} prices for the widest lookback, got {len(prices)}"
        )
    p = prices.prices
    matrix = np.empty((len(p) - 1, len(rules)), dtype=np.int8)
    warmup = np.empty(len(rules), dtype=np.int64)
    for j, spec in enumerate(rules):
        raw = signals_for_spec(spec, p)
        matrix[:, j] = raw[:-1]
        warmup[j] = spec.warmup
    return SignalMatrix(dates=prices.dates[1:], rules=rules, signals=matrix, warmup=warmup)
