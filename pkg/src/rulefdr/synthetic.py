"""Synthetic inputs: a correlated base return panel and demo market series.

The base panel stands in for a historical rule-return cross-section when
running the Monte Carlo validation study. It is built to look like a large
family-structured universe of daily strategy returns:

* columns sit in five contiguous family blocks sharing a family factor on
  top of a market factor (cross-sectional dependence for shared draws);
* per-column serial dependence is a deterministic cycle of MA(1)/AR(1)
  filters spanning negative to strongly positive autocorrelation, so the
  sampling error of a Sharpe ratio varies across columns the way it does
  across heterogeneous real strategies (some columns make a given planted
  Sharpe easy to detect, a minority make it genuinely hard);
* daily volatilities spread log-uniformly around half a percent;
* a small linear drift gradient across columns makes the "rank by mean and
  take contiguous blocks" labeling deterministic.
"""

from __future__ import annotations

import math

import numpy as np

from .market_data import PriceSeries, RiskFreeSeries, StressSeries, daily_risk_free

#: (kind, coefficient, weight) cycle for per-column serial dependence.
#: Negative MA tilts shrink the Sharpe sampling error (easier detection);
#: positive AR entries inflate it, so a minority of columns stays genuinely
#: hard at any planted Sharpe level. Weights are relative cycle frequencies.
SERIAL_MIX: tuple[tuple[str, float, int], ...] = (
    ("ma", -0.30, 68),
    ("ma", -0.45, 12),
    ("ma", -0.15, 10),
    ("ar", 0.25, 6),
    ("ar", 0.45, 2),
    ("ar", 0.62, 2),
)


def _serial_cycle(n_rules: int) -> list[tuple[str, float]]:
    pattern: list[tuple[str, float]] = []
    for kind, coef, weight in SERIAL_MIX:
        pattern.extend([(kind, coef)] * weight)
    reps = -(-n_rules // len(pattern))
    return (pattern * reps)[:n_rules]


def base_panel(
    n_days: int = 155,
    n_rules: int = 2000,
    seed: int = 0,
    n_families: int = 5,
    sigma_range: tuple[float, float] = (0.0028, 0.009),
    drift_scale: float = 2e-4,
) -> np.ndarray:
    """Generate the synthetic base return panel (n_days x n_rules)."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, 101))))
    pad = 1  # one presample innovation for the serial filters
    market = rng.standard_normal(n_days + pad)
    family_id = (np.arange(n_rules) * n_families) // n_rules
    factors = rng.standard_normal((n_families, n_days + pad))
    idio = rng.standard_normal((n_days + pad, n_rules))

    w_market, w_family = 0.25, 0.35
    w_idio = np.sqrt(1.0 - w_market**2 - w_family**2)
    innov = (
        w_market * market[:, None]
        + w_family * factors[family_id].T
        + w_idio * idio
    )

    out = np.empty((n_days, n_rules))
    cycle = _serial_cycle(n_rules)
    for j, (kind, coef) in enumerate(cycle):
        e = innov[:, j]
        if kind == "ma":
            y = e[1:] + coef * e[:-1]
            y = y / np.sqrt(1.0 + coef**2)
        else:  # ar
            y = np.empty(n_days)
            prev = e[0]
            for t in range(n_days):
                prev = coef * prev + e[t + 1]
                y[t] = prev
            y = y * np.sqrt(1.0 - coef**2)
        out[:, j] = y

    log_lo, log_hi = np.log(sigma_range[0]), np.log(sigma_range[1])
    sigma = np.exp(rng.uniform(log_lo, log_hi, size=n_rules))
    drift = drift_scale * (0.5 - np.arange(n_rules) / max(n_rules - 1, 1))
    return out * sigma[None, :] + drift[None, :]


def planted_panel(
    n_days: int,
    n_rules: int,
    frac_planted: float = 0.2,
    annual_sharpe: float = 3.0,
    seed: int = 0,
    sigma: float = 0.008,
    start: str = "2004-01-02",
):
    """Long panel with a known fraction of truly outperforming columns.

    Unlike the Monte Carlo panels (sample-exact Sharpe), the plant here is at
    the population level: planted columns get a constant true daily mean of
    ``annual_sharpe / sqrt(260) * sigma`` on top of noise, so rolling windows
    see signal plus sampling error - the setting a selection harness faces on
    live data. Returns ``(panel, labels)`` with an ExcessReturnPanel carrying
    a business-day calendar and placeholder rule specs cycling the families.
    """
    from .backtest import ExcessReturnPanel
    from .rules import FAMILIES, RuleSpec

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, 303))))
    n_planted = int(round(frac_planted * n_rules))
    labels = np.zeros(n_rules, dtype=np.int8)
    labels[:n_planted] = 1
    daily_mean = annual_sharpe / math.sqrt(260.0) * sigma
    x = sigma * rng.standard_normal((n_days, n_rules))
    x[:, labels == 1] += daily_mean
    dates = business_calendar(n_days, start)
    rules = tuple(
        RuleSpec(id=j, family=FAMILIES[j % len(FAMILIES)], params=_placeholder_params(j))
        for j in range(n_rules)
    )
    panel = ExcessReturnPanel(
        dates=dates,
        rules=rules,
        excess=x,
        closures=np.zeros((n_days, n_rules), dtype=np.int8),
        n_usable=np.full(n_rules, n_days, dtype=np.int64),
    )
    return panel, labels


def _placeholder_params(j: int) -> tuple[float, ...]:
    from .rules import FAMILIES, PARAM_NAMES

    family = FAMILIES[j % len(FAMILIES)]
    width = len(PARAM_NAMES[family])
    if family == "RSI":
        return (float(2 + j), 30.0, 70.0)
    if family == "MA":
        return (1.0, float(j + 2), 0.0)
    base = (float(2 + j), float(j % 7) / 100.0)
    return base[:width] if width <= 2 else base + (0.0,) * (width - 2)


def business_calendar(n_days: int, start: str = "2004-01-01") -> np.ndarray:
    """First ``n_days`` Monday-Friday dates from ``start``."""
    start_day = np.datetime64(start, "D")
    span = np.arange(start_day, start_day + int(n_days * 1.6) + 7)
    weekday = (span.astype(np.int64) + 4) % 7  # 1970-01-01 was a Thursday
    business = span[weekday < 5]
    return business[:n_days]


def demo_market(
    n_days: int = 1600,
    seed: int = 7,
    start: str = "2004-01-02",
    annual_rate: float = 0.02,
) -> tuple[PriceSeries, RiskFreeSeries, StressSeries]:
    """Small self-contained market fixture: prices, risk-free quotes, stress.

    Prices follow a random walk with slowly alternating drift regimes so that
    trend-following rules have something to chew on; the stress index is a
    smooth AR(1) crossing zero repeatedly.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, 202))))
    dates = business_calendar(n_days, start)
    regime = np.sign(np.sin(np.arange(n_days) * (2 * np.pi / 320)))
    drift = 3e-4 * regime
    returns = drift + 0.01 * rng.standard_normal(n_days)
    prices = 100.0 * np.exp(np.cumsum(returns))
    annual = np.full(n_days, annual_rate) + 0.002 * np.sin(np.arange(n_days) / 260.0)
    stress_path = np.empty(n_days)
    level = 0.0
    shocks = rng.standard_normal(n_days)
    for t in range(n_days):
        level = 0.97 * level + 0.25 * shocks[t]
        stress_path[t] = level + 0.8 * math.sin(t / 130.0)
    prices_series = PriceSeries(dates=dates, prices=prices)
    rf_series = daily_risk_free(dates, annual)
    stress_series = StressSeries(dates=dates, values=stress_path)
    return prices_series, rf_series, stress_series
