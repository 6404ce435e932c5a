"""Market data ingestion: prices, risk-free rates, stress indices.

CSV layouts (UTF-8, header row required, ``.`` decimal separator):

* prices:    ``date,close``
* risk-free: ``date,annual_rate``  (decimal fraction per annum, e.g. 0.026)
* stress:    ``date,stress``       (positive = above-average stress)

Dates are ISO-8601. Rows are sorted on load; duplicate dates are rejected.
There is no interpolation anywhere: calendar alignment drops dates instead
of fabricating prices.

The trading calendar is whatever the data contains. A year is treated as
260 trading days for annualization and for the annual-to-daily risk-free
conversion; the constant is fixed, not inferred from the data.
"""

from __future__ import annotations

import csv
import datetime as _dt
import warnings
from dataclasses import dataclass, fields, replace
from typing import Iterable, Sequence, TypeVar

import numpy as np

from .errors import AlignmentError, DataError, InsufficientDataError, ParseError

TRADING_DAYS_PER_YEAR = 260

#: Annual rates above this level trigger RateScaleWarning (a 25%+ annual
#: risk-free quote usually means percent was not converted to a fraction).
RATE_SANITY_THRESHOLD = 0.25


class RateScaleWarning(UserWarning):
    """An annual risk-free quote looks like an unscaled percentage."""


def _as_dates(dates: Iterable) -> np.ndarray:
    arr = np.asarray(dates, dtype="datetime64[D]")
    if arr.ndim != 1:
        raise DataError("dates must be one-dimensional")
    return arr


def _check_increasing(dates: np.ndarray, what: str) -> None:
    if len(dates) > 1 and not (dates[1:] > dates[:-1]).all():
        raise DataError(f"{what}: dates must be strictly increasing")


@dataclass(frozen=True)
class PriceSeries:
    """Dated close prices for one index."""

    dates: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", _as_dates(self.dates))
        object.__setattr__(self, "prices", np.asarray(self.prices, dtype=float))
        if len(self.dates) != len(self.prices):
            raise DataError("PriceSeries: dates and prices differ in length")
        if len(self.prices) < 2:
            raise InsufficientDataError("PriceSeries needs at least 2 observations")
        _check_increasing(self.dates, "PriceSeries")
        if not (self.prices > 0).all():
            raise DataError("PriceSeries: all prices must be positive")

    def __len__(self) -> int:
        return len(self.prices)


@dataclass(frozen=True)
class RiskFreeSeries:
    """Annual risk-free quotes with their daily-compounded equivalents.

    ``daily_rate[t] = (1 + annual_rate[t]) ** (1/260) - 1``; rates are decimal
    fractions throughout (basis points exist only at the CLI boundary).
    """

    dates: np.ndarray
    annual_rate: np.ndarray
    daily_rate: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", _as_dates(self.dates))
        object.__setattr__(self, "annual_rate", np.asarray(self.annual_rate, dtype=float))
        object.__setattr__(self, "daily_rate", np.asarray(self.daily_rate, dtype=float))
        if not (len(self.dates) == len(self.annual_rate) == len(self.daily_rate)):
            raise DataError("RiskFreeSeries: field lengths differ")
        _check_increasing(self.dates, "RiskFreeSeries")
        if (self.annual_rate <= -1).any():
            raise DataError("RiskFreeSeries: annual rate must exceed -100%")
        expected = daily_rate_from_annual(self.annual_rate)
        if not np.allclose(self.daily_rate, expected, rtol=0, atol=1e-15):
            raise DataError("RiskFreeSeries: daily_rate inconsistent with annual_rate")

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class ReturnSeries:
    """Daily log returns; one fewer row than the price series they came from."""

    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", _as_dates(self.dates))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(self.dates) != len(self.values):
            raise DataError("ReturnSeries: dates and values differ in length")
        _check_increasing(self.dates, "ReturnSeries")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class StressSeries:
    """Financial-stress index values (OFR convention: zero is the neutral line)."""

    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", _as_dates(self.dates))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(self.dates) != len(self.values):
            raise DataError("StressSeries: dates and values differ in length")
        _check_increasing(self.dates, "StressSeries")

    def __len__(self) -> int:
        return len(self.values)


SeriesT = TypeVar("SeriesT", PriceSeries, RiskFreeSeries, ReturnSeries, StressSeries)


def take(series: SeriesT, idx: np.ndarray) -> SeriesT:
    """Row-subset a series; all array fields are parallel, so index them all."""
    return replace(
        series, **{f.name: getattr(series, f.name)[idx] for f in fields(series)}
    )


# ---------------------------------------------------------------------------
# CSV loading
# ---------------------------------------------------------------------------


def _read_rows(path: str, value_column: str) -> tuple[list[_dt.date], list[float]]:
    dates: list[_dt.date] = []
    values: list[float] = []
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open file: {exc}", path=path) from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file is empty", path=path, line=1) from None
        header = [h.strip().lower() for h in header]
        if header[:2] != ["date", value_column]:
            raise ParseError(
                f"expected header 'date,{value_column}', got {','.join(header)}",
                path=path,
                line=1,
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # tolerate trailing blank lines
            if len(row) < 2:
                raise ParseError("row has fewer than 2 fields", path=path, line=lineno)
            try:
                day = _dt.date.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise ParseError(f"bad date {row[0]!r}: {exc}", path=path, line=lineno) from exc
            try:
                value = float(row[1])
            except ValueError as exc:
                raise ParseError(
                    f"bad {value_column} {row[1]!r}", path=path, line=lineno
                ) from exc
            dates.append(day)
            values.append(value)
    if not dates:
        raise ParseError("no data rows", path=path, line=1)
    return dates, values


def _sorted_unique(dates: list[_dt.date], values: list[float], path: str):
    order = sorted(range(len(dates)), key=dates.__getitem__)
    sorted_dates = [dates[i] for i in order]
    for a, b in zip(sorted_dates, sorted_dates[1:]):
        if a == b:
            raise DataError(f"duplicate date {a} in {path}")
    return sorted_dates, [values[i] for i in order]


def load_price_series(path: str) -> PriceSeries:
    """Load a ``date,close`` CSV file; rows may arrive in any order."""
    dates, values = _read_rows(path, "close")
    dates, values = _sorted_unique(dates, values, path)
    return PriceSeries(dates=dates, prices=values)


def load_risk_free_series(path: str) -> RiskFreeSeries:
    """Load a ``date,annual_rate`` CSV file and attach daily rates."""
    dates, values = _read_rows(path, "annual_rate")
    dates, values = _sorted_unique(dates, values, path)
    return daily_risk_free(dates, values)


def load_stress_series(path: str) -> StressSeries:
    """Load a ``date,stress`` CSV file."""
    dates, values = _read_rows(path, "stress")
    dates, values = _sorted_unique(dates, values, path)
    return StressSeries(dates=dates, values=values)


def write_series_csv(path: str, dates: np.ndarray, values: np.ndarray, value_column: str) -> None:
    """Write a two-column ``date,<value_column>`` CSV (inverse of the loaders)."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["date", value_column])
        for day, value in zip(dates.astype("datetime64[D]").astype(str), values):
            writer.writerow([day, repr(float(value))])


# ---------------------------------------------------------------------------
# Transformations
# ---------------------------------------------------------------------------


def log_returns(series: PriceSeries) -> ReturnSeries:
    """Daily log returns ``r[t] = ln(P[t+1] / P[t])``, dated at the later day."""
    if len(series) < 2:
        raise InsufficientDataError("log_returns needs at least 2 prices")
    values = np.diff(np.log(series.prices))
    return ReturnSeries(dates=series.dates[1:], values=values)


def daily_rate_from_annual(annual: np.ndarray) -> np.ndarray:
    """``(1 + S) ** (1/260) - 1`` for annual rates ``S`` given as fractions."""
    annual = np.asarray(annual, dtype=float)
    if (annual <= -1).any():
        raise DataError("annual rate must exceed -100%")
    return np.expm1(np.log1p(annual) / TRADING_DAYS_PER_YEAR)


def daily_risk_free(
    dates: Iterable,
    annual_rate: Sequence[float] | np.ndarray,
    sanity_threshold: float = RATE_SANITY_THRESHOLD,
) -> RiskFreeSeries:
    """Build a :class:`RiskFreeSeries` from annual quotes.

    Emits :class:`RateScaleWarning` when a quote exceeds ``sanity_threshold``,
    the usual symptom of percent values that were never divided by 100. The
    conversion is still performed; the warning is advisory.
    """
    annual = np.asarray(annual_rate, dtype=float)
    if sanity_threshold is not None and (annual > sanity_threshold).any():
        worst = float(annual.max())
        warnings.warn(
            f"annual risk-free rate {worst:g} exceeds {sanity_threshold:g}; "
            "input may be in percent rather than decimal fractions",
            RateScaleWarning,
            stacklevel=2,
        )
    return RiskFreeSeries(
        dates=dates, annual_rate=annual, daily_rate=daily_rate_from_annual(annual)
    )


def forward_fill_to_calendar(series: RiskFreeSeries, calendar: np.ndarray) -> RiskFreeSeries:
    """Carry the last risk-free quote forward onto ``calendar`` dates.

    Calendar days before the first quote are dropped (nothing to carry).
    Rate quotes often skip market holidays; filling happens before alignment
    so a sparse quote calendar does not erase price dates.
    """
    calendar = _as_dates(calendar)
    pos = np.searchsorted(series.dates, calendar, side="right") - 1
    keep = pos >= 0
    idx = pos[keep]
    return RiskFreeSeries(
        dates=calendar[keep],
        annual_rate=series.annual_rate[idx],
        daily_rate=series.daily_rate[idx],
    )


def align(series_list: Sequence[SeriesT]) -> tuple[list[SeriesT], list[int]]:
    """Restrict every series to the intersection of their calendars.

    Returns the aligned series plus the number of rows dropped from each.
    Raises :class:`AlignmentError` when the intersection is empty.
    """
    if not series_list:
        return [], []
    common = series_list[0].dates
    for series in series_list[1:]:
        common = np.intersect1d(common, series.dates)
    if len(common) == 0:
        raise AlignmentError("series share no common dates")
    aligned: list[SeriesT] = []
    dropped: list[int] = []
    for series in series_list:
        idx = np.searchsorted(series.dates, common)
        aligned.append(take(series, idx))
        dropped.append(len(series.dates) - len(common))
    return aligned, dropped
