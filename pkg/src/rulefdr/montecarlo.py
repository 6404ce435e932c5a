"""Monte Carlo validation study with controlled out/under/neutral proportions.

One replication:

1. stationary-bootstrap resample the base panel with one shared index row
   per day (cross-sectional dependence preserved);
2. subtract every column's own resampled mean - columns become exactly
   zero-mean with their dispersion untouched;
3. shift each planted outperformer by ``sr_daily * sigma_j`` per day (and
   underperformers by the negative), where ``sr_daily = sr_annual / sqrt(260)``
   and ``sigma_j`` is the column's own sample standard deviation, so the
   planted column's sample Sharpe ratio *equals* the daily target.

Labels live in contiguous blocks chosen by ranking base-panel column means
(best block becomes the outperformers, worst the underperformers); selection
procedures never see them - they only score the outcome.

Scored per (Sharpe pair, method, target): the realized false discovery rate
(both the formula variant that substitutes the true null proportion into the
lucky-count estimate, and the direct labeled false-discovery proportion),
power (share of true outperformers discovered) and portfolio size, plus
proportion estimates at the 0.4 cutoff and annualized-return quartiles of
the planted groups.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bootstrap import (
    BootstrapPlan,
    PValueSet,
    Seed,
    bootstrap_statistics_with_indices,
    discrete_p_values,
    observed_statistics,
    stationary_bootstrap_indices,
)
from .errors import ConfigError, DataError
from .market_data import TRADING_DAYS_PER_YEAR
from .mht import (
    LambdaGrid,
    dfdr_select,
    estimate_proportions,
    pi0_estimate,
    right_boundary_lambda,
    rw_stepm_select,
    storey_fixed_select,
)
from .synthetic import base_panel


@dataclass(frozen=True)
class SimDesign:
    """Study layout; defaults are the reduced desk scale (fast on a laptop).

    Paper-style full scale (21,195 rules, 1,000 replications, 1,000 bootstrap
    draws) is a matter of passing bigger numbers.
    """

    n_rules: int = 2000
    n_days: int = 155
    pi0: float = 0.50
    pi_positive: float = 0.20
    pi_negative: float = 0.30
    sr_positive: tuple[float, ...] = (2.0, 3.0, 4.0)
    sr_negative: tuple[float, ...] = (-2.0, -3.0, -4.0)
    reps: int = 100
    b_reps: int = 200
    expected_block: float = 10.0
    seed: Seed = 0
    targets: tuple[float, ...] = (0.10, 0.20)
    rw_alphas: tuple[float, ...] = (0.05, 0.20)
    lambda_fixed: float = 0.6
    grid_width: float = 0.05
    proportion_cutoff: float = 0.4
    statistic: str = "sharpe"

    def __post_init__(self):
        total = self.pi0 + self.pi_positive + self.pi_negative
        if abs(total - 1.0) > 1e-9:
            raise ConfigError("pi0 + pi_positive + pi_negative must equal 1")
        if any(s <= 0 for s in self.sr_positive) or any(s >= 0 for s in self.sr_negative):
            raise ConfigError("positive targets must be > 0 and negative targets < 0")

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return [(sp, sn) for sp in self.sr_positive for sn in self.sr_negative]


def assign_labels(base: np.ndarray, pi_positive: float, pi_negative: float) -> np.ndarray:
    """Label contiguous column blocks: +1 outperformers, -1 under, 0 neutral.

    The outperformer block is the contiguous window of columns with the
    highest total base-panel mean; the underperformer block is the lowest
    window that does not overlap it. Ties break toward lower indices.
    """
    means = np.asarray(base, dtype=float).mean(axis=0)
    n = len(means)
    n_pos = int(round(pi_positive * n))
    n_neg = int(round(pi_negative * n))
    if n_pos + n_neg > n:
        raise ConfigError("label proportions exceed the number of columns")
    csum = np.concatenate(([0.0], np.cumsum(means)))

    def window_sums(width: int) -> np.ndarray:
        return csum[width:] - csum[:-width]

    labels = np.zeros(n, dtype=np.int8)
    if n_pos:
        pos_start = int(np.argmax(window_sums(n_pos)))
        labels[pos_start:pos_start + n_pos] = 1
    else:
        pos_start = 0
    if n_neg:
        sums = window_sums(n_neg)
        starts = np.arange(len(sums))
        ok = (starts + n_neg <= pos_start) | (starts >= pos_start + n_pos) if n_pos else (
            np.ones(len(sums), dtype=bool)
        )
        if not ok.any():
            raise ConfigError("cannot place disjoint label blocks")
        candidates = np.where(ok, sums, np.inf)
        neg_start = int(np.argmin(candidates))
        labels[neg_start:neg_start + n_neg] = -1
    return labels


@dataclass(frozen=True)
class SimulatedPanel:
    """One synthetic panel: excess returns, true labels, per-column dispersion."""

    excess: np.ndarray
    labels: np.ndarray
    sigma: np.ndarray
    zero_variance: np.ndarray  # columns left neutral because sigma was zero


def simulate_panel(
    base: np.ndarray,
    labels: np.ndarray,
    sr_pos: float,
    sr_neg: float,
    rep: int,
    design: SimDesign,
) -> SimulatedPanel:
    """Resample-recenter-shift one replication of the synthetic panel."""
    base = np.asarray(base, dtype=float)
    n_base, n_rules = base.shape
    if design.n_days > n_base:
        raise DataError("base panel has fewer days than the simulation asks for")
    idx = stationary_bootstrap_indices(
        n_base, design.expected_block, _derive(design.seed, rep, 0), 1
    )[0][: design.n_days]
    x = base[idx, :].copy()
    x -= x.mean(axis=0, keepdims=True)
    sigma = x.std(axis=0, ddof=1)
    zero_var = sigma == 0.0
    daily_pos = sr_pos / math.sqrt(TRADING_DAYS_PER_YEAR)
    daily_neg = sr_neg / math.sqrt(TRADING_DAYS_PER_YEAR)
    shift = np.zeros(n_rules)
    shift[(labels == 1) & ~zero_var] = daily_pos
    shift[(labels == -1) & ~zero_var] = daily_neg
    x += (shift * sigma)[None, :]
    return SimulatedPanel(excess=x, labels=labels, sigma=sigma, zero_variance=zero_var)


def _derive(seed: Seed, *parts: int) -> tuple[int, ...]:
    base = seed if isinstance(seed, tuple) else (seed,)
    return base + parts


def _nanmean(values) -> float:
    arr = np.asarray(values, dtype=float)
    if len(arr) == 0 or np.isnan(arr).all():
        return math.nan
    return float(np.nanmean(arr))


@dataclass
class MethodCell:
    """Running sums of one (pair, method, target) cell across replications."""

    method: str
    target: float
    fdr_formula: list[float] = field(default_factory=list)
    fdr_label: list[float] = field(default_factory=list)
    power: list[float] = field(default_factory=list)
    size: list[int] = field(default_factory=list)
    empty: int = 0

    def record(self, selected: tuple[int, ...], labels: np.ndarray,
               pi0_true: float, gamma_star: float | None, use_formula: bool) -> None:
        n_rules = len(labels)
        n_pos = int(np.sum(labels == 1))
        chosen = np.zeros(n_rules, dtype=bool)
        if selected:
            chosen[list(selected)] = True
        r_count = int(chosen.sum())
        true_hits = int(np.sum(chosen & (labels == 1)))
        false_hits = r_count - true_hits
        self.size.append(r_count)
        self.power.append(true_hits / n_pos if n_pos else math.nan)
        self.fdr_label.append(false_hits / r_count if r_count else 0.0)
        if not use_formula:
            self.fdr_formula.append(math.nan)
        elif gamma_star is None:
            self.fdr_formula.append(0.0)  # empty selection: no false discoveries
        else:
            lucky = pi0_true * n_rules * gamma_star / 2.0
            self.fdr_formula.append(lucky / r_count if r_count else 0.0)
        if r_count == 0:
            self.empty += 1

    def summary(self, sr_pos: float, sr_neg: float, reps: int) -> dict:
        return {
            "sr_pos": sr_pos,
            "sr_neg": sr_neg,
            "method": self.method,
            "target": self.target,
            "fdr_formula": _nanmean(self.fdr_formula),
            "fdr_label": float(np.mean(self.fdr_label)),
            "power": _nanmean(self.power),
            "size": float(np.mean(self.size)),
            "empty_reps": self.empty,
            "reps": reps,
        }


@dataclass(frozen=True)
class SimOutcome:
    """Aggregated study results in table-ready record form."""

    design: SimDesign
    method_rows: list[dict]
    proportion_rows: list[dict]
    quartile_rows: list[dict]


def _run_pair(
    base: np.ndarray,
    labels: np.ndarray,
    design: SimDesign,
    sr_pos: float,
    sr_neg: float,
    threads: int,
) -> tuple[list[dict], dict, list[dict]]:
    cells = [MethodCell("dfdr", t) for t in design.targets]
    cells += [MethodCell("storey", t) for t in design.targets]
    rw_cells = [MethodCell("rw", a) for a in design.rw_alphas]
    prop_acc = {"pi0": [], "pi_positive": [], "pi_negative": [], "lambda_star": []}
    quart_acc = {"outperforming": [], "underperforming": []}
    pi0_true = design.pi0

    def one_rep(rep: int):
        sim = simulate_panel(base, labels, sr_pos, sr_neg, rep, design)
        idx = stationary_bootstrap_indices(
            design.n_days, design.expected_block, _derive(design.seed, rep, 1), design.b_reps
        )
        phi = observed_statistics(sim.excess, design.statistic)
        boot = bootstrap_statistics_with_indices(sim.excess, idx, design.statistic)
        plan = BootstrapPlan(
            b_reps=design.b_reps, expected_block=design.expected_block, seed=design.seed
        )
        pvals = discrete_p_values(phi, boot, plan)
        grid = LambdaGrid.from_support(pvals.support, width=design.grid_width)
        lam_star, pi0_dyn = right_boundary_lambda(pvals, grid)
        pi0_fixed = pi0_estimate(pvals, design.lambda_fixed)
        selections = []
        for t in design.targets:
            sel = dfdr_select(pvals, pi0_dyn, t, lambda_star=lam_star)
            selections.append(("dfdr", t, sel.selected, sel.gamma_star))
        for t in design.targets:
            sel = storey_fixed_select(pvals, design.lambda_fixed, t)
            selections.append(("storey", t, sel.selected, sel.gamma_star))
        for a in design.rw_alphas:
            rw = rw_stepm_select(phi, boot, a)
            selections.append(("rw", a, rw.rejected, None))
        props = estimate_proportions(pvals, pi0_dyn, design.proportion_cutoff)
        ann = TRADING_DAYS_PER_YEAR * sim.excess.mean(axis=0)
        quarts = {
            "outperforming": np.percentile(ann[labels == 1], [25, 50, 75])
            if (labels == 1).any()
            else None,
            "underperforming": np.percentile(ann[labels == -1], [25, 50, 75])
            if (labels == -1).any()
            else None,
        }
        return selections, (lam_star, props), quarts

    reps = range(design.reps)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one_rep, reps))
    else:
        outcomes = [one_rep(r) for r in reps]

    for selections, (lam_star, props), quarts in outcomes:
        for name, t, selected, gamma in selections:
            cell_list = rw_cells if name == "rw" else cells
            cell = next(c for c in cell_list if c.method == name and c.target == t)
            cell.record(selected, labels, pi0_true, gamma, use_formula=name != "rw")
        prop_acc["pi0"].append(props.pi0)
        prop_acc["pi_positive"].append(props.pi_positive)
        prop_acc["pi_negative"].append(props.pi_negative)
        prop_acc["lambda_star"].append(lam_star)
        for group, q in quarts.items():
            if q is not None:
                quart_acc[group].append(q)

    method_rows = [c.summary(sr_pos, sr_neg, design.reps) for c in cells + rw_cells]
    proportion_row = {
        "sr_pos": sr_pos,
        "sr_neg": sr_neg,
        "pi0": float(np.mean(prop_acc["pi0"])),
        "pi_positive": float(np.mean(prop_acc["pi_positive"])),
        "pi_negative": float(np.mean(prop_acc["pi_negative"])),
        "lambda_star_mean": float(np.mean(prop_acc["lambda_star"])),
    }
    quartile_rows = []
    for group, acc in quart_acc.items():
        if acc:
            q = np.mean(np.vstack(acc), axis=0)
            quartile_rows.append(
                {
                    "sr_pos": sr_pos,
                    "sr_neg": sr_neg,
                    "group": group,
                    "q25": float(q[0]),
                    "q50": float(q[1]),
                    "q75": float(q[2]),
                }
            )
    return method_rows, proportion_row, quartile_rows


def run_power_study(
    design: SimDesign,
    base: np.ndarray | None = None,
    threads: int = 1,
) -> SimOutcome:
    """Run every Sharpe pair through the three procedures and aggregate."""
    if base is None:
        base = base_panel(
            n_days=design.n_days, n_rules=design.n_rules,
            seed=design.seed if isinstance(design.seed, int) else hash(design.seed) & 0x7FFFFFFF,
        )
    base = np.asarray(base, dtype=float)
    if base.shape[1] != design.n_rules:
        design = replace(design, n_rules=base.shape[1])
    labels = assign_labels(base, design.pi_positive, design.pi_negative)
    method_rows: list[dict] = []
    proportion_rows: list[dict] = []
    quartile_rows: list[dict] = []
    for sr_pos, sr_neg in design.pairs:
        rows, prop, quarts = _run_pair(base, labels, design, sr_pos, sr_neg, threads)
        method_rows.extend(rows)
        proportion_rows.append(prop)
        quartile_rows.extend(quarts)
    return SimOutcome(
        design=design,
        method_rows=method_rows,
        proportion_rows=proportion_rows,
        quartile_rows=quartile_rows,
    )
