"""Multiple-testing core: null-proportion estimation and rule selection.

Estimators
----------
* ``pi0_estimate``: Storey's null-proportion estimator at a tuning level
  lambda, ``min(1, #{p > lambda} / (l * (1 - lambda)))``.
* ``right_boundary_lambda``: dynamic lambda choice for discrete p-values -
  scan an ascending candidate grid and stop at the first point where the
  pi0 sequence stops decreasing. The grid is snapped to the p-value support
  (a lambda strictly between support points only adds conservativeness).
* ``dfdr_select``: point-estimate thresholding for the positive side. With
  ``F_plus(gamma) = pi0 * l * gamma / 2`` (the /2 because a two-sided null
  rule lands on the positive side half the time) and ``R_plus(gamma)`` the
  positive-sign rejection count, the cutoff ``gamma*`` is the largest support
  point keeping the estimated false-discovery ratio at or under the target.
* ``storey_fixed_select``: same selection driven by pi0 at one fixed lambda.
* ``rw_stepm_select``: stepwise max-statistic testing as the family-wise
  error benchmark, two-sided on recentered statistics, positive side reported.

Selections never look at labels or returns - only at the PValueSet (and, for
the stepwise test, the recentered bootstrap matrix).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bootstrap import PValueSet
from .errors import DataError

DEFAULT_LAMBDA_FIXED = 0.6
DEFAULT_PROPORTION_CUTOFF = 0.4


@dataclass(frozen=True)
class LambdaGrid:
    """Ascending candidate lambdas, all interior to (0, 1)."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = self.values
        if len(vals) < 2:
            raise DataError("lambda grid needs at least 2 points")
        if not all(0.0 < v < 1.0 for v in vals):
            raise DataError("lambda grid points must lie strictly inside (0, 1)")
        if not all(a < b for a, b in zip(vals, vals[1:])):
            raise DataError("lambda grid must be strictly ascending")

    @classmethod
    def from_support(
        cls, support: np.ndarray, width: float = 0.05, lo: float = 0.05, hi: float = 0.95
    ) -> "LambdaGrid":
        """Equally spaced candidates snapped to the nearest support point."""
        support = np.asarray(support, dtype=float)
        interior = support[(support > 0.0) & (support < 1.0)]
        if len(interior) < 2:
            raise DataError("support has too few interior points for a lambda grid")
        raw = np.arange(lo, hi + width / 2, width)
        pos = np.searchsorted(interior, raw)
        snapped = []
        for lam, i in zip(raw, pos):
            lo_i = max(i - 1, 0)
            hi_i = min(i, len(interior) - 1)
            nearest = min((abs(interior[k] - lam), interior[k]) for k in (lo_i, hi_i))[1]
            if not snapped or nearest > snapped[-1]:
                snapped.append(float(nearest))
        return cls(values=tuple(snapped))


def pi0_estimate(pvals: PValueSet | np.ndarray, lam: float) -> float:
    """Storey estimator of the null proportion, capped at 1."""
    if not 0.0 < lam < 1.0:
        raise DataError("lambda must lie strictly inside (0, 1)")
    p = pvals.p if isinstance(pvals, PValueSet) else np.asarray(pvals, dtype=float)
    raw = np.sum(p > lam) / (len(p) * (1.0 - lam))
    return min(1.0, float(raw))


def right_boundary_lambda(
    pvals: PValueSet | np.ndarray, grid: LambdaGrid
) -> tuple[float, float]:
    """First grid lambda at which the pi0 sequence stops decreasing.

    The scan starts against the implicit lambda_0 = 0 baseline, where the
    estimator equals ``#{p > 0} / l`` (1 for floored bootstrap p-values).
    A strictly decreasing sequence falls back to the rightmost grid point.
    Returns ``(lambda_star, pi0_at_lambda_star)``.
    """
    p = pvals.p if isinstance(pvals, PValueSet) else np.asarray(pvals, dtype=float)
    values = grid.values
    prev = min(1.0, float(np.sum(p > 0.0)) / len(p))
    for lam in values[:-1]:
        cur = pi0_estimate(p, lam)
        if cur >= prev:
            return lam, cur
        prev = cur
    lam = values[-1]
    return lam, pi0_estimate(p, lam)


def right_boundary_lambda_bincount(
    pvals: PValueSet | np.ndarray, grid: LambdaGrid
) -> float:
    """Equal-width-bin variant of the stopping rule (diagnostic only).

    Partition (0, 1] into bins at the grid points and pick the right boundary
    of the first bin whose p-value count is no larger than the mean count of
    the bins to its right. Falls back to the rightmost grid point.
    """
    p = pvals.p if isinstance(pvals, PValueSet) else np.asarray(pvals, dtype=float)
    edges = np.concatenate(([0.0], np.asarray(grid.values), [1.0]))
    counts = np.histogram(p, bins=edges)[0]  # bin i = (edge[i], edge[i+1]]
    n_bins = len(counts)
    for i in range(n_bins - 1):
        right_mean = counts[i + 1:].mean()
        if counts[i] <= right_mean:
            return float(edges[i + 1])
    return float(grid.values[-1])


@dataclass(frozen=True)
class DfdrSelection:
    """Outcome of point-estimate selection on one side of the test.

    ``gamma_star`` is None (and the set empty) when no support point meets the
    target. ``side`` is +1 for outperformers, -1 for the mirrored procedure.
    """

    pi0: float
    gamma_star: float | None
    selected: tuple[int, ...]
    r_count: int
    f_estimate: float
    fdr_hat: float
    target: float
    side: int = 1
    lambda_star: float | None = None


def _select(
    pvals: PValueSet, pi0: float, target: float, side: int, lambda_star: float | None
) -> DfdrSelection:
    if not 0.0 < target < 1.0:
        raise DataError("target rate must lie strictly inside (0, 1)")
    if not 0.0 <= pi0 <= 1.0:
        raise DataError("pi0 must lie in [0, 1]")
    mask = pvals.signs > 0 if side > 0 else pvals.signs < 0
    n_rules = pvals.n_rules
    support = pvals.support
    side_p = np.sort(pvals.p[mask])
    r_at = np.searchsorted(side_p, support, side="right")
    f_at = pi0 * n_rules * support / 2.0
    ok = (r_at > 0) & (f_at <= target * r_at)
    if not ok.any():
        return DfdrSelection(
            pi0=pi0,
            gamma_star=None,
            selected=(),
            r_count=0,
            f_estimate=0.0,
            fdr_hat=math.nan,
            target=target,
            side=side,
            lambda_star=lambda_star,
        )
    best = int(np.flatnonzero(ok)[-1])
    gamma = float(support[best])
    selected = np.flatnonzero(mask & (pvals.p <= gamma))
    return DfdrSelection(
        pi0=pi0,
        gamma_star=gamma,
        selected=tuple(int(j) for j in selected),
        r_count=int(r_at[best]),
        f_estimate=float(f_at[best]),
        fdr_hat=float(f_at[best] / r_at[best]),
        target=target,
        side=side,
        lambda_star=lambda_star,
    )


def dfdr_select(
    pvals: PValueSet, pi0: float, target: float, lambda_star: float | None = None
) -> DfdrSelection:
    """Select positive-side rules at the largest qualifying support cutoff."""
    return _select(pvals, pi0, target, side=1, lambda_star=lambda_star)


def dfdr_select_negative(
    pvals: PValueSet, pi0: float, target: float, lambda_star: float | None = None
) -> DfdrSelection:
    """Sign-flipped twin of :func:`dfdr_select` for underperformers."""
    return _select(pvals, pi0, target, side=-1, lambda_star=lambda_star)


def dfdr_procedure(
    pvals: PValueSet,
    target: float,
    grid: LambdaGrid | None = None,
    grid_width: float = 0.05,
    side: int = 1,
) -> DfdrSelection:
    """Full dynamic procedure: right-boundary lambda, then point-estimate selection."""
    if grid is None:
        grid = LambdaGrid.from_support(pvals.support, width=grid_width)
    lam, pi0 = right_boundary_lambda(pvals, grid)
    return _select(pvals, pi0, target, side=side, lambda_star=lam)


def storey_fixed_select(
    pvals: PValueSet, lam_fixed: float = DEFAULT_LAMBDA_FIXED, target: float = 0.10
) -> DfdrSelection:
    """Baseline: identical selection but with pi0 estimated at one fixed lambda."""
    pi0 = pi0_estimate(pvals, lam_fixed)
    return _select(pvals, pi0, target, side=1, lambda_star=lam_fixed)


@dataclass(frozen=True)
class ProportionEstimate:
    """Decomposition of the universe into null / positive / negative proportions.

    ``pi_positive = max(0, R+(gamma)/l - pi0 * gamma / 2)`` and the mirror image
    for ``pi_negative``; ``pi0`` is passed through unchanged. ``residual`` is
    ``1 - pi0 - pi_positive - pi_negative`` before any renormalization, kept
    as a diagnostic of how far the three estimates are from a exact partition.
    """

    pi0: float
    pi_positive: float
    pi_negative: float
    cutoff: float
    residual: float


def estimate_proportions(
    pvals: PValueSet, pi0: float, cutoff: float = DEFAULT_PROPORTION_CUTOFF
) -> ProportionEstimate:
    """Split the non-null mass into positive and negative performers at ``cutoff``."""
    if not 0.0 < cutoff < 1.0:
        raise DataError("proportion cutoff must lie strictly inside (0, 1)")
    n_rules = pvals.n_rules
    at_cutoff = pvals.p <= cutoff
    r_pos = int(np.sum(at_cutoff & (pvals.signs > 0)))
    r_neg = int(np.sum(at_cutoff & (pvals.signs < 0)))
    lucky = pi0 * cutoff / 2.0
    pi_pos = max(0.0, r_pos / n_rules - lucky)
    pi_neg = max(0.0, r_neg / n_rules - lucky)
    return ProportionEstimate(
        pi0=pi0,
        pi_positive=pi_pos,
        pi_negative=pi_neg,
        cutoff=cutoff,
        residual=1.0 - pi0 - pi_pos - pi_neg,
    )


@dataclass(frozen=True)
class RwSelection:
    """Stepwise max-statistic outcome: positive-side rejections and round count."""

    rejected: tuple[int, ...]
    rounds: int
    alpha: float


def rw_stepm_select(
    observed: np.ndarray, boot: np.ndarray, alpha: float
) -> RwSelection:
    """Stepdown multiple test on the max of recentered |statistics|.

    Round critical value: empirical (1 - alpha) quantile (higher order
    statistic) of ``max over active |phi[b, j] - phi_hat[j]|``. Rules with
    ``|phi_hat| > critical`` leave the active set; positive-sign rejections
    are reported. Iterates until a round rejects nothing. Undefined resampled
    statistics are treated as infinite, which can only raise the critical
    value (conservative).
    """
    if not 0.0 < alpha < 1.0:
        raise DataError("alpha must lie strictly inside (0, 1)")
    phi = np.asarray(observed, dtype=float)
    boot = np.asarray(boot, dtype=float)
    if boot.ndim != 2 or boot.shape[1] != len(phi):
        raise DataError("bootstrap matrix must be B x l")
    abs_phi = np.abs(np.nan_to_num(phi, nan=0.0))
    recentered = np.abs(boot - phi[None, :])
    recentered = np.where(np.isnan(recentered), np.inf, recentered)
    active = np.ones(len(phi), dtype=bool)
    rejected_pos: list[int] = []
    rounds = 0
    while True:
        rounds += 1
        max_stat = recentered[:, active].max(axis=1)
        critical = float(np.quantile(max_stat, 1.0 - alpha, method="higher"))
        newly = active & (abs_phi > critical)
        if not newly.any():
            break
        rejected_pos.extend(int(j) for j in np.flatnonzero(newly & (phi > 0)))
        active &= ~newly
        if not active.any():
            break
    return RwSelection(rejected=tuple(sorted(rejected_pos)), rounds=rounds, alpha=alpha)
