"""Stationary bootstrap with shared draws and discrete two-sided p-values.

Resampling follows Politis-Romano: each replication row starts uniformly,
then continues circularly (index+1 mod N) with probability 1 - 1/mean_block
and restarts uniformly otherwise, giving geometric block lengths. One index
row is shared by *all* rule columns within a replication, which preserves
the cross-sectional dependence of the panel.

P-values are two-sided and recentered at the sample statistic: with
``phi_tilde[b, j] = phi[b, j] - phi_hat[j]`` imposing the zero-performance
null, the exceedance count is ``c_j = #{b : |phi_tilde[b, j]| >= |phi_hat[j]|}``
and ``p_j = max(c_j, 1) / B``. Every p-value therefore lands exactly on the
support ``V = {1/B, 2/B, ..., 1}``; the floor at 1/B keeps the literal count
formula from producing a zero that V cannot represent.

Randomness is counter-based: replication b draws from a generator keyed by
``(seed, b)`` only, so any parallel execution order reproduces bit-identical
results. Seeds may be ints or tuples of ints (tuples are how the rolling
harness derives independent per-window streams).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

Seed = int | tuple[int, ...]


@dataclass(frozen=True)
class BootstrapPlan:
    """Replication count, expected block length (days), seed, window length."""

    b_reps: int = 1000
    expected_block: float = 10.0
    seed: Seed = 0
    n_obs: int | None = None

    def __post_init__(self):
        if self.b_reps < 1:
            raise DataError("bootstrap replications must be >= 1")
        if self.expected_block < 1:
            raise DataError("expected block length must be >= 1")


def replication_rng(seed: Seed, b: int) -> np.random.Generator:
    """Generator for replication ``b``: a pure function of (seed, b)."""
    entropy = seed + (b,) if isinstance(seed, tuple) else (seed, b)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def stationary_bootstrap_indices(
    n_obs: int, expected_block: float, seed: Seed, b_reps: int
) -> np.ndarray:
    """B x N matrix of resampling indices, one row per replication."""
    if n_obs < 1:
        raise DataError("need at least one observation to resample")
    p_restart = 1.0 / expected_block
    out = np.empty((b_reps, n_obs), dtype=np.int64)
    steps = np.arange(n_obs)
    for b in range(b_reps):
        rng = replication_rng(seed, b)
        restart = rng.random(n_obs) < p_restart
        restart[0] = True
        pool = rng.integers(0, n_obs, size=n_obs)
        run_start = np.flatnonzero(restart)
        segment = np.cumsum(restart) - 1
        offset = steps - run_start[segment]
        out[b] = (pool[run_start][segment] + offset) % n_obs
    return out


def _weights(indices: np.ndarray, n_obs: int) -> np.ndarray:
    """Multiplicity of each source row per replication (B x N, float64).

    Means and standard deviations of a resampled column depend only on these
    counts, which turns the whole cross-section into two matrix products.
    """
    b_reps = indices.shape[0]
    flat = indices + (np.arange(b_reps)[:, None] * n_obs)
    counts = np.bincount(flat.ravel(), minlength=b_reps * n_obs)
    return counts.reshape(b_reps, n_obs).astype(np.float64)


def _column_stats(s1: np.ndarray, s2: np.ndarray, n: int, statistic: str) -> np.ndarray:
    mean = s1 / n
    if statistic == "mean":
        return mean
    if statistic != "sharpe":
        raise DataError(f"unknown statistic {statistic!r} (use 'sharpe' or 'mean')")
    var = (s2 - s1 * mean) / (n - 1) if n > 1 else np.full_like(s1, np.nan)
    var = np.maximum(var, 0.0)
    sd = np.sqrt(var)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(sd > 0, mean / sd, np.nan)
    return out


def observed_statistics(panel, statistic: str = "sharpe") -> np.ndarray:
    """Observed per-rule statistic (daily Sharpe ratio or mean excess)."""
    x = np.asarray(getattr(panel, "excess", panel), dtype=float)
    n = x.shape[0]
    return _column_stats(x.sum(axis=0), (x * x).sum(axis=0), n, statistic)


def bootstrap_statistics_with_indices(
    panel, indices: np.ndarray, statistic: str = "sharpe"
) -> np.ndarray:
    """Resampled statistics for a pre-drawn B x N index matrix.

    Row b resamples every column of the panel simultaneously (shared draws).
    """
    x = np.asarray(getattr(panel, "excess", panel), dtype=float)
    if x.ndim != 2:
        raise DataError("panel must be a T x l matrix")
    n = x.shape[0]
    indices = np.asarray(indices)
    if indices.ndim != 2 or indices.shape[1] != n:
        raise DataError(f"index matrix must be B x {n}")
    w = _weights(indices, n)
    s1 = w @ x
    s2 = w @ (x * x)
    return _column_stats(s1, s2, n, statistic)


def bootstrap_statistics(
    panel, plan: BootstrapPlan, statistic: str = "sharpe"
) -> np.ndarray:
    """B x l matrix of resampled statistics under cross-sectionally shared draws.

    Zero-variance resampled columns yield NaN for that (b, j) cell; the
    p-value stage treats NaN as an exceedance (conservative).
    """
    x = np.asarray(getattr(panel, "excess", panel), dtype=float)
    if x.ndim != 2:
        raise DataError("panel must be a T x l matrix")
    n = x.shape[0]
    if plan.n_obs is not None and plan.n_obs != n:
        raise DataError(f"plan says {plan.n_obs} observations, panel has {n}")
    indices = stationary_bootstrap_indices(n, plan.expected_block, plan.seed, plan.b_reps)
    return bootstrap_statistics_with_indices(x, indices, statistic)


@dataclass(frozen=True)
class PValueSet:
    """Discrete p-values on common support points.

    ``support`` is ``{1/B, ..., 1}``; ``counts[i]`` is the number of rules at
    support point i, so (support, counts) is the full empirical distribution.
    ``signs`` is the sign of each observed statistic (0 when the statistic is
    exactly zero or undefined).
    """

    p: np.ndarray
    support: np.ndarray
    signs: np.ndarray
    observed: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        if int(self.counts.sum()) != len(self.p):
            raise DataError("support-point counts must total the number of rules")

    @property
    def n_rules(self) -> int:
        return len(self.p)

    @property
    def b_reps(self) -> int:
        return len(self.support)


def discrete_p_values(
    observed: np.ndarray, boot: np.ndarray, plan: BootstrapPlan
) -> PValueSet:
    """Two-sided recentered bootstrap p-values on the discrete support.

    A rule whose observed statistic is undefined (NaN) gets p = 1 and sign 0;
    undefined resampled statistics count as exceedances.
    """
    phi = np.asarray(observed, dtype=float)
    boot = np.asarray(boot, dtype=float)
    if boot.ndim != 2 or boot.shape != (plan.b_reps, len(phi)):
        raise DataError(
            f"bootstrap matrix must be {plan.b_reps} x {len(phi)}, got {boot.shape}"
        )
    b_reps = plan.b_reps
    recentered = boot - phi[None, :]
    with np.errstate(invalid="ignore"):
        exceed = np.abs(recentered) >= np.abs(phi)[None, :]
    exceed |= np.isnan(recentered)
    counts_per_rule = exceed.sum(axis=0)
    undefined = np.isnan(phi)
    counts_per_rule[undefined] = b_reps
    counts_per_rule = np.maximum(counts_per_rule, 1)
    p = counts_per_rule / b_reps
    signs = np.sign(phi).astype(np.int8)
    signs[undefined] = 0
    support = np.arange(1, b_reps + 1) / b_reps
    hist = np.bincount(counts_per_rule - 1, minlength=b_reps)
    return PValueSet(p=p, support=support, signs=signs, observed=phi, counts=hist)


def panel_p_values(panel, plan: BootstrapPlan, statistic: str = "sharpe") -> PValueSet:
    """Observed statistics, shared-draw bootstrap and p-values in one call."""
    phi = observed_statistics(panel, statistic)
    boot = bootstrap_statistics(panel, plan, statistic)
    return discrete_p_values(phi, boot, plan)
