"""Paired significance tests, effect sizes, and bootstrap intervals.

The statistics are computed from their definitions; scipy supplies only
the probability distributions (Student t, normal). Wilcoxon signed-rank
drops zero differences, uses the exact sign-flip distribution for n <= 25
(dynamic programming over doubled ranks, so tied average ranks stay on an
integer lattice) and the tie-corrected normal approximation above that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


@dataclass
class PairedTestResult:
    n: int
    mean_diff: float
    t_stat: float
    p_value_t: float
    p_value_wilcoxon: float
    cohens_dz: float
    ci_low: float
    ci_high: float
    dz_ci_low: float
    dz_ci_high: float
    degenerate_variance: bool = False


@dataclass
class ComparisonRow:
    mechanism: str
    mode: str
    fusion: str
    baseline_config: str
    config_id: str
    delta_mean_grade: float
    t_stat: float
    p_value_t: float
    p_value_wilcoxon: float
    cohens_dz: float
    ci_low: float
    ci_high: float
    dz_ci_low: float
    dz_ci_high: float
    n_queries: int
    significant_bonferroni: bool


def _rankdata(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing the mean rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    sorted_vals = values[order]
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _wilcoxon_exact_p(doubled_ranks: list[int], t_min_doubled: float) -> float:
    """Exact two-sided p for the smaller signed-rank sum.

    DP over the distribution of the doubled positive-rank sum under
    sign-flip symmetry; ``counts[s]`` is the number of sign assignments
    with doubled sum s.
    """
    total = sum(doubled_ranks)
    counts = np.zeros(total + 1, dtype=float)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: len(counts) - r]
        counts = counts + shifted
    counts /= counts.sum()
    # two-sided: P(min(T+, T-) <= t_min), doubled lattice
    lo = counts[: int(math.floor(t_min_doubled + 1e-9)) + 1].sum()
    hi = counts[int(math.ceil(total - t_min_doubled - 1e-9)):].sum()
    return float(min(1.0, lo + hi))


def wilcoxon_signed_rank(x, y) -> float:
    """Two-sided Wilcoxon signed-rank p-value; zero differences dropped.

    All-zero differences are degenerate and reported as p = 1.
    """
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    d = d[d != 0.0]
    n = len(d)
    if n == 0:
        return 1.0
    ranks = _rankdata(np.abs(d))
    r_plus = float(ranks[d > 0].sum())
    r_minus = float(ranks[d < 0].sum())
    t_min = min(r_plus, r_minus)
    if n <= 25:
        doubled = [int(round(2 * r)) for r in ranks]
        return _wilcoxon_exact_p(doubled, 2 * t_min)
    mn = n * (n + 1) * 0.25
    se = n * (n + 1) * (2 * n + 1)
    _, tie_counts = np.unique(ranks, return_counts=True)
    se -= 0.5 * float(((tie_counts ** 3) - tie_counts).sum())
    se = math.sqrt(se / 24.0)
    if se == 0.0:
        return 1.0
    z = (t_min - mn) / se
    return float(2.0 * sps.norm.sf(abs(z)))


def paired_t(x, y) -> tuple[float, float, bool]:
    """Paired t statistic and two-sided p; returns (t, p, degenerate)."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    n = len(d)
    if n < 2:
        raise ValueError("paired test needs n >= 2")
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0, True
        return math.copysign(math.inf, mean), 0.0, True
    t = mean / (sd / math.sqrt(n))
    p = float(2.0 * sps.t.sf(abs(t), n - 1))
    return t, p, False


def cohens_dz(x, y) -> tuple[float, bool]:
    """Paired effect size: mean difference / sd of differences."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    sd = float(d.std(ddof=1)) if len(d) > 1 else 0.0
    if sd == 0.0:
        return 0.0, True
    return float(d.mean()) / sd, False


def bootstrap_ci(diffs, stat: str = "mean", n_resamples: int = 10_000,
                 seed: int = 0, level: float = 0.95) -> tuple[float, float]:
    """Seeded percentile bootstrap CI for the mean difference or d_z."""
    d = np.asarray(diffs, dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(d), size=(n_resamples, len(d)))
    samples = d[idx]
    if stat == "mean":
        values = samples.mean(axis=1)
    elif stat == "dz":
        means = samples.mean(axis=1)
        sds = samples.std(axis=1, ddof=1)
        values = np.where(sds == 0.0, 0.0, means / np.where(sds == 0.0, 1.0, sds))
    else:
        raise ValueError(f"unknown bootstrap stat {stat!r}")
    alpha = (1.0 - level) / 2.0
    return (
        float(np.quantile(values, alpha)),
        float(np.quantile(values, 1.0 - alpha)),
    )


def paired_tests(x, y, n_resamples: int = 10_000, seed: int = 0) -> PairedTestResult:
    """All paired statistics for two per-query score vectors (x vs y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise ValueError("paired samples must have equal length")
    if len(x) < 2:
        raise ValueError("paired test needs n >= 2")
    d = x - y
    t, p_t, degen_t = paired_t(x, y)
    dz, degen_dz = cohens_dz(x, y)
    ci_low, ci_high = bootstrap_ci(d, "mean", n_resamples, seed)
    dz_low, dz_high = bootstrap_ci(d, "dz", n_resamples, seed)
    return PairedTestResult(
        n=len(x),
        mean_diff=float(d.mean()),
        t_stat=t,
        p_value_t=p_t,
        p_value_wilcoxon=wilcoxon_signed_rank(x, y),
        cohens_dz=dz,
        ci_low=ci_low,
        ci_high=ci_high,
        dz_ci_low=dz_low,
        dz_ci_high=dz_high,
        degenerate_variance=degen_t or degen_dz,
    )


def normal_ci(values, level: float = 0.95) -> tuple[float, float]:
    """Normal-approximation CI for a single configuration's mean."""
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return 0.0, 0.0
    mean = float(v.mean())
    if len(v) == 1:
        return mean, mean
    se = float(v.std(ddof=1)) / math.sqrt(len(v))
    z = float(sps.norm.ppf(0.5 + level / 2.0))
    return mean - z * se, mean + z * se


def bonferroni_alpha(alpha: float = 0.05, n_comparisons: int = 40) -> float:
    return alpha / n_comparisons
