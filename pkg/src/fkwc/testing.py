"""Rank statistics on depth orderings, chi-square calibration, and
depth-based pairwise multiple comparisons."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.stats import chi2, norm, rankdata

from .depths import DepthSpec, RankVector, depth_ranks, depth_sort_keys, derive_seed
from .exceptions import ParameterError
from .fdata import FunctionalDataset

_CORRECTIONS = ("sidak", "bonferroni", "holm")


@dataclass(frozen=True)
class TestConfig:
    """Configuration of a k-sample covariance rank test."""

    depth_spec: DepthSpec = DepthSpec()
    alpha: float = 0.05
    percentile_r: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        r = self.percentile_r
        if r is not None and not 0.0 < r <= 1.0:
            raise ParameterError(f"percentile_r must lie in (0, 1], got {r}")


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: int
    p_value: float
    group_mean_ranks: tuple
    group_deviations: tuple
    statistic_kind: str
    alpha: float
    reject: bool
    tie_breaks_applied: int = 0

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "statistic_kind": self.statistic_kind,
            "df": self.df,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "reject": self.reject,
            "group_mean_ranks": list(self.group_mean_ranks),
            "group_deviations": list(self.group_deviations),
            "tie_breaks_applied": self.tie_breaks_applied,
        }


@dataclass(frozen=True)
class MCResult:
    """Pairwise comparison p-values, raw and family-wise adjusted."""

    pairwise_raw_p: np.ndarray
    pairwise_adjusted_p: np.ndarray
    num_comparisons: int
    correction: str

    def to_dict(self) -> dict:
        return {
            "correction": self.correction,
            "num_comparisons": self.num_comparisons,
            "pairwise_raw_p": self.pairwise_raw_p.tolist(),
            "pairwise_adjusted_p": self.pairwise_adjusted_p.tolist(),
        }


def _validate_ranks_groups(ranks, groups):
    if isinstance(ranks, RankVector):
        ranks = ranks.ranks
    ranks = np.asarray(ranks)
    groups = np.asarray(groups, dtype=int)
    n = ranks.size
    if groups.size != n:
        raise ParameterError(f"{groups.size} group labels for {n} ranks")
    if not np.array_equal(np.sort(ranks), np.arange(1, n + 1)):
        raise ParameterError("ranks must form a permutation of 1..N (break ties first)")
    j = int(groups.max())
    sizes = np.bincount(groups, minlength=j + 1)[1:]
    if groups.min() < 1 or np.any(sizes == 0):
        raise ParameterError("every group label in 1..J must appear at least once")
    if j < 2:
        raise ParameterError("need at least two groups")
    return ranks.astype(float), groups, sizes


def kw_statistic(ranks, groups) -> float:
    """Rank dispersion statistic 12/(N(N+1)) * sum_j N_j (Rbar_j - (N+1)/2)^2."""
    ranks, groups, sizes = _validate_ranks_groups(ranks, groups)
    n = ranks.size
    center = (n + 1) / 2.0
    total = 0.0
    for j, nj in enumerate(sizes, start=1):
        total += nj * (ranks[groups == j].mean() - center) ** 2
    return 12.0 / (n * (n + 1)) * total


def percentile_statistic(ranks, groups, r: float) -> float:
    """Percentile-modified statistic using only the N' = floor(rN) lowest
    (least deep) ranks, weighted (N'-s+1) for rank s."""
    ranks, groups, sizes = _validate_ranks_groups(ranks, groups)
    if not 0.0 < r <= 1.0:
        raise ParameterError(f"r must lie in (0, 1], got {r}")
    n = ranks.size
    j_count = sizes.size
    n_prime = int(math.floor(r * n))
    if n_prime < 1:
        raise ParameterError(f"floor(r*N) = {n_prime}; need at least one retained rank")
    if n_prime < j_count:
        warnings.warn(
            f"floor(r*N) = {n_prime} < J = {j_count}: percentile statistic is degenerate",
            stacklevel=2,
        )
    group_of_rank = np.empty(n + 1, dtype=int)
    group_of_rank[ranks.astype(int)] = groups
    s = np.arange(1, n_prime + 1)
    weights = n_prime - s + 1
    total = 0.0
    for j, nj in enumerate(sizes, start=1):
        delta = group_of_rank[s] == j
        ssum = float((weights * delta).sum())
        rho = nj * n_prime * (n_prime + 1) / (2.0 * n)
        sigma2 = (
            nj
            * (n - nj)
            * n_prime
            * (n_prime + 1)
            * (2.0 * n * (2 * n_prime + 1) - 3.0 * n_prime * (n_prime + 1))
            / (12.0 * n * n * (n - 1))
        )
        if sigma2 <= 0.0:
            raise ParameterError("degenerate configuration: zero variance term")
        total += (1.0 - nj / n) * (ssum - rho) ** 2 / sigma2
    return total


def fkwc_test(ds: FunctionalDataset, config: TestConfig = TestConfig()) -> TestResult:
    """Depth-rank k-sample test for equality of covariance operators.

    Ranks the pooled sample with the configured depth, forms the rank
    statistic (percentile-modified when ``percentile_r`` is set), and
    calibrates it against chi-square with J-1 degrees of freedom.
    """
    if ds.n_groups < 2:
        raise ParameterError("need at least two groups")
    ds_eff = ds
    if config.depth_spec.use_derivatives and ds.derivatives is None:
        ds_eff = ds.with_finite_difference_derivatives()
    rv = depth_ranks(ds_eff, config.depth_spec)
    ranks = rv.ranks.astype(float)
    groups = ds.groups
    n = ranks.size
    j = ds.n_groups
    if config.percentile_r is None:
        stat = kw_statistic(rv.ranks, groups)
        kind = "W"
    else:
        stat = percentile_statistic(rv.ranks, groups, config.percentile_r)
        kind = "M_r"
    df = j - 1
    p = float(chi2.sf(stat, df))
    center = (n + 1) / 2.0
    means = tuple(float(ranks[groups == g].mean()) for g in range(1, j + 1))
    devs = tuple((mu - center) ** 2 for mu in means)
    return TestResult(
        statistic=float(stat),
        df=df,
        p_value=p,
        group_mean_ranks=means,
        group_deviations=devs,
        statistic_kind=kind,
        alpha=config.alpha,
        reject=bool(p < config.alpha),
        tie_breaks_applied=rv.tie_breaks_applied,
    )


# ---------------------------------------------------------------------------
# Wilcoxon rank-sum and Steel-type multiple comparisons
# ---------------------------------------------------------------------------

def wilcoxon_rank_sum(x, y, method: str = "normal") -> float:
    """Two-sided Wilcoxon rank-sum p-value.

    ``normal`` uses the tie-corrected normal approximation (no continuity
    correction); ``exact`` enumerates all splits of the observed mid-ranks,
    feasible only for small samples.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n1, n2 = x.size, y.size
    if n1 == 0 or n2 == 0:
        raise ParameterError("both samples must be non-empty")
    pooled = np.concatenate([x, y])
    n = n1 + n2
    ranks = rankdata(pooled)
    t_obs = ranks[:n1].sum()
    mu = n1 * (n + 1) / 2.0
    if method == "exact":
        if math.comb(n, n1) > 2_000_000:
            raise ParameterError(
                f"exact enumeration over C({n},{n1}) splits is infeasible; use method='normal'"
            )
        doubled = np.round(2.0 * ranks).astype(int)  # mid-ranks doubled are integers
        obs = int(round(2.0 * t_obs))
        mu2 = doubled.sum() * n1 / n  # = 2*mu, exact as a float of integers
        dev_obs = abs(obs - mu2)
        hits = 0
        total = 0
        for comb_idx in itertools.combinations(range(n), n1):
            t2 = sum(doubled[i] for i in comb_idx)
            if abs(t2 - mu2) >= dev_obs - 1e-9:
                hits += 1
            total += 1
        return hits / total
    if method != "normal":
        raise ParameterError(f"unknown method {method!r}; expected 'normal' or 'exact'")
    _, counts = np.unique(pooled, return_counts=True)
    ties = float(((counts**3) - counts).sum())
    var = n1 * n2 / 12.0 * ((n + 1) - ties / (n * (n - 1)))
    if var <= 0.0:
        return 1.0  # all observations identical
    z = (t_obs - mu) / math.sqrt(var)
    return float(2.0 * norm.sf(abs(z)))


def adjust_pvalues(raw: np.ndarray, m: int, correction: str) -> np.ndarray:
    """Family-wise adjustment of a vector of raw p-values for m tests."""
    raw = np.asarray(raw, dtype=float)
    if correction == "sidak":
        return np.clip(1.0 - (1.0 - raw) ** m, 0.0, 1.0)
    if correction == "bonferroni":
        return np.clip(raw * m, 0.0, 1.0)
    if correction == "holm":
        order = np.argsort(raw, kind="stable")
        adj = np.empty_like(raw)
        running = 0.0
        for pos, idx in enumerate(order):
            mult = max(m - pos, 1)
            running = max(running, min(1.0, mult * raw[idx]))
            adj[idx] = running
        return adj
    raise ParameterError(f"unknown correction {correction!r}; expected one of {_CORRECTIONS}")


def steel_mc(
    ds: FunctionalDataset,
    spec: DepthSpec,
    correction_count: Optional[int] = None,
    correction: str = "sidak",
    method: str = "normal",
) -> MCResult:
    """Pairwise covariance comparisons via two-group depth recomputation.

    For every group pair the dataset is restricted to those two groups,
    depths are recomputed against that two-group mixture, and a two-sided
    Wilcoxon rank-sum test compares the group depth values.  P-values are
    adjusted over ``correction_count`` simultaneous tests (default
    J(J-1)/2).
    """
    if correction not in _CORRECTIONS:
        raise ParameterError(f"unknown correction {correction!r}; expected one of {_CORRECTIONS}")
    j = ds.n_groups
    if j < 2:
        raise ParameterError("need at least two groups")
    if np.any(ds.group_sizes < 4):
        warnings.warn(
            "group sizes below 4: the normal approximation to the rank-sum "
            "null is poor; consider method='exact'",
            stacklevel=2,
        )
    pairs = list(itertools.combinations(range(1, j + 1), 2))
    m = correction_count if correction_count is not None else len(pairs)
    if m < 1:
        raise ParameterError("correction_count must be >= 1")
    ds_eff = ds
    if spec.use_derivatives and ds.derivatives is None:
        ds_eff = ds.with_finite_difference_derivatives()
    raw = np.ones((j, j))
    raw_list = []
    for pair_index, (a, b) in enumerate(pairs):
        sub = ds_eff.subset([a, b])
        pair_spec = replace(spec, rng_seed=derive_seed(spec.rng_seed, 2, pair_index))
        keys = depth_sort_keys(sub, pair_spec)
        p = wilcoxon_rank_sum(keys[sub.groups == 1], keys[sub.groups == 2], method=method)
        raw[a - 1, b - 1] = raw[b - 1, a - 1] = p
        raw_list.append(p)
    adj_list = adjust_pvalues(np.array(raw_list), m, correction)
    adjusted = np.ones((j, j))
    for (a, b), padj in zip(pairs, adj_list):
        adjusted[a - 1, b - 1] = adjusted[b - 1, a - 1] = padj
    return MCResult(
        pairwise_raw_p=raw,
        pairwise_adjusted_p=adjusted,
        num_comparisons=m,
        correction=correction,
    )
