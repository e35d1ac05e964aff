"""Functional data depths and depth-based ranking of pooled samples.

Six depth families are provided, each with a derivative-augmented variant:

* ``ltr``      L2-root depth; its ranks reduce to ranks of squared norms
* ``rp``       random projection depth (mid-rank CDF score per direction)
* ``mfhd``     integrated halfspace depth (bivariate Tukey when primed)
* ``mbd``      modified band depth over curve pairs
* ``spatial``  functional spatial depth
* ``ksd``      kernelized spatial depth (Gaussian kernel, median heuristic)

Every computation is a pure function of (dataset, spec); randomness
(projection directions, tie-breaking) is drawn from generators derived
deterministically from the spec seed, so results do not depend on
evaluation order or thread count.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, ParameterError
from .fdata import FunctionalDataset, differentiate

_KINDS = ("ltr", "rp", "mfhd", "mbd", "spatial", "ksd")

MEDIAN_HEURISTIC = "median-heuristic"


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Deterministic child generator for (seed, key...) streams."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), *key]))


def derive_seed(seed: int, *key: int) -> int:
    """Deterministic 63-bit child seed for (seed, key...)."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), *key])
    return int(ss.generate_state(1, np.uint64)[0] >> 1)


@dataclass(frozen=True)
class DepthSpec:
    """Which depth to compute and its options.

    ``kernel_bandwidth`` is the squared bandwidth sigma^2 of the Gaussian
    kernel exp(-||x-z||^2 / sigma^2) used by ``ksd``; the default estimates
    it as the median of pairwise squared distances.
    """

    kind: str = "ltr"
    use_derivatives: bool = False
    num_projections: int = 20
    band_order: int = 2
    channel_weights: tuple = (0.5, 0.5)
    kernel_bandwidth: object = MEDIAN_HEURISTIC
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ParameterError(f"unknown depth kind {self.kind!r}; expected one of {_KINDS}")
        if self.num_projections < 1:
            raise ParameterError("num_projections must be >= 1")
        if self.band_order < 2:
            raise ParameterError("band_order must be >= 2")
        w = np.asarray(self.channel_weights, dtype=float)
        if w.ndim != 1 or w.size != 2 or np.any(w < 0):
            raise ParameterError("channel_weights must be two nonnegative reals")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ParameterError(f"channel_weights must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "channel_weights", (float(w[0]), float(w[1])))
        bw = self.kernel_bandwidth
        if isinstance(bw, str):
            if bw != MEDIAN_HEURISTIC:
                raise ParameterError(
                    f"kernel_bandwidth must be positive or {MEDIAN_HEURISTIC!r}, got {bw!r}"
                )
        elif not (isinstance(bw, (int, float)) and bw > 0):
            raise ParameterError(f"kernel_bandwidth must be positive, got {bw!r}")

    @property
    def label(self) -> str:
        return self.kind + ("'" if self.use_derivatives else "")


@dataclass(frozen=True)
class DepthVector:
    """Depth values for the curves they were evaluated on."""

    values: np.ndarray
    spec: DepthSpec

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(vals)):
            raise DataError("depth values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class RankVector:
    """A permutation of 1..N obtained by ranking depths ascending
    (rank N = deepest), random ties broken."""

    ranks: np.ndarray
    tie_breaks_applied: int

    def __post_init__(self):
        ranks = np.asarray(self.ranks, dtype=int)
        n = ranks.size
        if not np.array_equal(np.sort(ranks), np.arange(1, n + 1)):
            raise DataError("ranks must form a permutation of 1..N")
        ranks = ranks.copy()
        ranks.setflags(write=False)
        object.__setattr__(self, "ranks", ranks)


# ---------------------------------------------------------------------------
# channel plumbing
# ---------------------------------------------------------------------------

def _channels(ds: FunctionalDataset, use_derivatives: bool, queries):
    """Sample/query value matrices per channel (curves, then derivatives).

    ``queries`` may be None (evaluate the sample curves themselves), another
    dataset on the same grid, or a raw array of curve values; the raw form
    computes derivative queries by finite differences when needed.
    """
    if queries is None:
        queries = ds
    if isinstance(queries, FunctionalDataset):
        if queries.grid != ds.grid:
            raise DataError("query grid does not match sample grid")
        q_curves = queries.curves
        q_deriv = queries.derivatives
        if use_derivatives and q_deriv is None:
            q_deriv = differentiate(q_curves, ds.grid)
    else:
        q_curves = np.atleast_2d(np.asarray(queries, dtype=float))
        if q_curves.shape[1] != ds.grid.m:
            raise DataError(
                f"query curves have {q_curves.shape[1]} values, expected {ds.grid.m}"
            )
        q_deriv = differentiate(q_curves, ds.grid) if use_derivatives else None
    chans = [(ds.curves, q_curves)]
    if use_derivatives:
        if ds.derivatives is None:
            raise DataError(
                "derivative-augmented depth requested but the derivative channel is missing"
            )
        chans.append((ds.derivatives, q_deriv))
    return chans


def _weights(grid):
    return grid.trapezoid_weights


# ---------------------------------------------------------------------------
# L2-root depth
# ---------------------------------------------------------------------------

def _mean_sq_distance(sample, queries, w):
    """mean_j ||q - X_j||^2 for every query q, via the expanded form."""
    sq_s = (sample * sample) @ w
    sq_q = (queries * queries) @ w
    xbar = sample.mean(axis=0)
    cross = queries @ (w * xbar)
    out = sq_q - 2.0 * cross + sq_s.mean()
    return np.maximum(out, 0.0)


def ltr_depth(ds: FunctionalDataset, p: int = 0, queries=None) -> DepthVector:
    """L2-root depth against the pooled empirical sample.

    With ``p`` derivative channels the per-channel root mean squared
    distances are averaged:  D = (1 + (1/(p+1)) sum_k sqrt(mean_j
    ||x^(k)-X_j^(k)||^2))^-1, values in (0, 1].
    """
    if p not in (0, 1):
        raise ParameterError(f"p must be 0 or 1, got {p}")
    chans = _channels(ds, p == 1, queries)
    w = _weights(ds.grid)
    total = np.zeros(chans[0][1].shape[0])
    for sample, qs in chans:
        total += np.sqrt(_mean_sq_distance(sample, qs, w))
    depth = 1.0 / (1.0 + total / (p + 1))
    spec = DepthSpec(kind="ltr", use_derivatives=(p == 1))
    return DepthVector(depth, spec)


def ltr_rank_scores(ds: FunctionalDataset, use_derivatives: bool = False) -> np.ndarray:
    """Norm scores whose descending order matches ascending L2-root depth
    ranks on centered data.

    Without derivatives the score is the squared L2 norm; with them it is
    the sum of the curve and derivative channel norms.  This is the fast
    ranking path: no empirical-distribution estimate is involved.
    """
    w = _weights(ds.grid)
    if not use_derivatives:
        return (ds.curves * ds.curves) @ w
    if ds.derivatives is None:
        raise DataError("derivative channel missing for derivative-augmented scores")
    return np.sqrt((ds.curves * ds.curves) @ w) + np.sqrt(
        (ds.derivatives * ds.derivatives) @ w
    )


# ---------------------------------------------------------------------------
# random projection depth
# ---------------------------------------------------------------------------

def _rp_directions(m: int, count: int, step: float, rng) -> np.ndarray:
    """Random unit-norm direction curves: white noise smoothed with a
    5-point moving average, then normalized in L2."""
    raw = rng.standard_normal((count, m))
    kernel = np.full(5, 0.2)
    smooth = np.empty_like(raw)
    for i in range(count):
        smooth[i] = np.convolve(raw[i], kernel, mode="same")
    w = np.full(m, step)
    w[0] *= 0.5
    w[-1] *= 0.5
    norms = np.sqrt((smooth * smooth) @ w)
    norms[norms == 0.0] = 1.0
    return smooth / norms[:, None]


def _midrank_cdf(sample_vals: np.ndarray, query_vals: np.ndarray) -> np.ndarray:
    """F(z) = (#{sample < z} + 0.5 #{sample = z}) / n at each query value."""
    n = sample_vals.size
    srt = np.sort(sample_vals)
    less = np.searchsorted(srt, query_vals, side="left")
    upto = np.searchsorted(srt, query_vals, side="right")
    return (less + 0.5 * (upto - less)) / n


def rp_depth(ds: FunctionalDataset, spec: DepthSpec, queries=None) -> DepthVector:
    """Random projection depth: F_u(z)(1 - F_u(z)) averaged over seeded
    unit-norm directions u, with the mid-rank empirical CDF."""
    chans = _channels(ds, False, queries)
    sample, qs = chans[0]
    w = _weights(ds.grid)
    dirs = _rp_directions(ds.grid.m, spec.num_projections, ds.grid.step, derive_rng(spec.rng_seed, 0))
    proj_s = sample @ (dirs * w).T
    proj_q = qs @ (dirs * w).T
    depth = np.zeros(qs.shape[0])
    for k in range(spec.num_projections):
        f = _midrank_cdf(proj_s[:, k], proj_q[:, k])
        depth += f * (1.0 - f)
    return DepthVector(depth / spec.num_projections, spec)


def _kde_1d(sample: np.ndarray, queries: np.ndarray, bandwidth: float) -> np.ndarray:
    d = (queries[:, None] - sample[None, :]) / bandwidth
    return np.exp(-0.5 * d * d).mean(axis=1) / (bandwidth * math.sqrt(2.0 * math.pi))


def rp_depth_deriv(ds: FunctionalDataset, spec: DepthSpec, queries=None) -> DepthVector:
    """Derivative-augmented random projection depth.

    For each direction the (curve, derivative) projection pairs are scored
    with a product-Gaussian kernel density estimate (Scott bandwidths,
    n^(-1/6) per coordinate); a degenerate coordinate falls back to a
    univariate estimate in the other one.  Only the ranks of the resulting
    values are meaningful.
    """
    chans = _channels(ds, True, queries)
    (s0, q0), (s1, q1) = chans
    w = _weights(ds.grid)
    dirs = _rp_directions(ds.grid.m, spec.num_projections, ds.grid.step, derive_rng(spec.rng_seed, 0))
    n = s0.shape[0]
    depth = np.zeros(q0.shape[0])
    # identical sample rows make a channel degenerate in every direction;
    # the per-direction test below also guards projections whose spread is
    # at rounding level (blocked matmuls perturb identical rows by ulps)
    rows_equal0 = bool(np.all(s0 == s0[0]))
    rows_equal1 = bool(np.all(s1 == s1[0]))

    def _degenerate(rows_equal, z):
        if n < 2 or rows_equal:
            return True
        return np.ptp(z) <= 1e-12 * max(float(np.abs(z).max()), 1e-300)

    for k in range(spec.num_projections):
        u = dirs[k] * w
        zs0, zq0 = s0 @ u, q0 @ u
        zs1, zq1 = s1 @ u, q1 @ u
        deg0 = _degenerate(rows_equal0, zs0)
        deg1 = _degenerate(rows_equal1, zs1)
        if deg0 and deg1:
            depth += 1.0
            continue
        if deg0 or deg1:
            zs, zq = (zs1, zq1) if deg0 else (zs0, zq0)
            h = zs.std(ddof=1) * n ** (-1.0 / 5.0)
            depth += _kde_1d(zs, zq, h)
            continue
        sd0 = zs0.std(ddof=1)
        sd1 = zs1.std(ddof=1)
        h0 = sd0 * n ** (-1.0 / 6.0)
        h1 = sd1 * n ** (-1.0 / 6.0)
        d0 = (zq0[:, None] - zs0[None, :]) / h0
        d1 = (zq1[:, None] - zs1[None, :]) / h1
        depth += np.exp(-0.5 * (d0 * d0 + d1 * d1)).mean(axis=1) / (
            2.0 * math.pi * h0 * h1
        )
    return DepthVector(depth / spec.num_projections, spec)


# ---------------------------------------------------------------------------
# integrated (multivariate functional) halfspace depth
# ---------------------------------------------------------------------------

def halfspace_depth_2d(points: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Exact bivariate Tukey depth of each query against ``points``.

    Rotating-line formulation: with the query at the origin, the minimal
    closed-halfplane count equals (#coincident points) + K - (max open
    half-circle count over the K nonzero direction angles); the maximum is
    scanned at the 2K arc breakpoints in O(K log K).
    """
    pts = np.asarray(points, dtype=float)
    qs = np.atleast_2d(np.asarray(queries, dtype=float))
    n = pts.shape[0]
    out = np.empty(qs.shape[0])
    for i, q in enumerate(qs):
        d = pts - q
        nonzero = (d[:, 0] != 0.0) | (d[:, 1] != 0.0)
        coincident = n - int(np.count_nonzero(nonzero))
        dd = d[nonzero]
        if dd.shape[0] == 0:
            out[i] = 1.0
            continue
        ang = np.sort(np.arctan2(dd[:, 1], dd[:, 0]))
        k = ang.size
        shifted = ang + 2.0 * np.pi
        doubled = np.concatenate([ang, shifted])
        # piece starting at angle a counts the half-open arc (a, a+pi];
        # pieces starting at a-pi are evaluated as (a+pi, a+2pi] against the
        # wrapped copies, whose floats must match `shifted` exactly
        starts = np.concatenate([ang, ang + np.pi])
        ends = np.concatenate([ang + np.pi, shifted])
        hi = np.searchsorted(doubled, ends, side="right")
        lo = np.searchsorted(doubled, starts, side="right")
        out[i] = (coincident + k - int((hi - lo).max())) / n
    return out


def mfhd(ds: FunctionalDataset, spec: DepthSpec, queries=None) -> DepthVector:
    """Halfspace depth at each grid point, integrated over [0, 1].

    Unprimed: univariate depth min(#below, #above)/N per point.  Primed:
    exact bivariate Tukey depth of the (value, derivative) pairs.
    """
    chans = _channels(ds, spec.use_derivatives, queries)
    sample, qs = chans[0]
    w = _weights(ds.grid)
    n = sample.shape[0]
    if not spec.use_derivatives:
        hd = np.empty((qs.shape[0], ds.grid.m))
        for t in range(ds.grid.m):
            col = np.sort(sample[:, t])
            le = np.searchsorted(col, qs[:, t], side="right")
            ge = n - np.searchsorted(col, qs[:, t], side="left")
            hd[:, t] = np.minimum(le, ge) / n
        return DepthVector(hd @ w, spec)
    dsample, dqs = chans[1]
    hd = np.empty((qs.shape[0], ds.grid.m))
    for t in range(ds.grid.m):
        pts = np.column_stack([sample[:, t], dsample[:, t]])
        qpts = np.column_stack([qs[:, t], dqs[:, t]])
        hd[:, t] = halfspace_depth_2d(pts, qpts)
    return DepthVector(hd @ w, spec)


# ---------------------------------------------------------------------------
# modified band depth
# ---------------------------------------------------------------------------

def _falling_comb(a: np.ndarray, k: int) -> np.ndarray:
    """C(a, k) elementwise for integer arrays, as floats (0 where a < k)."""
    out = np.ones_like(a, dtype=float)
    for i in range(k):
        out *= np.maximum(a - i, 0)
    return out / math.factorial(k)


def _mbd_channel(sample, qs, w, order: int) -> np.ndarray:
    """Sum over k=2..order of the expected in-band time fraction, where
    bands are delimited by k-subsets of sample curves (weak inequalities,
    own pairings included when the query is in the sample)."""
    n = sample.shape[0]
    m = sample.shape[1]
    strictly_below = np.empty((qs.shape[0], m))
    strictly_above = np.empty((qs.shape[0], m))
    for t in range(m):
        col = np.sort(sample[:, t])
        strictly_below[:, t] = np.searchsorted(col, qs[:, t], side="left")
        strictly_above[:, t] = n - np.searchsorted(col, qs[:, t], side="right")
    depth = np.zeros(qs.shape[0])
    for k in range(2, order + 1):
        total = math.comb(n, k)
        if total == 0:
            continue
        outside = _falling_comb(strictly_below, k) + _falling_comb(strictly_above, k)
        depth += (1.0 - outside / total) @ w
    return depth


def mbd(ds: FunctionalDataset, spec: DepthSpec, queries=None) -> DepthVector:
    """Modified band depth; the primed variant averages the curve and
    derivative channel depths with the spec's channel weights."""
    chans = _channels(ds, spec.use_derivatives, queries)
    w = _weights(ds.grid)
    if not spec.use_derivatives:
        return DepthVector(_mbd_channel(*chans[0], w, spec.band_order), spec)
    w0, w1 = spec.channel_weights
    vals = w0 * _mbd_channel(*chans[0], w, spec.band_order)
    vals += w1 * _mbd_channel(*chans[1], w, spec.band_order)
    return DepthVector(vals, spec)


# ---------------------------------------------------------------------------
# spatial and kernelized spatial depth
# ---------------------------------------------------------------------------

def _spatial_channel(sample, qs, w) -> np.ndarray:
    """1 - || mean_j s(q - X_j) || with s the unit map, s(0) = 0."""
    n = sample.shape[0]
    out = np.empty(qs.shape[0])
    for i in range(qs.shape[0]):
        diff = qs[i][None, :] - sample
        norms = np.sqrt((diff * diff) @ w)
        keep = norms > 0.0
        mean_vec = (diff[keep] / norms[keep, None]).sum(axis=0) / n
        out[i] = 1.0 - math.sqrt(max(float((mean_vec * mean_vec) @ w), 0.0))
    return out


def spatial_depth(ds: FunctionalDataset, spec: DepthSpec, queries=None) -> DepthVector:
    """Functional spatial depth; primed variant is the weighted average of
    the per-channel depths."""
    chans = _channels(ds, spec.use_derivatives, queries)
    w = _weights(ds.grid)
    if not spec.use_derivatives:
        return DepthVector(_spatial_channel(*chans[0], w), spec)
    w0, w1 = spec.channel_weights
    vals = w0 * _spatial_channel(*chans[0], w)
    vals += w1 * _spatial_channel(*chans[1], w)
    return DepthVector(vals, spec)


def _pairwise_sq_dists(a, b, w) -> np.ndarray:
    # direct differences: identical curves yield exactly zero, which the
    # s(0) = 0 convention relies on
    out = np.empty((a.shape[0], b.shape[0]))
    for i in range(a.shape[0]):
        diff = a[i][None, :] - b
        out[i] = (diff * diff) @ w
    return out


def _ksd_channel(sample, qs, w, bandwidth) -> np.ndarray:
    n = sample.shape[0]
    d2_ss = _pairwise_sq_dists(sample, sample, w)
    if bandwidth == MEDIAN_HEURISTIC:
        iu = np.triu_indices(n, k=1)
        pair = d2_ss[iu]
        sigma2 = float(np.median(pair)) if pair.size else 1.0
        if sigma2 <= 0.0:
            sigma2 = 1.0
    else:
        sigma2 = float(bandwidth)
    gram_ss = np.exp(-d2_ss / sigma2)
    d2_qs = _pairwise_sq_dists(qs, sample, w)
    gram_qs = np.exp(-d2_qs / sigma2)
    out = np.empty(qs.shape[0])
    for i in range(qs.shape[0]):
        feat_sq = np.maximum(2.0 - 2.0 * gram_qs[i], 0.0)
        dist = np.sqrt(feat_sq)
        keep = dist > 0.0
        if not keep.any():
            out[i] = 1.0
            continue
        g = gram_qs[i][keep]
        dk = dist[keep]
        inner = (1.0 - g[:, None] - g[None, :] + gram_ss[np.ix_(keep, keep)])
        inner /= dk[:, None] * dk[None, :]
        out[i] = 1.0 - math.sqrt(max(inner.sum(), 0.0)) / n
    return out


def ksd_depth(ds: FunctionalDataset, spec: DepthSpec, queries=None) -> DepthVector:
    """Kernelized spatial depth with the Gaussian kernel, evaluated through
    the kernel trick; primed variant averages per-channel depths."""
    chans = _channels(ds, spec.use_derivatives, queries)
    w = _weights(ds.grid)
    if not spec.use_derivatives:
        return DepthVector(_ksd_channel(*chans[0], w, spec.kernel_bandwidth), spec)
    w0, w1 = spec.channel_weights
    vals = w0 * _ksd_channel(*chans[0], w, spec.kernel_bandwidth)
    vals += w1 * _ksd_channel(*chans[1], w, spec.kernel_bandwidth)
    return DepthVector(vals, spec)


# ---------------------------------------------------------------------------
# dispatch and ranking
# ---------------------------------------------------------------------------

def compute_depth(ds: FunctionalDataset, spec: DepthSpec, queries=None) -> DepthVector:
    """Evaluate the depth described by ``spec`` for every curve of
    ``queries`` (default: the dataset itself) against the pooled sample."""
    if spec.kind == "ltr":
        result = ltr_depth(ds, p=1 if spec.use_derivatives else 0, queries=queries)
        return DepthVector(result.values, spec)
    if spec.kind == "rp":
        if spec.use_derivatives:
            return rp_depth_deriv(ds, spec, queries)
        return rp_depth(ds, spec, queries)
    if spec.kind == "mfhd":
        return mfhd(ds, spec, queries)
    if spec.kind == "mbd":
        return mbd(ds, spec, queries)
    if spec.kind == "spatial":
        return spatial_depth(ds, spec, queries)
    if spec.kind == "ksd":
        return ksd_depth(ds, spec, queries)
    raise ParameterError(f"unknown depth kind {spec.kind!r}")


def depth_sort_keys(ds: FunctionalDataset, spec: DepthSpec) -> np.ndarray:
    """Values whose ascending order is the depth-rank order (rank N =
    deepest).  The L2-root path negates the norm scores instead of
    estimating depths."""
    if spec.kind == "ltr":
        ds_eff = ds
        if spec.use_derivatives and ds.derivatives is None:
            ds_eff = ds.with_finite_difference_derivatives()
        return -ltr_rank_scores(ds_eff, spec.use_derivatives)
    ds_eff = ds
    if spec.use_derivatives and ds.derivatives is None:
        ds_eff = ds.with_finite_difference_derivatives()
    return compute_depth(ds_eff, spec).values


def ranks_with_tiebreak(keys, seed: int) -> RankVector:
    """Ranks 1..N of ``keys`` ascending; exact ties are ordered by a seeded
    uniform shuffle, so every tied entry is equally likely to come first."""
    keys = np.asarray(keys, dtype=float)
    n = keys.size
    tiebreak = derive_rng(seed, 1).permutation(n)
    order = np.lexsort((tiebreak, keys))
    ranks = np.empty(n, dtype=int)
    ranks[order] = np.arange(1, n + 1)
    ties = n - np.unique(keys).size
    return RankVector(ranks, ties)


def depth_ranks(ds: FunctionalDataset, spec: DepthSpec) -> RankVector:
    """Ranks 1..N of the pooled sample by ascending depth (rank N =
    deepest), exact ties broken by a seeded uniform shuffle."""
    return ranks_with_tiebreak(depth_sort_keys(ds, spec), spec.rng_seed)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def depth_table(ds: FunctionalDataset, dv: DepthVector, rv: RankVector):
    """Rows of (index, group, depth, rank) for export."""
    return [
        (i, int(g), float(d), int(r))
        for i, (g, d, r) in enumerate(zip(ds.groups, dv.values, rv.ranks))
    ]


def save_depths_csv(ds: FunctionalDataset, dv: DepthVector, rv: RankVector, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "group", "depth", "rank"])
        for row in depth_table(ds, dv, rv):
            writer.writerow([row[0], row[1], format(row[2], ".17g"), row[3]])


def depths_to_json(ds: FunctionalDataset, dv: DepthVector, rv: RankVector) -> dict:
    return {
        "depth": dv.spec.label,
        "tie_breaks_applied": rv.tie_breaks_applied,
        "curves": [
            {"index": i, "group": g, "depth": d, "rank": r}
            for i, g, d, r in depth_table(ds, dv, rv)
        ],
    }
