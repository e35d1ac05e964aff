"""Generative process models and replicated size/power studies.

Four curve generators share a squared-exponential kernel family or an
explicit eigenvalue expansion in an orthonormal Fourier basis (constant
first, then sine/cosine pairs).  Replicated studies derive every random
stream from (base seed, replicate, role) so results are bit-identical
regardless of worker count.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .depths import derive_seed
from .exceptions import NumericalError, ParameterError
from .fdata import FunctionalDataset, Grid
from .testing import TestConfig, fkwc_test

_FAMILIES = ("gaussian", "t1", "skew_gaussian", "eigen")

_JITTER_LADDER = (1e-10, 1e-8, 1e-6)


@dataclass(frozen=True)
class ProcessModel:
    """A zero-mean functional data generator.

    ``alpha``/``beta`` parameterize the squared-exponential kernel
    beta * exp(-(s-t)^2 / (2 alpha^2)) used by the gaussian, t1 and
    skew_gaussian families; ``eigenvalues`` drives the finite-rank
    Fourier-basis family instead.
    """

    family: str = "gaussian"
    grid: Grid = field(default_factory=lambda: Grid.regular(101))
    alpha: float = 0.05
    beta: float = 1.0
    eigenvalues: Optional[tuple] = None
    skew_shape: float = 4.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ParameterError(f"unknown family {self.family!r}; expected one of {_FAMILIES}")
        if self.alpha <= 0 or self.beta <= 0:
            raise ParameterError("kernel parameters alpha and beta must be positive")
        if self.family == "eigen":
            if self.eigenvalues is None:
                raise ParameterError("eigen family requires explicit eigenvalues")
            lams = tuple(float(v) for v in self.eigenvalues)
            if len(lams) == 0 or any(v < 0 for v in lams):
                raise ParameterError("eigenvalues must be nonnegative")
            object.__setattr__(self, "eigenvalues", lams)
        if self.family == "skew_gaussian" and self.skew_shape < 0:
            raise ParameterError("skew shape must be >= 0")


def squared_exponential_kernel(grid: Grid, alpha: float, beta: float) -> np.ndarray:
    t = grid.points
    diff = t[:, None] - t[None, :]
    return beta * np.exp(-(diff * diff) / (2.0 * alpha * alpha))


def _kernel_cholesky(grid: Grid, alpha: float, beta: float) -> np.ndarray:
    kmat = squared_exponential_kernel(grid, alpha, beta)
    for jitter in _JITTER_LADDER:
        try:
            return np.linalg.cholesky(kmat + jitter * beta * np.eye(grid.m))
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(
        f"kernel matrix not positive definite after jitter up to {_JITTER_LADDER[-1]}*beta "
        f"(alpha={alpha}, beta={beta}, m={grid.m})"
    )


def fourier_basis(grid: Grid, size: int) -> np.ndarray:
    """Orthonormal Fourier functions on [0, 1]: 1, then sqrt(2) sin/cos
    pairs at frequencies 1, 2, ...  Shape (size, m)."""
    if size < 1:
        raise ParameterError("basis size must be >= 1")
    t = grid.points
    rows = [np.ones(grid.m)]
    freq = 1
    while len(rows) < size:
        rows.append(np.sqrt(2.0) * np.sin(2.0 * np.pi * freq * t))
        if len(rows) < size:
            rows.append(np.sqrt(2.0) * np.cos(2.0 * np.pi * freq * t))
        freq += 1
    return np.array(rows)


def gen_gp(model: ProcessModel, n: int, seed) -> np.ndarray:
    """Zero-mean Gaussian process sample paths via one Cholesky factor."""
    rng = np.random.default_rng(seed)
    chol = _kernel_cholesky(model.grid, model.alpha, model.beta)
    z = rng.standard_normal((n, model.grid.m))
    return z @ chol.T


def gen_t1(model: ProcessModel, n: int, seed) -> np.ndarray:
    """Student-t process with one degree of freedom: a Gaussian draw
    divided by an independent per-curve chi(1) scale."""
    rng = np.random.default_rng(seed)
    chol = _kernel_cholesky(model.grid, model.alpha, model.beta)
    z = rng.standard_normal((n, model.grid.m))
    wdiv = rng.chisquare(1.0, size=n)
    for i in range(n):
        while wdiv[i] < 1e-300:
            wdiv[i] = rng.chisquare(1.0)
    return (z @ chol.T) / np.sqrt(wdiv)[:, None]


def gen_skew_gp(model: ProcessModel, n: int, seed) -> np.ndarray:
    """Skewed Gaussian process: delta |Z1| + sqrt(1-delta^2) Z2 from two
    independent draws with the same kernel, recentered by the analytic
    pointwise mean delta sqrt(2 beta / pi)."""
    rng = np.random.default_rng(seed)
    chol = _kernel_cholesky(model.grid, model.alpha, model.beta)
    a = model.skew_shape
    delta = a / np.sqrt(1.0 + a * a)
    z1 = rng.standard_normal((n, model.grid.m)) @ chol.T
    z2 = rng.standard_normal((n, model.grid.m)) @ chol.T
    x = delta * np.abs(z1) + np.sqrt(1.0 - delta * delta) * z2
    return x - delta * np.sqrt(2.0 * model.beta / np.pi)


def gen_eigen(model: ProcessModel, n: int, seed) -> np.ndarray:
    """Finite-rank Gaussian expansion sum_k sqrt(lambda_k) xi_k phi_k with
    standard normal scores in the orthonormal Fourier basis."""
    rng = np.random.default_rng(seed)
    lams = np.asarray(model.eigenvalues, dtype=float)
    basis = fourier_basis(model.grid, lams.size)
    xi = rng.standard_normal((n, lams.size))
    return (xi * np.sqrt(lams)) @ basis


_GENERATORS = {
    "gaussian": gen_gp,
    "t1": gen_t1,
    "skew_gaussian": gen_skew_gp,
    "eigen": gen_eigen,
}


def generate(model: ProcessModel, n: int, seed) -> np.ndarray:
    """Draw n curves from the model as an (n, m) array."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    return _GENERATORS[model.family](model, n, seed)


# ---------------------------------------------------------------------------
# eigenvalue scenario catalog
# ---------------------------------------------------------------------------

def scenario_eigenvalues(scenario: int) -> tuple:
    """Eigenvalue pair (group 1, group 2) for the six catalog scenarios:
    reversed/scaled short/long linear and long exponential decays."""
    if scenario == 1:
        lam1 = tuple(float(k) for k in range(1, 4))
        lam2 = tuple(float(3 - k + 1) for k in range(1, 4))
    elif scenario == 2:
        lam1 = tuple(float(k) for k in range(1, 12))
        lam2 = tuple(float(11 - k + 1) for k in range(1, 12))
    elif scenario == 3:
        lam1 = tuple(float(2**k) for k in range(1, 12))
        lam2 = tuple(float(2 ** (11 - k + 1)) for k in range(1, 12))
    elif scenario == 4:
        lam1 = tuple(float(k) for k in range(1, 4))
        lam2 = tuple(1.5 * v for v in lam1)
    elif scenario == 5:
        lam1 = tuple(float(k) for k in range(1, 12))
        lam2 = tuple(1.5 * v for v in lam1)
    elif scenario == 6:
        lam1 = tuple(float(2**k) for k in range(1, 12))
        lam2 = tuple(1.5 * v for v in lam1)
    else:
        raise ParameterError(f"scenario must be 1..6, got {scenario!r}")
    return lam1, lam2


def scenario_models(scenario: int, grid: Optional[Grid] = None) -> tuple:
    """Two eigen-family models realizing a catalog scenario."""
    grid = grid if grid is not None else Grid.regular(101)
    lam1, lam2 = scenario_eigenvalues(scenario)
    return (
        ProcessModel(family="eigen", grid=grid, eigenvalues=lam1),
        ProcessModel(family="eigen", grid=grid, eigenvalues=lam2),
    )


# ---------------------------------------------------------------------------
# replicated studies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StudySpec:
    """A replicated size/power experiment: one model per group, a list of
    depth specs to evaluate on the same generated data, and a base seed."""

    models: tuple
    group_sizes: tuple
    depth_specs: tuple
    alpha: float = 0.05
    replications: int = 200
    seed: int = 0
    percentile_r: Optional[float] = None
    param_name: str = ""
    param_value: str = ""

    def __post_init__(self):
        if len(self.models) != len(self.group_sizes) or len(self.models) < 2:
            raise ParameterError("need one model per group for J >= 2 groups")
        if any(s < 1 for s in self.group_sizes):
            raise ParameterError("group sizes must be >= 1")
        if self.replications < 1:
            raise ParameterError("replications must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError("alpha must lie in (0, 1)")
        if len(self.depth_specs) < 1:
            raise ParameterError("need at least one depth spec")
        grids = {m.grid for m in self.models}
        if len(grids) != 1:
            raise ParameterError("all group models must share one grid")

    @property
    def n_total(self) -> int:
        return int(sum(self.group_sizes))


@dataclass(frozen=True)
class StudyResult:
    spec: StudySpec
    rejection_rates: np.ndarray
    std_errors: np.ndarray

    def to_dict(self) -> dict:
        return {
            "replications": self.spec.replications,
            "alpha": self.spec.alpha,
            "N": self.spec.n_total,
            "depths": [
                {"depth": s.label, "rate": float(r), "se": float(e)}
                for s, r, e in zip(self.spec.depth_specs, self.rejection_rates, self.std_errors)
            ],
        }


def _study_replicate(spec: StudySpec, rep: int) -> np.ndarray:
    grid = spec.models[0].grid
    blocks, labels = [], []
    for g, (model, size) in enumerate(zip(spec.models, spec.group_sizes), start=1):
        blocks.append(generate(model, size, derive_seed(spec.seed, rep, g)))
        labels.append(np.full(size, g))
    ds = FunctionalDataset(grid, np.vstack(blocks), np.concatenate(labels))
    if any(d.use_derivatives for d in spec.depth_specs):
        ds = ds.with_finite_difference_derivatives()
    rejections = np.zeros(len(spec.depth_specs), dtype=bool)
    for i, dspec in enumerate(spec.depth_specs):
        seeded = replace(dspec, rng_seed=derive_seed(spec.seed, rep, 1000 + i))
        config = TestConfig(depth_spec=seeded, alpha=spec.alpha, percentile_r=spec.percentile_r)
        rejections[i] = fkwc_test(ds, config).reject
    return rejections


def _worker(args) -> np.ndarray:
    return _study_replicate(*args)


def run_study(spec: StudySpec, n_jobs: int = 1) -> StudyResult:
    """Run the replicated experiment; the outcome is identical for any
    ``n_jobs`` because all streams derive from (seed, replicate, role)."""
    reps = range(spec.replications)
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(_worker, [(spec, r) for r in reps], chunksize=8))
    else:
        rows = [_study_replicate(spec, r) for r in reps]
    hits = np.array(rows, dtype=float)
    rates = hits.mean(axis=0)
    ses = np.sqrt(rates * (1.0 - rates) / spec.replications)
    return StudyResult(spec=spec, rejection_rates=rates, std_errors=ses)


def save_study_csv(result: StudyResult, path) -> None:
    """Tidy CSV: one row per depth spec."""
    spec = result.spec
    families = sorted({m.family for m in spec.models})
    family = "+".join(families)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["depth", "family", "param", "value", "N", "rate", "se", "R"])
        for dspec, rate, se in zip(spec.depth_specs, result.rejection_rates, result.std_errors):
            writer.writerow(
                [
                    dspec.label,
                    family,
                    spec.param_name,
                    spec.param_value,
                    spec.n_total,
                    format(float(rate), ".6g"),
                    format(float(se), ".6g"),
                    spec.replications,
                ]
            )
