"""Command-line front end.

Subcommands: ``test`` (k-sample covariance test), ``mc`` (pairwise multiple
comparisons), ``depth`` (per-curve depths and ranks), ``power`` (noncentral
power / sample size from a JSON spec), ``simulate`` (replicated studies from
a JSON spec).

Exit codes: 0 success (no rejection), 2 rejection at level alpha (``test``
only), 1 input error, 3 parameter error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile

import numpy as np

from . import __version__
from .depths import (
    DepthSpec,
    MEDIAN_HEURISTIC,
    compute_depth,
    depth_ranks,
    depths_to_json,
    save_depths_csv,
)
from .exceptions import DataError, NumericalError, ParameterError
from .fdata import FunctionalDataset, Grid, load_csv
from .power import (
    LocalAlternativeSpec,
    SupportDensity,
    density_from_callable,
    density_from_samples,
    power_from_local,
    power_from_pairwise,
    required_sample_size,
)
from .sim import ProcessModel, StudySpec, run_study, save_study_csv, scenario_models
from .testing import TestConfig, fkwc_test, steel_mc

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_REJECT = 2
EXIT_PARAMETER = 3
EXIT_NUMERICAL = 4

_DEPTH_CHOICES = ("ltr", "rp", "mfhd", "mbd", "spatial", "ksd")


def _add_io_flags(sub):
    sub.add_argument("--input", required=True, help="wide CSV dataset (group column, grid header)")
    sub.add_argument("--output", help="write results to this path instead of stdout")
    sub.add_argument(
        "--derivatives",
        default="finite-diff",
        help="derivative channel: 'finite-diff' (default) or 'file=PATH' with a matching CSV",
    )


def _add_depth_flags(sub):
    sub.add_argument("--depth", choices=_DEPTH_CHOICES, default="ltr", help="depth function")
    sub.add_argument("--primed", action="store_true", help="augment the depth with derivatives")
    sub.add_argument("--projections", type=int, default=20, help="number of random directions (rp)")
    sub.add_argument("--band-order", type=int, default=2, help="maximal band order (mbd)")
    sub.add_argument(
        "--bandwidth",
        default=MEDIAN_HEURISTIC,
        help="squared kernel bandwidth for ksd, or 'median-heuristic'",
    )
    sub.add_argument(
        "--weights",
        type=float,
        nargs=2,
        default=(0.5, 0.5),
        metavar=("W0", "W1"),
        help="channel weights for primed mbd/spatial/ksd",
    )
    sub.add_argument("--seed", type=int, default=0, help="seed for projections and tie-breaking")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fkwc",
        description="Depth-rank k-sample tests for equality of covariance operators",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p_test = subs.add_parser("test", help="k-sample covariance equality test")
    _add_io_flags(p_test)
    _add_depth_flags(p_test)
    p_test.add_argument("--alpha", type=float, default=0.05, help="significance level")
    p_test.add_argument(
        "--r", type=float, default=None,
        help="percentile modification: keep the floor(r*N) least-deep ranks (r in (0,1])",
    )
    p_test.add_argument("--format", choices=("json", "table"), default="json")

    p_mc = subs.add_parser("mc", help="pairwise multiple comparisons (Steel-type)")
    _add_io_flags(p_mc)
    _add_depth_flags(p_mc)
    p_mc.add_argument("--alpha", type=float, default=0.05, help="significance level (report only)")
    p_mc.add_argument("--correction", choices=("sidak", "bonferroni", "holm"), default="sidak")
    p_mc.add_argument(
        "--correction-count", type=int, default=None,
        help="family size m for the correction (default: number of pairs)",
    )
    p_mc.add_argument("--method", choices=("normal", "exact"), default="normal",
                      help="rank-sum p-value computation")
    p_mc.add_argument("--format", choices=("json", "table"), default="json")

    p_depth = subs.add_parser("depth", help="per-curve depth values and ranks")
    _add_io_flags(p_depth)
    _add_depth_flags(p_depth)
    p_depth.add_argument("--format", choices=("json", "csv"), default="csv")

    p_power = subs.add_parser("power", help="power or sample size from a JSON spec")
    p_power.add_argument("--spec", required=True, help="JSON file describing the computation")
    p_power.add_argument("--output", help="write results to this path instead of stdout")
    p_power.add_argument("--format", choices=("json", "table"), default="json")

    p_sim = subs.add_parser("simulate", help="replicated size/power study from a JSON spec")
    p_sim.add_argument("--spec", required=True, help="JSON study description")
    p_sim.add_argument("--output", help="write results to this path instead of stdout")
    p_sim.add_argument("--threads", type=int, default=1, help="worker processes for replicates")
    p_sim.add_argument("--format", choices=("json", "csv"), default="csv")
    return parser


def _emit(text: str, output) -> None:
    if output:
        with open(output, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _load_dataset(args) -> FunctionalDataset:
    deriv_path = None
    mode = args.derivatives
    if mode.startswith("file="):
        deriv_path = mode[len("file="):]
    elif mode != "finite-diff":
        raise ParameterError("--derivatives must be 'finite-diff' or 'file=PATH'")
    ds = load_csv(args.input, derivatives_path=deriv_path)
    if getattr(args, "primed", False) and ds.derivatives is None:
        ds = ds.with_finite_difference_derivatives()
    return ds


def _depth_spec(args) -> DepthSpec:
    bw = args.bandwidth
    if isinstance(bw, str) and bw != MEDIAN_HEURISTIC:
        try:
            bw = float(bw)
        except ValueError:
            raise ParameterError(
                f"--bandwidth must be a positive number or {MEDIAN_HEURISTIC!r}, got {bw!r}"
            ) from None
    return DepthSpec(
        kind=args.depth,
        use_derivatives=args.primed,
        num_projections=args.projections,
        band_order=args.band_order,
        channel_weights=tuple(args.weights),
        kernel_bandwidth=bw,
        rng_seed=args.seed,
    )


def _table(rows) -> str:
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(str(c).ljust(w) for c, w in zip(row, widths)) for row in rows)


def cmd_test(args) -> int:
    ds = _load_dataset(args)
    config = TestConfig(depth_spec=_depth_spec(args), alpha=args.alpha, percentile_r=args.r)
    result = fkwc_test(ds, config)
    if args.format == "json":
        _emit(json.dumps(result.to_dict(), indent=2), args.output)
    else:
        rows = [
            ("statistic_kind", result.statistic_kind),
            ("statistic", f"{result.statistic:.6g}"),
            ("df", result.df),
            ("p_value", f"{result.p_value:.6g}"),
            ("alpha", result.alpha),
            ("reject", "yes" if result.reject else "no"),
        ]
        rows += [
            (f"group_{g} mean_rank", f"{mu:.4f} (dev {dev:.4f})")
            for g, (mu, dev) in enumerate(
                zip(result.group_mean_ranks, result.group_deviations), start=1
            )
        ]
        _emit(_table(rows), args.output)
    return EXIT_REJECT if result.reject else EXIT_OK


def cmd_mc(args) -> int:
    ds = _load_dataset(args)
    result = steel_mc(
        ds,
        _depth_spec(args),
        correction_count=args.correction_count,
        correction=args.correction,
        method=args.method,
    )
    if args.format == "json":
        _emit(json.dumps(result.to_dict(), indent=2), args.output)
    else:
        j = result.pairwise_raw_p.shape[0]
        rows = [("pair", "raw_p", "adjusted_p")]
        for a in range(j):
            for b in range(a + 1, j):
                rows.append(
                    (
                        f"{a + 1} vs {b + 1}",
                        f"{result.pairwise_raw_p[a, b]:.6g}",
                        f"{result.pairwise_adjusted_p[a, b]:.6g}",
                    )
                )
        rows.append(("comparisons", result.num_comparisons, result.correction))
        _emit(_table(rows), args.output)
    return EXIT_OK


def cmd_depth(args) -> int:
    ds = _load_dataset(args)
    spec = _depth_spec(args)
    ds_eff = ds
    if spec.use_derivatives and ds.derivatives is None:
        ds_eff = ds.with_finite_difference_derivatives()
    dv = compute_depth(ds_eff, spec)
    rv = depth_ranks(ds_eff, spec)
    if args.format == "json":
        _emit(json.dumps(depths_to_json(ds, dv, rv), indent=2), args.output)
    else:
        if args.output:
            save_depths_csv(ds, dv, rv, args.output)
        else:
            with tempfile.NamedTemporaryFile("r+", suffix=".csv") as tmp:
                save_depths_csv(ds, dv, rv, tmp.name)
                tmp.seek(0)
                print(tmp.read(), end="")
    return EXIT_OK


def _density_from_json(node) -> SupportDensity:
    kind = node.get("kind")
    if kind == "exponential":
        rate = float(node.get("rate", 1.0))
        if rate <= 0:
            raise ParameterError("exponential rate must be positive")
        hi = 40.0 / rate
        return density_from_callable(lambda z: rate * np.exp(-rate * z), (0.0, hi))
    if kind == "chi2":
        df = float(node.get("df", 1))
        if df <= 0:
            raise ParameterError("chi2 df must be positive")
        from scipy.stats import chi2 as chi2_dist

        hi = float(chi2_dist.ppf(1.0 - 1e-10, df))
        return density_from_callable(lambda z: chi2_dist.pdf(z, df), (0.0, hi))
    if kind == "histogram":
        edges = np.asarray(node["edges"], dtype=float)
        dens = np.asarray(node["densities"], dtype=float)
        if edges.size != dens.size + 1:
            raise ParameterError("histogram needs len(edges) == len(densities) + 1")
        mids = 0.5 * (edges[:-1] + edges[1:])
        return SupportDensity(mids, dens, box_widths=np.diff(edges))
    if kind == "samples":
        return density_from_samples(np.asarray(node["values"], dtype=float))
    if kind == "model":
        # base squared-norm law estimated from Monte Carlo draws of a
        # generative model
        from .sim import generate

        grid = Grid.regular(int(node.get("grid_points", 101)))
        model = _model_from_json(node, grid)
        draws = int(node.get("draws", 20_000))
        seed = int(node.get("seed", 0))
        x = generate(model, draws, seed)
        sq_norms = (x * x) @ grid.trapezoid_weights
        return density_from_samples(sq_norms)
    raise ParameterError(f"unknown density kind {kind!r}")


def cmd_power(args) -> int:
    with open(args.spec) as fh:
        spec = json.load(fh)
    alpha = float(spec.get("alpha", 0.05))
    if "target_power" in spec:
        n_req = required_sample_size(
            spec["probs"], spec["thetas"], float(spec["target_power"]), alpha
        )
        result = power_from_pairwise(spec["probs"], spec["thetas"], n_req, alpha)
        payload = result.to_dict()
        payload["required_N"] = n_req
        payload["target_power"] = spec["target_power"]
    elif "probs" in spec:
        if "N" not in spec:
            raise ParameterError("pairwise power spec needs a combined sample size N")
        result = power_from_pairwise(spec["probs"], spec["thetas"], int(spec["N"]), alpha)
        payload = result.to_dict()
    elif "deltas" in spec:
        las = LocalAlternativeSpec(
            deltas=tuple(spec["deltas"]),
            thetas=tuple(spec["thetas"]),
            density=_density_from_json(spec["density"]),
        )
        result = power_from_local(las, alpha)
        payload = result.to_dict()
    else:
        raise ParameterError(
            "power spec must contain 'target_power', 'probs', or 'deltas'"
        )
    if args.format == "json":
        _emit(json.dumps(payload, indent=2), args.output)
    else:
        _emit(_table(sorted((k, v) for k, v in payload.items())), args.output)
    return EXIT_OK


def _depth_spec_from_json(node, seed: int) -> DepthSpec:
    return DepthSpec(
        kind=node.get("kind", "ltr"),
        use_derivatives=bool(node.get("primed", False)),
        num_projections=int(node.get("projections", 20)),
        band_order=int(node.get("band_order", 2)),
        channel_weights=tuple(node.get("weights", (0.5, 0.5))),
        kernel_bandwidth=node.get("bandwidth", MEDIAN_HEURISTIC),
        rng_seed=int(node.get("seed", seed)),
    )


def _model_from_json(node, grid: Grid) -> ProcessModel:
    family = node.get("family", "gaussian")
    kwargs = {"family": family, "grid": grid}
    if "alpha" in node:
        kwargs["alpha"] = float(node["alpha"])
    if "beta" in node:
        kwargs["beta"] = float(node["beta"])
    if "eigenvalues" in node:
        kwargs["eigenvalues"] = tuple(node["eigenvalues"])
    if "skew_shape" in node:
        kwargs["skew_shape"] = float(node["skew_shape"])
    return ProcessModel(**kwargs)


def _study_from_json(spec: dict) -> StudySpec:
    grid = Grid.regular(int(spec.get("grid_points", 101)))
    seed = int(spec.get("seed", 0))
    if "scenario" in spec:
        models = scenario_models(int(spec["scenario"]), grid)
        sizes = tuple(int(s) for s in spec.get("sizes", (100, 100)))
        if len(sizes) != 2:
            raise ParameterError("scenario studies are two-sample; give two sizes")
    elif "groups" in spec:
        models = tuple(_model_from_json(g, grid) for g in spec["groups"])
        sizes = tuple(int(g["size"]) for g in spec["groups"])
    else:
        raise ParameterError("study spec needs 'scenario' or 'groups'")
    depths = tuple(
        _depth_spec_from_json(node, seed) for node in spec.get("depths", [{"kind": "ltr"}])
    )
    return StudySpec(
        models=models,
        group_sizes=sizes,
        depth_specs=depths,
        alpha=float(spec.get("alpha", 0.05)),
        replications=int(spec.get("replications", 200)),
        seed=seed,
        percentile_r=spec.get("percentile_r"),
        param_name=str(spec.get("param_name", "")),
        param_value=str(spec.get("param_value", "")),
    )


def cmd_simulate(args) -> int:
    with open(args.spec) as fh:
        spec = _study_from_json(json.load(fh))
    result = run_study(spec, n_jobs=max(1, args.threads))
    if args.format == "json":
        _emit(json.dumps(result.to_dict(), indent=2), args.output)
    else:
        if args.output:
            save_study_csv(result, args.output)
        else:
            with tempfile.NamedTemporaryFile("r+", suffix=".csv") as tmp:
                save_study_csv(result, tmp.name)
                tmp.seek(0)
                print(tmp.read(), end="")
    return EXIT_OK


_HANDLERS = {
    "test": cmd_test,
    "mc": cmd_mc,
    "depth": cmd_depth,
    "power": cmd_power,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (DataError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ParameterError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
