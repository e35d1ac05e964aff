"""Command-line interface: flows, exit codes, determinism, help coverage."""

import json

import numpy as np
import pytest

from fkwc import (
    DepthSpec,
    FunctionalDataset,
    StudySpec,
    run_study,
    save_csv,
    scenario_models,
    wilcoxon_rank_sum,
)
from fkwc.cli import EXIT_INPUT, EXIT_OK, EXIT_PARAMETER, EXIT_REJECT, build_parser, main
from fkwc.depths import depth_sort_keys

SUBCOMMAND_FLAGS = {
    "test": ["--input", "--output", "--derivatives", "--depth", "--primed",
             "--projections", "--band-order", "--bandwidth", "--weights",
             "--seed", "--alpha", "--r", "--format"],
    "mc": ["--input", "--output", "--derivatives", "--depth", "--primed",
           "--projections", "--band-order", "--bandwidth", "--weights",
           "--seed", "--alpha", "--correction", "--correction-count",
           "--method", "--format"],
    "depth": ["--input", "--output", "--derivatives", "--depth", "--primed",
              "--projections", "--band-order", "--bandwidth", "--weights",
              "--seed", "--format"],
    "power": ["--spec", "--output", "--format"],
    "simulate": ["--spec", "--output", "--threads", "--format"],
}


@pytest.fixture
def identical_groups_csv(tmp_path, grid21):
    rng = np.random.default_rng(19)
    base = rng.normal(size=(25, grid21.m))
    ds = FunctionalDataset(grid21, np.vstack([base, base]), [1] * 25 + [2] * 25)
    path = tmp_path / "same.csv"
    save_csv(ds, path)
    return path


@pytest.fixture
def scenario5_csv(tmp_path, grid101):
    from fkwc.sim import generate

    m1, m2 = scenario_models(5, grid101)
    x1 = generate(m1, 100, 1001)
    x2 = generate(m2, 100, 1002)
    ds = FunctionalDataset(grid101, np.vstack([x1, x2]), [1] * 100 + [2] * 100)
    path = tmp_path / "scenario5.csv"
    save_csv(ds, path)
    return path


class TestHelpCoverage:
    @pytest.mark.parametrize("command", sorted(SUBCOMMAND_FLAGS))
    def test_every_flag_documented(self, command, capsys):
        with pytest.raises(SystemExit) as exc:
            main([command, "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for flag in SUBCOMMAND_FLAGS[command]:
            assert flag in text, f"{command} --help is missing {flag}"


class TestCmdTest:
    def test_identical_groups_accept(self, identical_groups_csv, capsys):
        code = main(["test", "--input", str(identical_groups_csv), "--depth", "ltr",
                     "--seed", "5"])
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["p_value"] > 0.8
        assert not payload["reject"]

    def test_scenario5_rejects(self, scenario5_csv):
        code = main(["test", "--input", str(scenario5_csv), "--depth", "ltr", "--seed", "3"])
        assert code == EXIT_REJECT

    def test_percentile_r_one_matches_default(self, scenario5_csv, capsys):
        main(["test", "--input", str(scenario5_csv), "--depth", "mbd", "--seed", "2"])
        w = json.loads(capsys.readouterr().out)["statistic"]
        main(["test", "--input", str(scenario5_csv), "--depth", "mbd", "--seed", "2",
              "--r", "1.0"])
        m = json.loads(capsys.readouterr().out)["statistic"]
        assert abs(w - m) < 1e-10

    def test_malformed_input_names_position(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("group,0,0.5,1\n1,1.0,xx,3.0\n2,1,2,3\n")
        code = main(["test", "--input", str(path)])
        assert code == EXIT_INPUT
        err = capsys.readouterr().err
        assert "row 2" in err and "column 3" in err

    def test_missing_file_is_input_error(self):
        assert main(["test", "--input", "/nonexistent/x.csv"]) == EXIT_INPUT

    def test_bad_parameter_exit_code(self, identical_groups_csv):
        code = main(["test", "--input", str(identical_groups_csv), "--depth", "ksd",
                     "--bandwidth", "-3"])
        assert code == EXIT_PARAMETER

    def test_table_format(self, identical_groups_csv, capsys):
        code = main(["test", "--input", str(identical_groups_csv), "--format", "table"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "statistic" in out and "p_value" in out

    def test_deterministic_given_seed(self, scenario5_csv, capsys):
        main(["test", "--input", str(scenario5_csv), "--depth", "rp", "--seed", "9"])
        first = capsys.readouterr().out
        main(["test", "--input", str(scenario5_csv), "--depth", "rp", "--seed", "9"])
        second = capsys.readouterr().out
        assert first == second

    def test_derivatives_from_file(self, tmp_path, grid21, capsys):
        rng = np.random.default_rng(55)
        ds = FunctionalDataset(
            grid21, rng.normal(size=(20, grid21.m)), [1] * 10 + [2] * 10
        ).with_finite_difference_derivatives()
        cpath = tmp_path / "c.csv"
        dpath = tmp_path / "d.csv"
        save_csv(ds, cpath, derivatives_path=dpath)
        code = main(["test", "--input", str(cpath), "--derivatives", f"file={dpath}",
                     "--depth", "mbd", "--primed", "--seed", "1"])
        assert code in (EXIT_OK, EXIT_REJECT)
        file_out = json.loads(capsys.readouterr().out)
        # finite differences are the default channel, so results agree here
        code = main(["test", "--input", str(cpath), "--depth", "mbd", "--primed",
                     "--seed", "1"])
        assert code in (EXIT_OK, EXIT_REJECT)
        fd_out = json.loads(capsys.readouterr().out)
        assert file_out["statistic"] == pytest.approx(fd_out["statistic"], abs=1e-12)


class TestCmdMc:
    def test_two_groups_equal_single_wilcoxon(self, identical_groups_csv, capsys, grid21):
        code = main(["mc", "--input", str(identical_groups_csv), "--depth", "mbd",
                     "--seed", "4"])
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        from fkwc import load_csv
        from fkwc.depths import derive_seed
        from dataclasses import replace

        ds = load_csv(identical_groups_csv)
        spec = replace(DepthSpec(kind="mbd", rng_seed=4),
                       rng_seed=derive_seed(4, 2, 0))
        keys = depth_sort_keys(ds.subset([1, 2]), spec)
        sub = ds.subset([1, 2])
        want = wilcoxon_rank_sum(keys[sub.groups == 1], keys[sub.groups == 2])
        assert payload["pairwise_raw_p"][0][1] == pytest.approx(want, abs=1e-12)
        assert payload["num_comparisons"] == 1


class TestCmdDepth:
    def test_csv_output(self, identical_groups_csv, tmp_path):
        out = tmp_path / "depths.csv"
        code = main(["depth", "--input", str(identical_groups_csv), "--depth", "mfhd",
                     "--output", str(out)])
        assert code == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "index,group,depth,rank"
        assert len(lines) == 51
        ranks = sorted(int(line.split(",")[3]) for line in lines[1:])
        assert ranks == list(range(1, 51))

    def test_json_output(self, identical_groups_csv, capsys):
        code = main(["depth", "--input", str(identical_groups_csv), "--depth", "ltr",
                     "--format", "json"])
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["depth"] == "ltr"
        assert len(payload["curves"]) == 50


class TestCmdPower:
    def test_null_tau_gives_alpha(self, tmp_path, capsys):
        spec = {"probs": [[0.5, 0.5], [0.5, 0.5]], "thetas": [0.5, 0.5],
                "N": 100, "alpha": 0.05}
        path = tmp_path / "p.json"
        path.write_text(json.dumps(spec))
        code = main(["power", "--spec", str(path)])
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["predicted_power"] == pytest.approx(0.05, abs=1e-9)
        assert payload["tau"] == 0.0

    def test_local_alternative_spec(self, tmp_path, capsys):
        spec = {"deltas": [0.0, 1.0], "thetas": [0.5, 0.5],
                "density": {"kind": "exponential", "rate": 1.0}}
        path = tmp_path / "p.json"
        path.write_text(json.dumps(spec))
        code = main(["power", "--spec", str(path)])
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["tau"] == pytest.approx(0.1875, abs=1e-3)

    def test_sample_size_spec(self, tmp_path, capsys):
        spec = {"probs": [[0.5, 0.54], [0.46, 0.5]], "thetas": [0.5, 0.5],
                "target_power": 0.8}
        path = tmp_path / "p.json"
        path.write_text(json.dumps(spec))
        code = main(["power", "--spec", str(path)])
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["required_N"] >= 8
        assert payload["predicted_power"] >= 0.8

    def test_bad_spec_parameter_error(self, tmp_path):
        path = tmp_path / "p.json"
        path.write_text(json.dumps({"nonsense": 1}))
        assert main(["power", "--spec", str(path)]) == EXIT_PARAMETER

    def test_model_density_spec(self, tmp_path, capsys):
        # base law from Monte Carlo draws of a five-component model: the
        # squared norms follow chi-square(5), whose local tau is known
        spec = {
            "deltas": [0.0, 5.0],
            "thetas": [0.5, 0.5],
            "density": {"kind": "model", "family": "eigen",
                        "eigenvalues": [1, 1, 1, 1, 1], "draws": 30000, "seed": 11},
        }
        path = tmp_path / "p.json"
        path.write_text(json.dumps(spec))
        code = main(["power", "--spec", str(path)])
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["tau"] == pytest.approx(13.5095, rel=0.10)


class TestCmdSimulate:
    def test_matches_library_run(self, tmp_path, capsys, grid101):
        spec_json = {"scenario": 4, "sizes": [40, 40],
                     "depths": [{"kind": "ltr"}], "replications": 20, "seed": 31}
        path = tmp_path / "study.json"
        path.write_text(json.dumps(spec_json))
        code = main(["simulate", "--spec", str(path), "--format", "json"])
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        m1, m2 = scenario_models(4, grid101)
        want = run_study(StudySpec(models=(m1, m2), group_sizes=(40, 40),
                                   depth_specs=(DepthSpec(kind="ltr", rng_seed=31),),
                                   replications=20, seed=31))
        assert payload["depths"][0]["rate"] == pytest.approx(
            float(want.rejection_rates[0]), abs=1e-12
        )

    def test_threads_do_not_change_output(self, tmp_path, grid101):
        spec_json = {"scenario": 4, "sizes": [30, 30],
                     "depths": [{"kind": "rp"}], "replications": 12, "seed": 8}
        path = tmp_path / "study.json"
        path.write_text(json.dumps(spec_json))
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        assert main(["simulate", "--spec", str(path), "--output", str(out1),
                     "--threads", "1"]) == EXIT_OK
        assert main(["simulate", "--spec", str(path), "--output", str(out2),
                     "--threads", "2"]) == EXIT_OK
        assert out1.read_text() == out2.read_text()

    def test_csv_columns(self, tmp_path):
        spec_json = {"scenario": 1, "sizes": [20, 20], "depths": [{"kind": "mbd"}],
                     "replications": 4, "seed": 2}
        path = tmp_path / "study.json"
        path.write_text(json.dumps(spec_json))
        out = tmp_path / "res.csv"
        assert main(["simulate", "--spec", str(path), "--output", str(out)]) == EXIT_OK
        header = out.read_text().splitlines()[0]
        assert header == "depth,family,param,value,N,rate,se,R"


class TestParser:
    def test_unknown_command_rejected(self, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["frobnicate"])
