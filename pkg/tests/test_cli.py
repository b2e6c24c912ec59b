"""Command-line parsing, exit codes and output files."""

import json

import numpy as np
import pytest

from stabphase import cli
from stabphase.estimators import BayesConfig, bayes_single_adaptive
from stabphase.phasecore import PosteriorGrid1D, moments
from stabphase.simkernel import spawn_rng


def _read_csv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    return header, body[0].split(","), [[float(x) for x in ln.split(",")] for ln in body[1:]]


class TestParseConfig:
    def test_defaults(self):
        cfg = cli.parse_config(["bayes-marginal"])
        assert cfg["grid_bins"] == 2048
        assert cfg["warmup"] == 20
        assert cfg["budgets"] == [250, 500, 1000, 2000, 4000]

    def test_flag_overrides_file(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("# sweep\ntrials = 500\nseed: 9\n", encoding="utf-8")
        cfg = cli.parse_config(["ccphom", "--config", str(f), "--trials", "1000"])
        assert cfg["trials"] == 1000
        assert cfg["seed"] == 9

    def test_file_list_values(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("budgets = 100,200 # short\n", encoding="utf-8")
        assert cli.parse_config(["ccphom", "--config", str(f)])["budgets"] == [100, 200]

    def test_out_from_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv(cli.OUTDIR_ENV, str(tmp_path / "env"))
        assert cli.parse_config(["oracle-check"])["out"] == str(tmp_path / "env")
        assert cli.parse_config(["oracle-check", "--out", "x"])["out"] == "x"

    def test_option_not_offered_by_command(self):
        with pytest.raises(cli.UsageError):
            cli.parse_config(["ramsey", "--trials", "10"])


class TestExitCodes:
    def test_bad_seed(self, capsys):
        assert cli.main(["bayes1q", "--seed", "abc"]) == cli.EXIT_CONFIG

    def test_unknown_config_key(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("colour = blue\n", encoding="utf-8")
        assert cli.main(["ramsey", "--config", str(f), "--out", str(tmp_path)]) == cli.EXIT_CONFIG

    def test_bad_config_value(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("shots = many\n", encoding="utf-8")
        assert cli.main(["ramsey", "--config", str(f), "--out", str(tmp_path)]) == cli.EXIT_CONFIG

    def test_too_few_trials(self, tmp_path):
        argv = ["ccphom", "--trials", "10", "--out", str(tmp_path)]
        assert cli.main(argv) == cli.EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        argv = ["ramsey", "--config", str(tmp_path / "absent.cfg"), "--out", str(tmp_path)]
        assert cli.main(argv) == cli.EXIT_IO

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("", encoding="utf-8")
        assert cli.main(["ramsey", "--out", str(blocker / "sub")]) == cli.EXIT_IO

    def test_iteration_list_needs_mpp(self, tmp_path):
        argv = ["phom", "--iterations", "1,2", "--out", str(tmp_path)]
        assert cli.main(argv) == cli.EXIT_CONFIG


class TestCommands:
    def test_oracle_check(self, tmp_path, capsys):
        assert cli.main(["oracle-check", "--out", str(tmp_path)]) == cli.EXIT_OK
        meta = json.loads((tmp_path / "oracle_check_metadata.json").read_text(encoding="utf-8"))
        assert max(meta["max_deviation"].values()) <= 1e-10
        assert "max deviation" in capsys.readouterr().out

    def test_ramsey(self, tmp_path):
        assert cli.main(["ramsey", "--phi", "0.5", "--out", str(tmp_path)]) == cli.EXIT_OK
        header, cols, rows = _read_csv(tmp_path / "ramsey_scan.csv")
        assert cols == ["theta", "expectation", "stderr"]
        assert len(rows) == 10
        assert any(h.startswith("# prng:") for h in header)

    def test_bayes1q_dumps_match_kernel(self, tmp_path):
        argv = ["bayes1q", "--phi", "2", "--budget", "200", "--seed", "3",
                "--dump-posterior", "1,10,200", "--out", str(tmp_path)]
        assert cli.main(argv) == cli.EXIT_OK
        for step in (1, 10, 200):
            assert (tmp_path / f"bayes1q_posterior_{step}.csv").exists()
        _, cols, rows = _read_csv(tmp_path / "bayes1q_posterior_200.csv")
        assert cols == ["phi_bin", "density"]
        dens = np.array(rows)[:, 1]
        m = moments(PosteriorGrid1D(dens))
        ref = bayes_single_adaptive(2.0, BayesConfig(budget=200), spawn_rng(3, 0))
        assert m.mean == pytest.approx(ref.phases_est[0], abs=1e-9)
        assert m.variance == pytest.approx(ref.variances[0], rel=1e-6)

    def test_bayes1q_dump_out_of_range(self, tmp_path):
        argv = ["bayes1q", "--budget", "50", "--dump-posterior", "60", "--out", str(tmp_path)]
        assert cli.main(argv) == cli.EXIT_CONFIG

    def test_curve_rows_and_metadata(self, tmp_path):
        argv = ["ccphom", "--budgets", "300,600,1200,2400", "--trials", "100",
                "--workers", "1", "--out", str(tmp_path)]
        assert cli.main(argv) == cli.EXIT_OK
        header, cols, rows = _read_csv(tmp_path / "ccphom.csv")
        assert cols == list(cli.CURVE_COLUMNS)
        assert len(rows) == 4
        meta = json.loads((tmp_path / "ccphom_metadata.json").read_text(encoding="utf-8"))
        assert meta["curves"]["ccphom"]["fitted_c"] > 0
        assert meta["prng"] and meta["version"]

    def test_phom_iteration_sweep(self, tmp_path):
        argv = ["phom", "--model", "two_plaquette", "--iterations", "1,2", "--mpp", "1",
                "--trials", "100", "--workers", "1", "--out", str(tmp_path)]
        assert cli.main(argv) == cli.EXIT_OK
        _, cols, rows = _read_csv(tmp_path / "phom_iterations.csv")
        assert cols[0] == "iterations"
        assert [r[1] for r in rows] == [30, 60]

    def test_compare_writes_one_file_per_method(self, tmp_path):
        argv = ["compare", "--model", "two_plaquette", "--methods", "ccphom,bayes-marginal",
                "--budgets", "250,500", "--trials", "100", "--workers", "1", "--out", str(tmp_path)]
        assert cli.main(argv) == cli.EXIT_OK
        assert (tmp_path / "compare_two_plaquette_ccphom.csv").exists()
        assert (tmp_path / "compare_two_plaquette_bayes_marginal.csv").exists()

    def test_reruns_byte_identical(self, tmp_path):
        outs = []
        for k in range(2):
            d = tmp_path / f"run{k}"
            argv = ["bayes-marginal", "--budgets", "100,200", "--trials", "100", "--seed", "4",
                    "--out", str(d)]
            assert cli.main(argv + ["--workers", str(1 + k)]) == cli.EXIT_OK
            outs.append((d / "bayes_marginal.csv").read_bytes())
        assert outs[0] == outs[1]
        assert b"\r" not in outs[0]
