import json
import math

import numpy as np
import pytest

from copcure.cli import (
    FitReport,
    build_fit_report,
    main,
    parse_flat_toml,
    read_dataset_csv,
)
from copcure.errors import DataError

SCENARIO = """\
# synthetic scenario used by the CLI tests
copula = "frank"
tau = 0.5
latency_family = "weibull"
latency_params = [0.5, 1.0]
censoring_family = "weibull"
censoring_params = [1.0, 1.0]
p = 0.8
n = 120
seed = 42
"""


@pytest.fixture()
def scenario_file(tmp_path):
    path = tmp_path / "scn.toml"
    path.write_text(SCENARIO)
    return str(path)


@pytest.fixture()
def small_csv(tmp_path, scenario_file):
    out = tmp_path / "data.csv"
    assert main(["simulate", "--scenario", scenario_file, "--out", str(out)]) == 0
    return str(out)


class TestCsvParsing:
    def test_reads_written_csv(self, small_csv):
        data = read_dataset_csv(small_csv)
        assert len(data) == 120
        assert set(np.unique(data.delta)) <= {0, 1}

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("t,event\n1.0,1\n")
        with pytest.raises(DataError, match="header"):
            read_dataset_csv(str(p))

    def test_malformed_row_names_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("time,status\n1.0,1\noops,1\n")
        with pytest.raises(DataError, match="line 3"):
            read_dataset_csv(str(p))

    def test_scale_divides_times(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,status\n10.0,1\n20.0,0\n")
        data = read_dataset_csv(str(p), scale=10.0)
        assert data.y.tolist() == [1.0, 2.0]


class TestScenarioParsing:
    def test_flat_toml_types(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text('a = 1\nb = 2.5\nc = "text"\nd = [1.0, 2]\ne = true\n# comment\n')
        cfg = parse_flat_toml(str(p))
        assert cfg == {"a": 1, "b": 2.5, "c": "text", "d": [1.0, 2], "e": True}

    def test_both_theta_and_tau_rejected(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text(SCENARIO.replace('tau = 0.5', 'tau = 0.5\ntheta = 5.0'))
        out = tmp_path / "x.csv"
        assert main(["simulate", "--scenario", str(p), "--out", str(out)]) == 1

    def test_zero_n_rejected(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text(SCENARIO.replace("n = 120", "n = 0"))
        out = tmp_path / "x.csv"
        assert main(["simulate", "--scenario", str(p), "--out", str(out)]) == 1


class TestSimulate:
    def test_csv_and_sidecar(self, tmp_path, scenario_file, small_csv):
        sidecar = json.loads(open(small_csv + ".scenario.json").read())
        assert sidecar["copula"] == "frank"
        assert sidecar["theta"] == pytest.approx(5.7362827, abs=1e-4)
        assert sidecar["tau"] == pytest.approx(0.5, abs=1e-8)
        assert sidecar["n"] == 120

    def test_deterministic_given_seed(self, tmp_path, scenario_file):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert main(["simulate", "--scenario", scenario_file, "--out", str(a)]) == 0
        assert main(["simulate", "--scenario", scenario_file, "--out", str(b)]) == 0
        assert a.read_text() == b.read_text()

    def test_emit_latent_columns(self, tmp_path, scenario_file):
        out = tmp_path / "latent.csv"
        assert main(
            ["simulate", "--scenario", scenario_file, "--out", str(out), "--emit-latent"]
        ) == 0
        header = out.read_text().splitlines()[0]
        assert header == "time,status,t_latent,c_latent,u_latent,v_latent"
        rows = [ln.split(",") for ln in out.read_text().splitlines()[1:]]
        assert any(r[2] == "inf" for r in rows)  # cured individuals present
        # y = min(t, c) reconstructs
        for r in rows[:20]:
            y, d, t, c = float(r[0]), int(r[1]), float(r[2]), float(r[3])
            assert y == pytest.approx(min(t, c), rel=1e-12)
            assert d == (1 if t <= c else 0)


class TestTauCommand:
    def test_gumbel_theta_two(self, capsys):
        assert main(["tau", "--family", "gumbel", "--theta", "2"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["tau"] == pytest.approx(0.5, abs=1e-12)

    def test_frank_inverse(self, capsys):
        assert main(["tau", "--family", "frank", "--tau", "0.5"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["theta"] == pytest.approx(5.736, abs=2e-3)

    def test_requires_exactly_one(self, capsys):
        assert main(["tau", "--family", "frank"]) == 1
        assert main(["tau", "--family", "frank", "--theta", "1", "--tau", "0.2"]) == 1

    def test_unknown_family_lists_names(self, capsys):
        assert main(["tau", "--family", "clayton", "--theta", "1"]) == 1
        err = capsys.readouterr().err
        assert "clayton90" in err and "frank" in err


class TestExitCodes:
    def test_unknown_flag_is_usage(self):
        assert main(["fit", "--nope"]) == 1

    def test_missing_file_is_usage(self):
        assert main(["fit", "--data", "/nonexistent.csv", "--copula", "frank",
                     "--latency", "weibull", "--censoring", "weibull"]) == 1

    def test_malformed_csv_is_data_error(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("time,status\n-1.0,1\n")
        assert main(["fit", "--data", str(p), "--copula", "independence",
                     "--latency", "weibull", "--censoring", "weibull"]) == 2


class TestFitCommand:
    @pytest.fixture(scope="class")
    def fit_report_path(self, tmp_path_factory):
        tmp = tmp_path_factory.mktemp("fit")
        scn = tmp / "scn.toml"
        scn.write_text(SCENARIO)
        csv = tmp / "d.csv"
        assert main(["simulate", "--scenario", str(scn), "--out", str(csv)]) == 0
        out = tmp / "report.json"
        code = main([
            "fit", "--data", str(csv), "--copula", "independence",
            "--latency", "weibull", "--censoring", "weibull",
            "--seed", "7", "--out", str(out),
        ])
        assert code == 0
        return str(csv), str(out)

    def test_report_roundtrip(self, fit_report_path):
        _, path = fit_report_path
        text = open(path).read()
        report = FitReport.from_json(text)
        assert FitReport.from_json(report.to_json()) == report

    def test_independence_report_shape(self, fit_report_path):
        _, path = fit_report_path
        report = FitReport.from_json(open(path).read())
        assert report.converged
        assert report.tau_hat is None and report.theta_hat is None
        assert report.k == 5
        assert report.n_starts == 10
        assert report.aic == pytest.approx(2 * report.neg_loglik + 10)
        assert report.med_u > 0

    def test_deterministic_given_seed(self, fit_report_path, tmp_path):
        csv, path = fit_report_path
        out2 = tmp_path / "r2.json"
        assert main([
            "fit", "--data", csv, "--copula", "independence",
            "--latency", "weibull", "--censoring", "weibull",
            "--seed", "7", "--out", str(out2),
        ]) == 0
        assert open(path).read() == out2.read_text()

    def test_table_format(self, fit_report_path, capsys):
        csv, _ = fit_report_path
        assert main([
            "fit", "--data", csv, "--copula", "independence",
            "--latency", "weibull", "--censoring", "weibull", "--format", "table",
        ]) == 0
        out = capsys.readouterr().out
        assert "-logLik" in out and "Med_U" in out

    def test_truncate_last_uncensored(self, fit_report_path, tmp_path):
        csv, _ = fit_report_path
        out = tmp_path / "trunc.json"
        assert main([
            "fit", "--data", csv, "--copula", "independence",
            "--latency", "weibull", "--censoring", "weibull",
            "--truncate", "last-uncensored", "--seed", "7", "--out", str(out),
        ]) == 0
        report = FitReport.from_json(out.read_text())
        data = read_dataset_csv(csv)
        assert report.latency_truncation == pytest.approx(data.largest_uncensored())


class TestLrtCommand:
    def test_lrt_from_reports(self, tmp_path, capsys):
        scn = tmp_path / "scn.toml"
        scn.write_text(SCENARIO.replace("n = 120", "n = 150"))
        csv = tmp_path / "d.csv"
        assert main(["simulate", "--scenario", str(scn), "--out", str(csv)]) == 0
        rep_i = tmp_path / "indep.json"
        rep_f = tmp_path / "frank.json"
        assert main([
            "fit", "--data", str(csv), "--copula", "independence",
            "--latency", "weibull", "--censoring", "weibull", "--out", str(rep_i),
        ]) == 0
        assert main([
            "fit", "--data", str(csv), "--copula", "frank",
            "--latency", "weibull", "--censoring", "weibull", "--out", str(rep_f),
        ]) == 0
        assert main(["lrt", "--fit-indep", str(rep_i), "--fit-copula", str(rep_f)]) == 0
        res = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert res["df"] == 1
        assert res["lambda"] >= 0.0
        assert res["critical_value_95"] == pytest.approx(3.841458820694124)

    def test_mismatched_data_rejected(self, tmp_path, capsys):
        scn = tmp_path / "scn.toml"
        scn.write_text(SCENARIO)
        c1, c2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", "--scenario", str(scn), "--out", str(c1)]) == 0
        assert main(["simulate", "--scenario", str(scn), "--out", str(c2), "--seed", "9"]) == 0
        r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
        for csv, rep, cop in ((c1, r1, "independence"), (c2, r2, "frank")):
            assert main([
                "fit", "--data", str(csv), "--copula", cop,
                "--latency", "weibull", "--censoring", "weibull", "--out", str(rep),
            ]) == 0
        assert main(["lrt", "--fit-indep", str(r1), "--fit-copula", str(r2)]) == 1


class TestMcCommand:
    def test_small_mc_table(self, tmp_path, capsys):
        scn = tmp_path / "scn.toml"
        scn.write_text(SCENARIO.replace("n = 120", "n = 60"))
        code = main(["mc", "--scenario", str(scn), "--reps", "10", "--threads", "1"])
        assert code == 0
        out = capsys.readouterr().out
        assert "Bias" in out and "RMSE" in out and "retained=" in out
