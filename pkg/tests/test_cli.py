import json

import pytest

from ntcpfields.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_pairs(out):
    pairs = {}
    for line in out.strip().split("\n"):
        key, value = line.split(" ", 1)
        pairs[key] = value
    return pairs


class TestNtcpCommand:
    def test_exact_value(self, capsys):
        code, out, _ = run(
            capsys, "ntcp", "--n", "10", "--p", "0.5", "--L", "5", "--method", "exact"
        )
        assert code == 0
        assert parse_pairs(out)["exact_value"] == "0.623046875"

    def test_all_methods(self, capsys):
        code, out, _ = run(capsys, "ntcp", "--n", "100", "--p", "0.5", "--L", "60")
        assert code == 0
        pairs = parse_pairs(out)
        assert set(pairs) == {
            "exact_value", "exact_error_bound",
            "normal_value", "normal_error_bound",
            "weiss_value", "weiss_error_bound",
        }
        exact = float(pairs["exact_value"])
        assert abs(float(pairs["normal_value"]) - exact) <= float(pairs["normal_error_bound"])
        assert abs(float(pairs["weiss_value"]) - exact) <= float(pairs["weiss_error_bound"])

    def test_weiss_bound_unavailable(self, capsys):
        code, out, _ = run(
            capsys, "ntcp", "--n", "10", "--p", "0.5", "--L", "5", "--method", "weiss"
        )
        assert code == 0
        assert parse_pairs(out)["weiss_error_bound"] == "unavailable"

    def test_domain_error_exit_one(self, capsys):
        code, _, err = run(
            capsys, "ntcp", "--n", "10", "--p", "1.5", "--L", "5", "--method", "exact"
        )
        assert code == 1
        assert "error" in err

    def test_bad_flag_exit_two(self, capsys):
        code, _, _ = run(capsys, "ntcp", "--n", "10", "--p", "0.5", "--L", "5",
                         "--method", "bogus")
        assert code == 2

    def test_csv_format(self, capsys):
        code, out, _ = run(
            capsys, "ntcp", "--n", "10", "--p", "0.5", "--L", "5",
            "--method", "exact", "--format", "csv",
        )
        assert code == 0
        lines = out.strip().split("\n")
        assert lines[0] == "key,value"
        assert "exact_value,0.623046875" in lines

    def test_json_format(self, capsys):
        code, out, _ = run(
            capsys, "ntcp", "--n", "10", "--p", "0.5", "--L", "5",
            "--method", "exact", "--format", "json",
        )
        assert code == 0
        obj = json.loads(out)
        assert obj["exact_value"] == pytest.approx(0.623046875)


class TestThresholdCommand:
    def test_median_threshold(self, capsys):
        code, out, _ = run(capsys, "threshold", "--n", "100", "--p", "0.5",
                           "--gamma", "0.5")
        assert code == 0
        pairs = parse_pairs(out)
        assert float(pairs["x_gamma"]) == pytest.approx(50.0, abs=1e-9)
        assert pairs["L_gamma"] == "50"
        assert float(pairs["c"]) == pytest.approx(0.0, abs=1e-12)

    def test_kappa_inversion_included(self, capsys):
        code, out, _ = run(capsys, "threshold", "--n", "100", "--p", "0.5",
                           "--gamma", "0.9", "--kappa", "0.5")
        assert code == 0
        pairs = parse_pairs(out)
        assert float(pairs["p_bar"]) < 0.5
        assert float(pairs["kappa_star"]) > 1.0


class TestDoseCommand:
    def test_single_hit_half(self, capsys):
        code, out, _ = run(
            capsys, "dose", "--model", "single_hit", "--alpha", "1.0",
            "--n0", "1", "--target-p", "0.5",
        )
        assert code == 0
        assert float(parse_pairs(out)["dose"]) == pytest.approx(0.6931472, abs=1e-6)

    def test_missing_variant_parameter(self, capsys):
        code, _, err = run(
            capsys, "dose", "--model", "lq", "--alpha", "1.0", "--target-p", "0.5"
        )
        assert code == 1
        assert "beta" in err

    def test_kappa_route_requires_n_and_gamma(self, capsys):
        code, _, _ = run(
            capsys, "dose", "--model", "single_hit", "--alpha", "1.0",
            "--kappa", "0.5",
        )
        assert code == 1


class TestSimulateEstimate:
    def test_round_trip(self, capsys, tmp_path):
        path = str(tmp_path / "sample.dat")
        code, out, _ = run(
            capsys, "simulate", "--field", "window_threshold", "--theta", "0.5",
            "--k-min", "2", "--d", "1", "--n", "50", "--seed", "7", "--out", path,
        )
        assert code == 0
        total = float(parse_pairs(out)["sum"])

        code, out, _ = run(
            capsys, "estimate", "--sample", path, "--level", "0.95",
            "--x", "50", "--mean", "0.5",
        )
        assert code == 0
        pairs = parse_pairs(out)
        assert float(pairs["sum"]) == total
        assert float(pairs["ci_0.95_lo"]) < float(pairs["mean"]) < float(pairs["ci_0.95_hi"])
        assert 0.0 <= float(pairs["ntcp_estimate"]) <= 1.0

    def test_estimate_idempotent(self, capsys, tmp_path):
        path = str(tmp_path / "sample.dat")
        run(capsys, "simulate", "--field", "iid", "--p", "0.3",
            "--d", "2", "--n", "10", "--seed", "3", "--out", path)
        _, first, _ = run(capsys, "estimate", "--sample", path)
        _, second, _ = run(capsys, "estimate", "--sample", path)
        assert first == second

    def test_missing_sample_exit_two(self, capsys, tmp_path):
        missing = str(tmp_path / "nope.dat")
        code, _, err = run(capsys, "estimate", "--sample", missing)
        assert code == 2
        assert "nope.dat" in err


class TestExperimentCommand:
    def test_runs_config_file(self, capsys, tmp_path):
        config = {
            "model": {"type": "moving_window_threshold",
                      "window_radius": 1, "theta": 0.5, "k_min": 2},
            "d": 1,
            "n_schedule": [10, 20],
            "replicates": 50,
            "master_seed": 6,
        }
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(config))
        out_path = str(tmp_path / "report.csv")
        code, out, _ = run(capsys, "experiment", "--config", str(config_path),
                           "--out", out_path)
        assert code == 0
        pairs = parse_pairs(out)
        assert pairs["report"] == out_path
        header = open(out_path).readline().strip()
        assert header.startswith("n,cube_size,mode,ks")

    def test_missing_config_exit_two(self, capsys, tmp_path):
        missing = str(tmp_path / "absent.json")
        code, _, err = run(capsys, "experiment", "--config", missing,
                           "--out", str(tmp_path / "r.csv"))
        assert code == 2
        assert "absent.json" in err

    def test_malformed_config_exit_two(self, capsys, tmp_path):
        config_path = tmp_path / "bad.json"
        config_path.write_text("{not json")
        code, _, _ = run(capsys, "experiment", "--config", str(config_path),
                         "--out", str(tmp_path / "r.csv"))
        assert code == 2


def test_no_subcommand_exit_two(capsys):
    assert main([]) == 2
