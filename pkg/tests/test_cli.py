import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from ltlab import acceptance
from ltlab.acceptance import CriterionResult
from ltlab.cli import main, payload_bytes
from ltlab.grid import PotentialField, RadialGrid

SMALL = ["--grid-n", "2999", "--box", "30"]


def read_result(path):
    return json.loads((path / "result.json").read_text())


# -- optimize --------------------------------------------------------------------


def test_optimize_three_halves(tmp_path, capsys):
    code = main(["optimize", "--gamma", "1.5", "--dim", "1", "--nstates", "1", "--output", str(tmp_path)])
    assert code == 0
    env = read_result(tmp_path / "optimize")
    assert env["payload"]["L_estimate"] == pytest.approx(0.1875, abs=1e-4)
    assert env["payload"]["converged"] is True
    assert env["schema_version"] == "1.0"
    assert set(env) == {"schema_version", "config", "timestamps", "payload", "provenance"}
    # every default is echoed
    assert set(env["config"]["params"]) >= {"gamma", "dim", "nstates", "grid_n", "box", "eta", "max_iter", "tol",
                                            "init"}
    assert env["provenance"]["grid"]["n"] == 8192
    V = PotentialField.from_csv(tmp_path / "optimize" / "V_star.csv")
    assert V.grid.n == 8192
    assert "L_estimate=0.1875" in capsys.readouterr().out


def test_optimize_rejects_inadmissible_gamma(tmp_path, capsys):
    assert main(["optimize", "--gamma", "0.3", "--dim", "1", "--output", str(tmp_path)]) == 1
    assert "gamma" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["optimize", "--config", str(tmp_path / "none.json"), "--output", str(tmp_path)]) == 1
    assert "config file not found" in capsys.readouterr().err


def test_not_converged_exit_code(tmp_path):
    code = main(["optimize", *SMALL, "--max-iter", "1", "--output", str(tmp_path)])
    assert code == 2
    assert read_result(tmp_path / "optimize")["payload"]["converged"] is False


def test_trace_is_written(tmp_path):
    assert main(["optimize", *SMALL, "--trace", "--output", str(tmp_path)]) == 0
    env = read_result(tmp_path / "optimize")
    lines = (tmp_path / "optimize" / "trace.jsonl").read_text().splitlines()
    # the converging iteration is not a step and is not traced
    assert len(lines) == env["payload"]["iterations"] - 1
    assert json.loads(lines[0])["iteration"] == 1


def test_determinism(tmp_path):
    args = ["optimize", *SMALL, "--init", "random", "--seed", "3"]
    assert main([*args, "--output", str(tmp_path / "a")]) == 0
    assert main([*args, "--output", str(tmp_path / "b")]) == 0
    a = read_result(tmp_path / "a" / "optimize")
    b = read_result(tmp_path / "b" / "optimize")
    assert payload_bytes(a) == payload_bytes(b)
    assert (tmp_path / "a" / "optimize" / "V_star.csv").read_bytes() == (
        tmp_path / "b" / "optimize" / "V_star.csv"
    ).read_bytes()


@pytest.mark.parametrize("argv", [["optimize", "--gamma", "abc"], ["nope"], ["optimize", "--workers", "0"], []])
def test_usage_errors_exit_one(tmp_path, argv):
    assert main([*argv, "--output", str(tmp_path)] if argv else argv) == 1


# -- configuration ---------------------------------------------------------------


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "kdv", "params": {"betas": [0.9, 0.6, 0.3], "grid_n": 999, "box": 30}}))
    assert main(["kdv", "--config", str(cfg), "--betas", "0.8,0.5", "--output", str(tmp_path)]) == 0
    params = read_result(tmp_path / "kdv")["config"]["params"]
    assert params["betas"] == [0.8, 0.5]
    assert params["grid_n"] == 999


def test_flat_config_file_and_seed(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"betas": [0.7], "grid_n": 499, "box": 20, "seed": 9}))
    assert main(["kdv", "--config", str(cfg), "--output", str(tmp_path)]) == 0
    env = read_result(tmp_path / "kdv")
    assert env["config"]["params"]["betas"] == [0.7]
    assert env["config"]["seed"] == 9


@pytest.mark.parametrize(
    "content", ['{"command": "clr"}', '{"params": {"bogus": 1}}', "not json", "[1, 2]"]
)
def test_bad_config_files(tmp_path, content):
    cfg = tmp_path / "c.json"
    cfg.write_text(content)
    assert main(["kdv", "--config", str(cfg), "--output", str(tmp_path)]) == 1


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("LTLAB_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["kdv", "--betas", "0.6", "--grid-n", "499", "--box", "20"]) == 0
    assert (tmp_path / "env" / "kdv" / "result.json").is_file()


# -- kdv ---------------------------------------------------------------------------


def test_kdv_two_soliton_table(tmp_path):
    assert main(["kdv", "--betas", "0.8,0.5", "--output", str(tmp_path)]) == 0
    env = read_result(tmp_path / "kdv")
    assert env["payload"]["max_abs_error"] <= 1e-4
    with open(tmp_path / "kdv" / "spectrum.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["exact"]) for r in rows] == pytest.approx([-0.64, -0.25])
    assert (tmp_path / "kdv" / "profile.csv").is_file()
    assert env["payload"]["riesz"]["ratio"] == pytest.approx(0.1875, abs=1e-4)


def test_kdv_rejects_ascending_betas(tmp_path):
    assert main(["kdv", "--betas", "0.5,0.8", "--output", str(tmp_path)]) == 1


def test_kdv_normalize(tmp_path):
    assert main(["kdv", "--betas", "0.9,0.6,0.3", "--normalize", "--output", str(tmp_path)]) == 0
    assert read_result(tmp_path / "kdv")["payload"]["cube_sum"] == pytest.approx(3.0 / 16.0, abs=1e-12)


# -- clr ---------------------------------------------------------------------------


def test_clr_d7_gain(tmp_path):
    assert main(["clr", "--dim", "7", "--potential", "vl:1", "--output", str(tmp_path)]) == 0
    payload = read_result(tmp_path / "clr")["payload"]
    assert payload["gain_over_sobolev"]["9"] > 1
    assert payload["gain_over_sobolev"]["9"] == pytest.approx(5 ** 3.5 / 9 ** 2.5, rel=1e-2)
    assert payload["tail_constant"] == pytest.approx(63.0, rel=1e-3)


def test_clr_sobolev(tmp_path):
    assert main(["clr", "--dim", "3", "--potential", "sobolev", "--output", str(tmp_path)]) == 0
    payload = read_result(tmp_path / "clr")["payload"]
    assert payload["mus"][0] == pytest.approx(1.0, abs=1e-3)
    rows = (tmp_path / "clr" / "mus.csv").read_text().splitlines()
    assert rows[0] == "j,mu,ell_estimate" and len(rows) == 1 + 5


def test_clr_rejects_d2(tmp_path, capsys):
    assert main(["clr", "--dim", "2", "--potential", "sobolev", "--output", str(tmp_path)]) == 1
    assert "d >= 3" in capsys.readouterr().err


def test_clr_file_potential(tmp_path):
    g = RadialGrid(30.0, 1500, 3)
    V = PotentialField(g, 6.0 * np.exp(-g.nodes ** 2))
    V.to_csv(tmp_path / "v.csv")
    code = main(["clr", "--dim", "3", "--potential", f"file:{tmp_path / 'v.csv'}", "--nstates", "2",
                 "--grid-n", "1500", "--box", "30", "--output", str(tmp_path)])
    assert code == 0
    assert len(read_result(tmp_path / "clr")["payload"]["mus"]) == 2


@pytest.mark.parametrize("pot", ["vl:x", "banana"])
def test_clr_bad_potential(tmp_path, pot):
    assert main(["clr", "--potential", pot, "--grid-n", "500", "--box", "20", "--output", str(tmp_path)]) == 1


# -- sweep ---------------------------------------------------------------------------


def test_single_point_sweep_equals_optimize(tmp_path):
    assert main(["optimize", *SMALL, "--gamma", "2", "--output", str(tmp_path / "o")]) == 0
    assert main(["sweep", *SMALL, "--gamma", "2", "--dim", "1", "--nstates", "1", "--output",
                 str(tmp_path / "s")]) == 0
    opt = read_result(tmp_path / "o" / "optimize")
    line = (tmp_path / "s" / "sweep" / "ledger.jsonl").read_text().splitlines()
    assert len(line) == 1
    assert payload_bytes(json.loads(line[0])) == payload_bytes(opt)


def test_sweep_ledger_rows_and_parallel_order(tmp_path):
    args = ["sweep", *SMALL, "--gamma", "1.5,2", "--dim", "1", "--nstates", "1"]
    assert main([*args, "--output", str(tmp_path / "seq")]) == 0
    assert main([*args, "--workers", "2", "--output", str(tmp_path / "par")]) == 0
    seq = (tmp_path / "seq" / "sweep" / "ledger.jsonl").read_text().splitlines()
    par = (tmp_path / "par" / "sweep" / "ledger.jsonl").read_text().splitlines()
    assert len(seq) == len(par) == 2
    assert [payload_bytes(json.loads(x)) for x in seq] == [payload_bytes(json.loads(x)) for x in par]
    with open(tmp_path / "seq" / "sweep" / "ledger.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["gamma", "dim", "N", "ratio", "norm_power", "neg_count"]
    assert [float(r["gamma"]) for r in rows] == [1.5, 2.0]
    assert float(rows[0]["ratio"]) == pytest.approx(0.1875, abs=1e-4)


def test_empty_sweep(tmp_path):
    assert main(["sweep", "--gamma=", "--output", str(tmp_path)]) == 0
    assert (tmp_path / "sweep" / "ledger.jsonl").read_text() == ""
    assert (tmp_path / "sweep" / "ledger.csv").read_text().splitlines() == ["gamma,dim,N,ratio,norm_power,neg_count"]
    assert read_result(tmp_path / "sweep")["payload"]["points"] == 0


def test_sweep_validates_all_points_first(tmp_path):
    assert main(["sweep", *SMALL, "--gamma", "1.5,0.3", "--output", str(tmp_path)]) == 1
    assert not (tmp_path / "sweep" / "ledger.jsonl").exists()


# -- verify ----------------------------------------------------------------------------


def test_verify_quick(tmp_path, capsys):
    assert main(["verify", "--quick", "--output", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == len(acceptance.QUICK)
    payload = read_result(tmp_path / "verify")["payload"]
    assert payload["all_passed"] and len(payload["results"]) == len(acceptance.QUICK)


def test_verify_failure_is_nonzero(tmp_path, monkeypatch, capsys):
    def failing():
        """always fails."""
        return CriterionResult(99, "always fails", False, "forced")

    def crashing():
        """crashes."""
        raise RuntimeError("boom")

    monkeypatch.setattr(acceptance, "CRITERIA", {98: crashing, 99: failing})
    monkeypatch.setattr(acceptance, "QUICK", (98, 99))
    assert main(["verify", "--quick", "--output", str(tmp_path)]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "boom" in out and "0/2" in out


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "ltlab.cli", "kdv", "--betas", "0.6", "--grid-n", "499", "--box", "20",
         "--output", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "lambda_1" in proc.stdout


def test_clr_reports_box_convergence(tmp_path):
    assert main(["clr", "--dim", "3", "--potential", "sobolev", "--output", str(tmp_path)]) == 0
    study = read_result(tmp_path / "clr")["payload"]["box_convergence"]
    assert study["r_max_half"] == pytest.approx(100.0, rel=1e-3)
    # the exterior closure keeps the |x|^-4 tail from biasing mu at O(1/r_max)
    assert study["max_rel_change"] < 1e-3
