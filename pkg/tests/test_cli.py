"""Command line coverage: one test per subcommand plus the exit-code
contract (0 ok, 2 bad input, 3 failed certificate, 4 divergence).

All tests drive main(argv) in process and read stdout/stderr through
capsys; a single subprocess test checks the module entry point end to end.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from clfsynth.cli import main

S3 = np.sqrt(3.0)

pytestmark = [
    pytest.mark.filterwarnings("ignore:scaling queried"),
    pytest.mark.filterwarnings("ignore:annulus"),
]


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestCare:
    def test_double_integrator(self, tmp_path, capsys):
        a = write_json(tmp_path / "A.json", [[0.0, 1.0], [0.0, 0.0]])
        b = write_json(tmp_path / "B.json", [[0.0], [1.0]])
        code, out, _ = run_cli(capsys, "care", "--A", a, "--B", b)
        assert code == 0
        res = json.loads(out)
        assert (res["P"]["rows"], res["P"]["cols"]) == (2, 2)
        assert np.allclose(res["P"]["data"], [S3, 1.0, 1.0, S3], atol=1e-9)
        assert np.allclose(res["K"]["data"], [-1.0, -S3], atol=1e-9)
        assert res["residual_norm"] <= 1e-8
        assert res["closed_loop_spectral_abscissa"] < 0

    def test_out_file(self, tmp_path, capsys):
        a = write_json(tmp_path / "A.json", [[-1.0]])
        b = write_json(tmp_path / "B.json", [[1.0]])
        dest = tmp_path / "res.json"
        code, out, _ = run_cli(capsys, "care", "--A", a, "--B", b,
                               "--out", str(dest))
        assert code == 0
        assert out == ""
        assert "P" in json.loads(dest.read_text())

    def test_malformed_json_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "A.json"
        bad.write_text("{not json")
        b = write_json(tmp_path / "B.json", [[1.0]])
        code, _, err = run_cli(capsys, "care", "--A", str(bad), "--B", b)
        assert code == 2
        assert "not valid JSON" in err

    def test_missing_file_exits_2(self, tmp_path, capsys):
        b = write_json(tmp_path / "B.json", [[1.0]])
        code, _, err = run_cli(capsys, "care", "--A",
                               str(tmp_path / "nope.json"), "--B", b)
        assert code == 2
        assert "file not found" in err


class TestSynth:
    def test_scalar_linear(self, capsys):
        code, out, _ = run_cli(capsys, "synth", "scalar_linear",
                               "--samples", "400")
        assert code == 0
        res = json.loads(out)
        assert res["kind"] == "blended"
        assert res["r0"] == 4.0
        assert res["gain_error"] == 0.0
        assert res["artstein"]["passed"] is True
        assert res["decrease"]["passed"] is True

    def test_unknown_system_exits_2(self, capsys):
        code, _, err = run_cli(capsys, "synth", "no_such_system")
        assert code == 2
        assert "unknown system" in err


class TestInvopt:
    def test_build_scalar_cubic(self, capsys):
        code, out, _ = run_cli(capsys, "invopt", "build", "scalar_cubic",
                               "--samples", "400")
        assert code == 0
        res = json.loads(out)
        assert res["hjb_max_abs"] <= 1e-10
        assert res["q_min_off_origin"] > 0
        assert all(l >= 1.0 for l in res["ladder"])
        assert res["scaling"]["r0"] == res["r0"]

    def test_verify_hjb_impossible_tol_exits_3(self, capsys):
        code, out, err = run_cli(capsys, "invopt", "verify-hjb", "scalar_cubic",
                                 "--samples", "400", "--tol", "1e-20")
        assert code == 3
        assert "certificate failure" in err
        assert json.loads(out)["passed"] is False

    def test_cost_matches_value(self, capsys):
        code, out, _ = run_cli(capsys, "invopt", "cost", "scalar_linear",
                               "--samples", "400", "--x0", "1.0",
                               "--dt", "0.01", "--T", "20.0")
        assert code == 0
        res = json.loads(out)
        assert res["tail_kind"] == "value_tail"
        assert res["relative_gap"] <= 1e-6

    def test_bad_x0_exits_2(self, capsys):
        code, _, err = run_cli(capsys, "invopt", "cost", "scalar_linear",
                               "--samples", "400", "--x0", "a,b")
        assert code == 2
        assert "comma-separated numbers" in err

    def test_wrong_x0_length_exits_2(self, capsys):
        code, _, err = run_cli(capsys, "invopt", "cost", "scalar_linear",
                               "--samples", "400", "--x0", "1.0,2.0")
        assert code == 2
        assert "must have 1 entries" in err


class TestBackstep:
    def test_cascade_demo(self, capsys):
        code, out, _ = run_cli(capsys, "backstep", "strict_feedback_demo",
                               "--samples", "400")
        assert code == 0
        res = json.loads(out)
        assert res["gain_error"] <= 1e-9
        assert "P_y" in res["partition"]
        assert res["r0"] > 0

    def test_wrong_structure_exits_2(self, capsys):
        code, _, err = run_cli(capsys, "backstep", "scalar_linear")
        assert code == 2
        assert "strict-feedback" in err


class TestOrbital:
    def test_transfer_with_trace(self, tmp_path, capsys):
        trace = tmp_path / "trace.csv"
        code, out, _ = run_cli(capsys, "orbital", "--samples", "400",
                               "--dt", "0.02", "--T", "40.0",
                               "--trace", str(trace))
        assert code == 0
        res = json.loads(out)
        assert res["final_error"] <= 1e-3
        assert res["steps"] == 2000
        header = trace.read_text().split("\n", 1)[0]
        assert header.startswith("t,chi1,chi2")

    def test_coarse_step_exits_4(self, capsys):
        code, _, err = run_cli(capsys, "orbital", "--samples", "400",
                               "--dt", "5.0", "--T", "50.0")
        assert code == 4
        assert "divergence" in err


class TestRun:
    def quick_cfg(self, tmp_path):
        return write_json(tmp_path / "cfg.json", {
            "system": "scalar_linear",
            "sampling": {"n_samples": 600},
            "integrator": {"dt": 0.01, "horizon": 20.0},
            "inverse_optimal": {"k_max": 2},
        })

    def test_passing_config(self, tmp_path, capsys):
        cfg = self.quick_cfg(tmp_path)
        out_dir = tmp_path / "out"
        code, out, _ = run_cli(capsys, "run", cfg, "--out-dir", str(out_dir))
        assert code == 0
        assert out == "status: pass\n"
        report = json.loads((out_dir / "report.json").read_text())
        assert report["status"] == "pass"

    def test_failing_check_exits_3(self, tmp_path, capsys):
        cfg = write_json(tmp_path / "cfg.json", {
            "system": "orbital",
            "sampling": {"n_samples": 400},
            "integrator": {"dt": 0.02, "horizon": 40.0},
            "target_tolerance": 1e-9,
        })
        code, out, _ = run_cli(capsys, "run", cfg, "--out-dir",
                               str(tmp_path / "out"))
        assert code == 3
        assert out == "status: fail\n"

    def test_malformed_config_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "cfg.json"
        bad.write_text("{{{")
        code, _, err = run_cli(capsys, "run", str(bad))
        assert code == 2
        assert "error:" in err


class TestParser:
    def test_no_command_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_module_entry_point(self, tmp_path):
        a = write_json(tmp_path / "A.json", [[-1.0]])
        b = write_json(tmp_path / "B.json", [[1.0]])
        proc = subprocess.run(
            [sys.executable, "-m", "clfsynth.cli", "care",
             "--A", a, "--B", b],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["closed_loop_spectral_abscissa"] < 0
