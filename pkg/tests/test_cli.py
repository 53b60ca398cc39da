import subprocess
import sys

import pytest

from postcap.cli import main
from postcap.tolerances import tolerances


def test_capacity_post_alpha(capsys):
    assert main(["capacity", "post-alpha", "--alpha", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "capacity_bits: 0.321928" in out


def test_capacity_post_ab(capsys):
    assert main(["capacity", "post-ab", "--a", "0.9", "--b", "0.9"]) == 0
    assert "capacity_bits: 0.531004" in capsys.readouterr().out


def test_capacity_mary(capsys):
    assert main(["capacity", "mary", "--m", "4"]) == 0
    assert "capacity_bits: 1.000000" in capsys.readouterr().out


def test_capacity_numeric_check(capsys):
    code = main(["capacity", "post-alpha", "--alpha", "0.5", "--numeric-check", "--n", "2"])
    out = capsys.readouterr().out
    assert code == 0
    assert "kkt_passed: True" in out
    assert "numeric_gap:" in out


def test_capacity_rejects_bad_parameter():
    with pytest.raises(SystemExit) as exc:
        main(["capacity", "post-alpha", "--alpha", "1.5"])
    assert exc.value.code == 2


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["capacity", "post-alpha", "--alpha", "0.5", "--bogus"])
    assert exc.value.code == 2


def test_sweep_alpha_deterministic(tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    assert main(["sweep", "alpha", "--points", "11", "--out", str(out1)]) == 0
    assert main(["sweep", "alpha", "--points", "11", "--out", str(out2)]) == 0
    data = out1.read_bytes()
    assert data == out2.read_bytes()
    lines = data.decode().splitlines()
    assert lines[0] == "alpha,capacity_bits"
    assert "0.500000,0.321928" in lines
    assert len(lines) == 12


def test_sweep_ab_includes_degenerate_rows(tmp_path):
    out = tmp_path / "ab.csv"
    assert main(["sweep", "ab", "--points", "5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "a,b,capacity_bits,gamma"
    assert len(lines) == 26
    degenerate = [ln for ln in lines[1:] if ln.endswith(",")]
    assert degenerate  # the a + b = 1 diagonal has no gamma
    for ln in degenerate:
        assert ",0.000000," in ln
    symmetric = [ln for ln in lines if ln.startswith("0.750000,0.750000")]
    assert symmetric and symmetric[0].endswith("1.000000")


def test_table1_quick_row(tmp_path):
    out = tmp_path / "table.csv"
    code = main(
        [
            "table1",
            "--max-m",
            "2",
            "--upper-bound-max-m",
            "1",
            "--out",
            str(out),
            "--check",
        ]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "m,upper_bound,scheme_rate,feedback_capacity"
    assert lines[1].startswith("1,0.791")
    assert lines[2].startswith("2,,0.333333,0.832")


def test_table1_json_format(tmp_path):
    out = tmp_path / "table.json"
    code = main(
        [
            "table1",
            "--max-m",
            "2",
            "--upper-bound-max-m",
            "0",
            "--format",
            "json",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    import json

    rows = json.loads(out.read_text())
    assert rows[0]["m"] == 1
    assert rows[0]["upper_bound"] is None
    assert rows[1]["feedback_capacity"] == pytest.approx(0.8325, abs=5e-4)


def test_table1_upper_bound_cap_requires_big():
    with pytest.raises(SystemExit) as exc:
        main(["table1", "--max-m", "8", "--upper-bound-max-m", "8"])
    assert exc.value.code == 2


def test_verify_inequalities(capsys):
    assert main(["verify", "inequalities", "--grid", "40"]) == 0
    out = capsys.readouterr().out
    assert "result: pass" in out


def test_verify_kkt(capsys):
    assert main(["verify", "kkt", "--family", "post-alpha", "--alpha", "0.3", "--n", "3"]) == 0
    out = capsys.readouterr().out
    assert "kkt/kkt_certificate" in out
    assert "result: pass" in out


def test_verify_concavity(capsys):
    assert main(["verify", "concavity", "--n", "3", "--seed", "1", "--trials", "25"]) == 0
    assert "concavity/midpoint_concavity" in capsys.readouterr().out


def test_config_file_sets_tolerances(tmp_path, capsys):
    cfg = tmp_path / "tol.cfg"
    cfg.write_text("pmf_sum = 1e-8\n# comment\n")
    before = tolerances.pmf_sum
    try:
        assert main(["--config", str(cfg), "capacity", "post-alpha", "--alpha", "0.5"]) == 0
        assert tolerances.pmf_sum == 1e-8
    finally:
        tolerances.pmf_sum = before
    capsys.readouterr()


def test_config_file_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "tol.cfg"
    cfg.write_text("bogus = 1\n")
    with pytest.raises(SystemExit) as exc:
        main(["--config", str(cfg), "capacity", "post-alpha", "--alpha", "0.5"])
    assert exc.value.code == 2


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "postcap.cli", "capacity", "post-alpha", "--alpha", "0.5"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "0.321928" in proc.stdout


def test_numeric_check_gap_can_fail(capsys):
    # an impossible tolerance turns the numeric cross-check into exit 1
    code = main(
        ["capacity", "post-alpha", "--alpha", "0.5", "--numeric-check", "--n", "1", "--tol", "0"]
    )
    capsys.readouterr()
    assert code == 1


def test_thread_env_does_not_change_output(tmp_path, monkeypatch):
    serial = tmp_path / "serial.csv"
    threaded = tmp_path / "threaded.csv"
    assert main(["sweep", "alpha", "--points", "21", "--out", str(serial)]) == 0
    monkeypatch.setenv("POSTCAP_THREADS", "4")
    assert main(["sweep", "alpha", "--points", "21", "--out", str(threaded)]) == 0
    assert serial.read_bytes() == threaded.read_bytes()


def test_table1_output_is_deterministic(tmp_path):
    first = tmp_path / "t1.csv"
    second = tmp_path / "t2.csv"
    args = ["table1", "--max-m", "2", "--upper-bound-max-m", "1"]
    assert main(args + ["--out", str(first)]) == 0
    assert main(args + ["--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
