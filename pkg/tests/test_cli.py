import json
import math
import subprocess
import sys

import numpy as np
import pytest

from uhlmann_spin import cli
from uhlmann_spin.analytic import tstar_half
from uhlmann_spin.circuit import parse_circuit
from uhlmann_spin.uhlmann import G_MAX


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def sweep_rows(argv, capsys):
    code, out, _ = run(["sweep", *argv], capsys)
    assert code == 0
    return cli.read_sweep_csv(out)


def test_sweep_spin_half_transition(capsys):
    rows = sweep_rows(["--j", "0.5", "--omega0", "1", "--winding", "1", "--tmin", "0.05", "--tmax", "2",
                       "--count", "400"], capsys)
    assert len(rows) == 400
    assert all(r["theta_U"] in (0.0, float(cli.fmt(math.pi))) for r in rows)
    jumps = [(a["T"], b["T"]) for a, b in zip(rows, rows[1:]) if a["theta_U"] != b["theta_U"]]
    assert len(jumps) == 1
    lo, hi = jumps[0]
    assert lo < 0.379663 < hi
    assert rows[0]["theta_U"] > 3 and rows[-1]["theta_U"] == 0


def test_sweep_winding_zero(capsys):
    rows = sweep_rows(["--winding", "0", "--count", "50"], capsys)
    assert all(r["g"] == 0.0 and r["G_real"] == 1.0 for r in rows)


def test_sweep_spin_one_sign_changes(capsys):
    rows = sweep_rows(["--j", "1", "--winding", "2", "--count", "400"], capsys)
    g = np.array([r["G_real"] for r in rows])
    assert np.count_nonzero(np.sign(g[1:]) != np.sign(g[:-1])) == 4


def test_csv_format_and_round_trip(tmp_path, capsys):
    path = tmp_path / "out.csv"
    code, _, _ = run(["sweep", "--j", "3/2", "--winding", "2", "--count", "30", "--spacing", "log",
                      "-o", str(path)], capsys)
    assert code == 0
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    lines = raw.decode().splitlines()
    assert lines[0] == "T,G_real,G_imag,theta_U,g"
    rows = cli.read_sweep_csv(raw.decode())
    for line, row in zip(lines[1:], rows):
        assert line == ",".join(cli.fmt(row[k]) for k in cli.SWEEP_HEADER)
        for field in line.split(","):
            digits = field.lstrip("-").split("e")[0].replace(".", "").lstrip("0")
            assert len(digits) <= 12


def test_output_is_deterministic(tmp_path, monkeypatch, capsys):
    args = ["sweep", "--j", "1", "--winding", "3", "--count", "200", "--spacing", "log"]
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(args + ["-o", str(first)]) == 0
    monkeypatch.setenv(cli.THREADS_ENV, "4")
    assert cli.main(args + ["-o", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_reality_and_snapping_for_many_spins(capsys):
    for two_j in range(0, 9):
        rows = sweep_rows(["--two-j", str(two_j), "--winding", "3", "--count", "60", "--spacing", "log"], capsys)
        assert all(abs(r["G_imag"]) < 1e-8 for r in rows)
        assert all(r["theta_U"] in (0.0, float(cli.fmt(math.pi))) for r in rows)


def test_raw_phase_and_holonomy_method(capsys):
    rows = sweep_rows(["--raw-phase", "--method", "holonomy", "--count", "3", "--tmin", "0.2", "--tmax", "1"], capsys)
    ref = sweep_rows(["--count", "3", "--tmin", "0.2", "--tmax", "1"], capsys)
    for a, b in zip(rows, ref):
        assert abs(a["G_real"] - b["G_real"]) < 1e-6


def test_natural_units(capsys):
    scaled = sweep_rows(["--omega0", "2.5", "--natural-units", "--winding", "2", "--count", "20"], capsys)
    plain = sweep_rows(["--omega0", "1", "--winding", "2", "--count", "20"], capsys)
    for a, b in zip(scaled, plain):
        assert a["T"] == b["T"]
        assert abs(a["G_real"] - b["G_real"]) < 1e-11


@pytest.mark.parametrize("j,W", [("0.5", 1), ("0.5", 2), ("1", 1), ("1", 2)])
def test_include_transitions_puts_peaks_at_zeros(j, W, capsys):
    rows = sweep_rows(["--j", j, "--winding", str(W), "--include-transitions"], capsys)
    peaks = [r["T"] for r in rows if r["g"] == float(cli.fmt(G_MAX))]
    assert len(peaks) == (W if j == "0.5" else 2 * W)
    if j == "0.5":
        assert np.allclose(peaks, tstar_half(1.0, W), atol=1e-9)
    top = sorted(rows, key=lambda r: -r["g"])[: len(peaks)]
    assert sorted(r["T"] for r in top) == peaks


def test_json_output(capsys):
    code, out, _ = run(["sweep", "--format", "json", "--count", "4"], capsys)
    payload = json.loads(out)
    assert code == 0 and payload["columns"] == list(cli.SWEEP_HEADER) and len(payload["rows"]) == 4


def test_tstar_reports(capsys):
    code, out, _ = run(["tstar", "--winding", "2"], capsys)
    assert code == 0 and "method=closed-form" in out and "T* = 0.242314150277" in out
    code, out, _ = run(["tstar", "--j", "1", "--winding", "2", "--format", "json"], capsys)
    payload = json.loads(out)
    assert payload["method"] == "bisection" and len(payload["tstars"]) == 4
    assert payload["phases"] == ["trivial", "nontrivial", "trivial", "nontrivial", "trivial"]


def test_verify_passes(capsys):
    code, out, _ = run(["verify", "--j", "1", "--winding", "2"], capsys)
    assert code == 0, out
    assert out.count("PASS") == 6 and "all checks passed" in out


def test_verify_failure_exit_code(monkeypatch, capsys):
    monkeypatch.setattr(cli, "verification_matrix", lambda cfg: [("broken", 1.0, 1e-6)])
    code, out, _ = run(["verify"], capsys)
    assert code == 1 and "FAIL" in out


def test_protocol_and_circuit(tmp_path, capsys):
    code, out, _ = run(["protocol", "--j", "1", "--winding", "1", "--temperature", "1"], capsys)
    vals = dict(line.split(" = ") for line in out.strip().splitlines())
    assert code == 0 and float(vals["residual_max"]) < 1e-5 and float(vals["deviation"]) < 1e-10
    gates = tmp_path / "prep.txt"
    code, out, _ = run(["circuit", "--j", "1", "--temperature", "1", "--circuit-out", str(gates)], capsys)
    vals = dict(line.split(" = ") for line in out.strip().splitlines())
    assert code == 0 and float(vals["deviation"]) < 1e-9 and vals["gates"] == "3"
    assert len(parse_circuit(gates.read_text()).gates) == 3


def test_bad_config_exit_code(capsys):
    for argv in (["sweep", "--omega0", "-1"], ["sweep", "--j", "0.3"], ["sweep", "--tmin", "2", "--tmax", "1"],
                 ["sweep", "--count", "zero"], ["sweep", "--spacing", "cubic"], ["protocol", "--temperature", "0"]):
        code, out, err = run(argv, capsys)
        assert code == 2 and out == ""
        assert len(err.strip().splitlines()) == 1 and err.startswith("uhlmann-spin: error:")


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# spin-1 sweep\nj = 1\nwinding = 2\ncount = 7\n")
    rows = sweep_rows(["--config", str(cfg)], capsys)
    assert len(rows) == 7
    rows = sweep_rows(["--config", str(cfg), "--count", "3"], capsys)
    assert len(rows) == 3
    cfg.write_text("colour = blue\n")
    code, _, err = run(["sweep", "--config", str(cfg)], capsys)
    assert code == 2 and "colour" in err
    code, _, _ = run(["sweep", "--config", str(tmp_path / "missing.cfg")], capsys)
    assert code == 2


def test_bad_thread_env(monkeypatch, capsys):
    monkeypatch.setenv(cli.THREADS_ENV, "many")
    code, _, _ = run(["sweep", "--count", "3"], capsys)
    assert code == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "uhlmann_spin.cli", "sweep", "--count", "2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.startswith("T,G_real")
