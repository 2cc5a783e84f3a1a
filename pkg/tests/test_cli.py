import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from volembed.cli import main
from volembed.io import parse_points_csv, read_points_csv, to_json
from volembed.linalg import general_position_check


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def cloud_csv(tmp_path, capsys):
    path = tmp_path / "cloud.csv"
    assert run(["gen", "--mode", "gaussian", "--n", 12, "--dim", 6, "--seed", 7, "-o", path], capsys)[0] == 0
    return path


def test_gen_gaussian_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run(["gen", "--mode", "gaussian", "--n", 32, "--dim", 16, "--seed", 7, "-o", p], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    P = read_points_csv(a)
    assert (P.n, P.N) == (32, 16)


def test_gen_simplex_is_in_general_position(tmp_path, capsys):
    path = tmp_path / "s.csv"
    assert run(["gen", "--mode", "simplex", "--n", 5, "--dim", 8, "-o", path], capsys)[0] == 0
    assert general_position_check(read_points_csv(path), 5) == (True, None)


def test_gen_usage_errors(capsys, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["gen", "--n", "1", "--dim", "3"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["gen", "--n", "4"])  # missing --dim
    assert exc.value.code == 2
    assert run(["gen", "--n", 4, "--dim", 3, "-o", tmp_path / "missing" / "x.csv"], capsys)[0] == 2


def test_csv_format():
    P = parse_points_csv("# header\n1,2,3\n\n4.5,-1e3,0\n")
    assert P.points.tolist() == [[1, 2, 3], [4.5, -1000, 0]]
    with pytest.raises(ValueError):
        parse_points_csv("1,2\n3\n")
    with pytest.raises(ValueError):
        parse_points_csv("1,x\n3,4\n")


def test_json_uses_17_significant_digits():
    text = to_json({"x": 0.1, "n": 3, "bad": float("inf"), "flag": True})
    doc = json.loads(text)
    assert '"x": 0.10000000000000001' in text
    assert doc == {"x": 0.1, "n": 3, "bad": None, "flag": True}


def test_embed_writes_report_and_points(cloud_csv, tmp_path, capsys):
    out, rep = tmp_path / "emb.csv", tmp_path / "rep.json"
    code, _, _ = run(["embed", "-i", cloud_csv, "--d", 4, "--k", 2, "--trials", 3, "--seed", 1,
                      "-o", out, "--report", rep, "--map-output", tmp_path / "map.csv"], capsys)
    assert code == 0
    doc = json.loads(rep.read_text())
    assert set(doc) == {"command", "params", "seed", "results", "warnings", "timestamp"}
    assert doc["results"]["report"]["overall_min"] == pytest.approx(1.0, abs=1e-9)
    assert doc["results"]["trials_used"] == 3
    assert doc["results"]["volume_distortion_bound_c1"] is None  # n = 12 < 16
    emb = read_points_csv(out)
    assert (emb.n, emb.N) == (12, 4)

    code, text, _ = run(["report", "-i", cloud_csv, "--embedded", out, "--k", 2, "--deterministic"], capsys)
    assert code == 0
    again = json.loads(text)["results"]["report"]
    assert again["distortion"] == pytest.approx(doc["results"]["report"]["distortion"], rel=1e-9)

    code, text, _ = run(["report", "-i", cloud_csv, "--map", tmp_path / "map.csv", "--k", 2, "--deterministic"],
                        capsys)
    assert json.loads(text)["results"]["report"]["overall_min"] == pytest.approx(1.0, abs=1e-9)


def test_embed_warns_beyond_k_cap(cloud_csv, capsys):
    code, out, err = run(["embed", "-i", cloud_csv, "--d", 4, "--k", 3, "--trials", 1, "--deterministic"], capsys)
    assert code == 0
    assert any("exceeds floor(d/2)" in w for w in json.loads(out)["warnings"])
    assert "warning:" in err


def test_embed_error_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,3\n4,five,6\n")
    assert run(["embed", "-i", bad, "--d", 3, "--k", 1], capsys)[0] == 2
    flat = tmp_path / "flat.csv"
    flat.write_text("1,1,1\n1,1,1\n1,1,1\n")
    assert run(["embed", "-i", flat, "--d", 3, "--k", 1], capsys)[0] == 3
    assert run(["embed", "-i", tmp_path / "nope.csv", "--d", 3, "--k", 1], capsys)[0] == 2


def test_bounds_command(capsys):
    code, out, _ = run(["bounds", "--n", 32, "--d", 8, "--k", 1, "--deterministic"], capsys)
    assert code == 0
    res = json.loads(out)["results"]["distance"]
    assert res["feasible"]
    assert res["b"] / res["a"] <= res["implied_constant"] * 32**0.25 * (np.log(32) / 8) ** 0.5 * (1 + 1e-12)

    code, out, _ = run(["bounds", "--n", 32, "--d", 8, "--k", 4, "--deterministic"], capsys)
    vol = json.loads(out)["results"]["volume"]
    assert vol["mode"] == "volume" and vol["feasible"] and vol["k"] == 4

    code, out, _ = run(["bounds", "--n", 4, "--d", 3, "--k", 1, "--deterministic"], capsys)
    assert code == 0
    assert isinstance(json.loads(out)["results"]["distance"]["feasible"], bool)


def test_verify_commands(capsys):
    code, out, _ = run(["verify", "gamma-bounds", "--deterministic"], capsys)
    assert code == 0 and json.loads(out)["results"]["pass"]
    code, out, _ = run(["verify", "gordon", "--d", 10, "--s", 4, "--reps", 100000, "--deterministic"], capsys)
    assert code == 0
    checks = json.loads(out)["results"]["checks"]
    assert all(c["statistic"] <= c["threshold"] for c in checks)
    code, out, _ = run(["verify", "stability", "--reps", 10000, "--deterministic"], capsys)
    assert code == 0 and json.loads(out)["results"]["pass"]


def test_verify_failure_exit_code(capsys):
    code, out, _ = run(["verify", "gordon", "--d", 6, "--s", 3, "--reps", 1000, "--epsilon", 1e-6,
                        "--deterministic"], capsys)
    assert code == 1
    assert not json.loads(out)["results"]["pass"]


def test_bench_sweep(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    assert run(["bench", "--n-values", 64, "--d-values", "4,6,8,10", "--trials", 2, "--seed", 3,
                "--sample-count", 2000, "-o", out], capsys)[0] == 0
    rows = list(csv.DictReader(out.open()))
    assert [int(r["d"]) for r in rows] == [4, 6, 8, 10]
    for r in rows:
        assert float(r["measured_distortion"]) <= float(r["theoretical_bound"])
    measured = [float(r["measured_distortion"]) for r in rows]
    assert measured[-1] < measured[0]


def test_bench_empty_grid(tmp_path, capsys):
    out = tmp_path / "empty.csv"
    assert run(["bench", "--n-values", "", "-o", out], capsys)[0] == 0
    assert out.read_text() == "n,d,k,measured_distortion,theoretical_bound,trials,seed\n"


def test_seed_env_override(monkeypatch, capsys):
    monkeypatch.setenv("VOLEMBED_SEED", "17")
    code, out, _ = run(["bounds", "--n", 8, "--d", 3, "--k", 1, "--deterministic"], capsys)
    assert json.loads(out)["seed"] == 17
    monkeypatch.setenv("VOLEMBED_SEED", "abc")
    with pytest.raises(SystemExit) as exc:
        main(["bounds", "--n", "8", "--d", "3", "--k", "1"])
    assert exc.value.code == 2


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "volembed.cli", "bounds", "--n", "8", "--d", "3", "--k", "1",
                           "--deterministic"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "bounds"
