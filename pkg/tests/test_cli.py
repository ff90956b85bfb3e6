import json

import pytest

from mpshl.cli import main


@pytest.fixture
def qubo_file(tmp_path):
    path = tmp_path / "one.qubo"
    path.write_text("1 1 -1.0\n")
    return path


@pytest.fixture
def triangle_file(tmp_path):
    path = tmp_path / "tri.col"
    path.write_text("p edge 3 3\ne 1 2\ne 2 3\ne 1 3\n")
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_single_variable(tmp_path, qubo_file, capsys):
    inst = tmp_path / "inst.json"
    assert run(capsys, "reduce", qubo_file, "-o", inst)[0] == 0
    code, out, _ = run(capsys, "solve", inst)
    assert code == 0
    assert "b = 1" in out and "value = -1" in out
    code, out, _ = run(capsys, "solve", inst, "--json")
    doc = json.loads(out)
    assert doc["b"] == [1] and doc["value"] == -1.0


def test_reduce_then_report_layout(tmp_path, triangle_file, capsys):
    inst = tmp_path / "tri.json"
    run(capsys, "reduce", triangle_file, "-o", inst)
    code, out, _ = run(capsys, "report", inst, "--json", "--window-samples", "1")
    doc = json.loads(out)
    assert code == 0
    assert (doc["N"], doc["D"], doc["m"], doc["n"]) == (4, 36, 6, 34)
    assert doc["kappa"] == 4**-1.5 and doc["gamma"] == 1.0
    assert "findings" in doc["windows"]


def test_report_text(tmp_path, qubo_file, capsys):
    inst = tmp_path / "inst.json"
    run(capsys, "reduce", qubo_file, "-o", inst)
    code, out, _ = run(capsys, "report", inst)
    assert code == 0 and "kappa" in out and "n = N^2+6+2m = 18" in out


def test_verify_pass_and_tamper(tmp_path, triangle_file, capsys):
    inst = tmp_path / "tri.json"
    run(capsys, "reduce", triangle_file, "-o", inst)
    assert run(capsys, "verify", inst, "--window-samples", "1")[0] == 0
    doc = json.loads(inst.read_text())
    site = next(s for s in doc["fixed_sites"] if s["site"] == 12)
    site["entries"] = [[a, b, c, 2 * re, im] for a, b, c, re, im in site["entries"]]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "verify", bad, "--window-samples", "0")
    assert code == 1
    assert "failed at 12" in out


def test_sweep_json(capsys):
    code, out, _ = run(capsys, "sweep", "--n", "6", "--D", "8", "--json")
    doc = json.loads(out)
    assert code == 0 and abs(doc["error"]) < 1e-10 and "wall_time" not in doc


def test_json_output_deterministic(tmp_path, triangle_file, capsys):
    inst = tmp_path / "tri.json"
    run(capsys, "reduce", triangle_file, "-o", inst)
    outs = [run(capsys, "solve", inst, "--json", "--seed", "3")[1] for _ in range(2)]
    assert outs[0] == outs[1]
    outs = [run(capsys, "sweep", "--n", "5", "--D", "2", "--json", "--seed", "7")[1] for _ in range(2)]
    assert outs[0] == outs[1]


def test_exit_codes(tmp_path, capsys):
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "solve", tmp_path / "missing.json")[0] == 3
    assert run(capsys, "sweep", "--n", "12", "--D", "2", "--dense-cap", "1024")[0] == 4
    bad = tmp_path / "bad.col"
    bad.write_text("p edge 2 1\ne 1 1\n")
    code, _, err = run(capsys, "reduce", bad, "-o", tmp_path / "x.json")
    assert code == 3 and "line 2" in err


def test_env_overrides(monkeypatch, capsys):
    monkeypatch.setenv("MPSHL_JSON", "1")
    monkeypatch.setenv("MPSHL_SEED", "5")
    code, out, _ = run(capsys, "sweep", "--n", "4", "--D", "2")
    assert code == 0 and json.loads(out)["seed"] == 5
    code, out, _ = run(capsys, "sweep", "--n", "4", "--D", "2", "--seed", "6")
    assert json.loads(out)["seed"] == 6
    monkeypatch.setenv("MPSHL_SEED", "five")
    assert run(capsys, "sweep", "--n", "4", "--D", "2")[0] == 2
