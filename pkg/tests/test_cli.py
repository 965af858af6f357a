import json
import math
import subprocess
import sys

import numpy as np
import pytest

from logdetgauss import io, suites
from logdetgauss.cli import main
from logdetgauss.instances import tmsv


def write(path, M, blocks=None, modes=None):
    io.save_matrix(path, io.MatrixFile(np.asarray(M, float), blocks, modes))
    return str(path)


def scalar(X):
    return [[1, X, 0.5], [X, 1, 0.5], [0.5, 0.5, 1.0]]


BLOCKS = (("A", 1), ("B", 1), ("C", 1))


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    return code, json.loads(out)


# -- io -----------------------------------------------------------------------

def test_dumps_deterministic_floats():
    text = io.dumps({"b": 0.1, "a": [1.0, 2, float("nan")], "c": {"x": True, "y": None}})
    assert text.index('"b"') < text.index('"a"')
    assert "0.10000000000000001" in text
    assert '"nan"' in text and "true" in text and "null" in text
    assert json.loads(text)["a"][:2] == [1.0, 2]


def test_dumps_floats_roundtrip_exactly():
    xs = np.random.default_rng(0).normal(size=50) * 10.0 ** np.arange(-25, 25)
    back = json.loads(io.dumps(list(xs)))
    assert back == list(xs)


def test_matrix_roundtrip(tmp_path):
    M = np.array(scalar(0.25))
    p = write(tmp_path / "m.json", M, BLOCKS)
    mf = io.load_matrix(p)
    assert np.array_equal(mf.matrix, M) and mf.blocks == BLOCKS


def test_parse_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(io.ParseError):
        io.load_matrix(bad)
    for doc in ({"dim": 2, "data": [1, 0, 0]},
                {"dim": 2, "data": [1, 0.5, 0.4, 1]},
                {"dim": 2, "data": [1, 0, 0, 1], "blocks": [{"label": "A", "size": 3}]},
                {"data": ["x"]},
                [1, 2]):
        with pytest.raises(io.ParseError):
            io.parse_matrix_document(doc)


def test_symmetrize_within_tolerance():
    mf = io.parse_matrix_document({"dim": 2, "data": [1, 0.5, 0.5 + 1e-12, 1]})
    assert mf.matrix[0, 1] == mf.matrix[1, 0]


def test_csv_and_label_sizes(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("2,1\n1,1\n")
    mf = io.load_matrix(p, csv=True, blocks=io.parse_label_sizes("A:1,B:1"))
    assert np.array_equal(mf.matrix, [[2, 1], [1, 1]])
    with pytest.raises(io.ParseError):
        io.parse_label_sizes("A2")
    with pytest.raises(io.ParseError):
        io.parse_csv("1,2,3")


# -- commands -----------------------------------------------------------------

def test_info_identity(tmp_path, capsys):
    p = write(tmp_path / "i.json", np.eye(3), BLOCKS)
    code, d = run_json(capsys, "info", p)
    assert code == 0
    assert d["CMI"] == 0 and d["I_M"] == 0 and d["M"] == 0


def test_info_saturated_and_x0(tmp_path, capsys):
    code, d = run_json(capsys, "info", write(tmp_path / "s.json", scalar(0.25), BLOCKS))
    assert code == 0 and abs(d["CMI"]) <= 1e-10
    code, d = run_json(capsys, "info", write(tmp_path / "x.json", scalar(0.0), BLOCKS))
    assert d["CMI"] == pytest.approx(0.5 * math.log(9 / 8))
    assert d["bound2"] == pytest.approx(0.03125)
    assert max(d["identity_residuals"].values()) <= 1e-12


def test_info_human_and_out(tmp_path, capsys):
    p = write(tmp_path / "s.json", scalar(0.25), BLOCKS)
    out = tmp_path / "o.json"
    code, text, _ = run(capsys, "info", p, "--out", out)
    assert code == 0 and "CMI" in text
    assert json.loads(out.read_text())["dim"] == 3


def test_info_two_blocks_and_csv(tmp_path, capsys):
    p = tmp_path / "m.csv"
    p.write_text("1,0.5\n0.5,1\n")
    code, d = run_json(capsys, "info", p, "--csv", "--sizes", "A:1,B:1")
    assert code == 0 and d["I_M"] == pytest.approx(-0.5 * math.log(0.75))


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("[")
    assert run(capsys, "info", bad)[0] == 2
    assert run(capsys, "info", tmp_path / "missing.json")[0] == 2
    npd = write(tmp_path / "n.json", np.diag([1.0, -1.0, 1.0]), BLOCKS)
    assert run(capsys, "info", npd)[0] == 3
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "info", write(tmp_path / "i.json", np.eye(3), BLOCKS), "--blocks", "A,B,Q")[0] == 2


def test_saturation_command(tmp_path, capsys):
    p = write(tmp_path / "s.json", scalar(0.25), BLOCKS)
    rec = tmp_path / "rec.json"
    code, text, _ = run(capsys, "saturation", p, "--emit-recovered", rec)
    assert code == 0 and text.count("PASS") == 5
    back = io.load_matrix(rec)
    assert np.allclose(back.matrix, scalar(0.25))
    code, text, _ = run(capsys, "saturation", write(tmp_path / "x.json", scalar(0.0), BLOCKS))
    assert text.count("FAIL") == 5
    code, d = run_json(capsys, "saturation", write(tmp_path / "x.json", scalar(0.0), BLOCKS))
    assert d["coherent"] and not d["saturated"]


def test_qcm_commands(tmp_path, capsys):
    vac = write(tmp_path / "v.json", np.eye(4), modes=(("A", 1), ("B", 1)))
    code, d = run_json(capsys, "qcm", vac, "validate")
    assert code == 0 and d["valid"] and d["pure"]
    code, d = run_json(capsys, "qcm", vac, "williamson")
    assert d["nu"] == [1.0, 1.0]
    sq = write(tmp_path / "s.json", np.diag([4.0, 1.0]), modes=(("A", 1),))
    code, d = run_json(capsys, "qcm", sq, "williamson")
    assert d["nu"] == pytest.approx([2.0])
    th = write(tmp_path / "t.json", np.diag([2.0, 2.0]), modes=(("A", 1),))
    out = tmp_path / "pur.json"
    code, d = run_json(capsys, "qcm", th, "purify", "--write", out)
    assert code == 0 and d["purity_residual"] <= 1e-12
    code, d = run_json(capsys, "qcm", out, "validate")
    assert d["pure"] and [m["n"] for m in d["modes"]] == [1, 1]
    code, d = run_json(capsys, "qcm", th, "gamma-sharp")
    assert d["dominated"]
    bad = write(tmp_path / "b.json", np.diag([0.5, 0.5]), modes=(("A", 1),))
    assert run_json(capsys, "qcm", bad, "validate")[0] == 1


def test_qcm_measure(tmp_path, capsys):
    q = tmsv(0.5)
    p = write(tmp_path / "q.json", q.matrix, modes=q.modes)
    seed = write(tmp_path / "sig.json", np.eye(2), modes=(("B", 1),))
    code, d = run_json(capsys, "qcm", p, "measure", "--seed-file", seed, "--measured", "B")
    assert code == 0 and d["post_valid"]
    assert run(capsys, "qcm", p, "measure")[0] == 2


def test_entangle_commands(tmp_path, capsys):
    q = tmsv(0.5)
    p = write(tmp_path / "q.json", q.matrix, modes=q.modes)
    cfg = tmp_path / "c.json"
    cfg.write_text('{"n_starts": 2}')
    code, d = run_json(capsys, "entangle", p, "eof", "--config", cfg)
    assert code == 0 and d["value"] == pytest.approx(math.log(math.cosh(1.0)), abs=1e-7)
    prod = write(tmp_path / "p.json", np.diag([2.0, 2.0, 1.5, 1.5]), modes=q.modes)
    code, d = run_json(capsys, "entangle", prod, "eof", "--config", cfg)
    assert d["value"] <= 1e-6
    noisy = write(tmp_path / "n.json", q.matrix + 0.2 * np.eye(4), modes=q.modes)
    code, d = run_json(capsys, "entangle", noisy, "squashed", "--config", cfg)
    assert code == 0 and d["gap"] <= 1e-3
    code, d = run_json(capsys, "entangle", noisy, "additivity", "--other", prod, "--config", cfg)
    assert code == 0 and d["pass"]
    cfg.write_text('{"unknown_key": 1}')
    assert run(capsys, "entangle", p, "eof", "--config", cfg)[0] == 2


def test_verify_small_and_deterministic(tmp_path, capsys):
    args = ("verify", "--suite", "classical", "--seed", 3, "--count", 5)
    code, out1, _ = run(capsys, *args)
    code2, out2, _ = run(capsys, *args)
    assert code == 0 and out1 == out2
    d = json.loads(out1)
    assert d["schema"] == io.REPORT_SCHEMA and d["passed"]
    assert "wall_time" not in d
    code, out, _ = run(capsys, *args, "--timing")
    assert "wall_time" in json.loads(out)


def test_verify_failure_writes_replay(tmp_path, capsys, monkeypatch):
    original = suites.classical_checks

    def failing(inst):
        checks = original(inst)
        return checks + [suites.Check("forced", -float(np.trace(inst["V"].matrix)))]

    monkeypatch.setattr(suites, "classical_checks", failing)
    rp = tmp_path / "fail.json"
    code, out, err = run(capsys, "verify", "--suite", "classical", "--seed", 1, "--count", 4,
                         "--replay-out", rp)
    assert code == 1 and "written" in err
    record = json.loads(rp.read_text())
    assert record["property"] == "forced"
    inst = suites.instance_matrices("classical", 1, record["index"])
    assert np.allclose(np.array(record["instance"]["V"]["data"]), inst["V"]["data"])
    code, out, _ = run(capsys, "verify", "--replay", rp)
    assert code == 1 and not json.loads(out)["checks"]["forced"]["pass"]
    monkeypatch.setattr(suites, "classical_checks", original)
    code, out, _ = run(capsys, "verify", "--replay", rp)
    assert code == 0


def test_module_entry_point(tmp_path):
    p = write(tmp_path / "i.json", np.eye(2), (("A", 1), ("B", 1)))
    res = subprocess.run([sys.executable, "-m", "logdetgauss", "info", p, "--json"],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["I_M"] == 0
