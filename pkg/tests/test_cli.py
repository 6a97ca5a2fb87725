import csv
import math

import pytest

from hhobiharmonic.cli import main, read_config
from hhobiharmonic.mesh import read_mesh
from hhobiharmonic.studies import COLUMNS


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.strip()


def test_normalder_csv(tmp_path, capsys):
    out = tmp_path / "nd.csv"
    assert main(["normalder-conv", "--n", "4", "8", "--k", "0", "1", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert list(rows[0]) == COLUMNS
    assert [(r["n"], r["k"]) for r in rows] == [("4", "0"), ("8", "0"), ("4", "1"), ("8", "1")]
    assert rows[0]["order_psi"] == ""
    for a, b in [(rows[0], rows[1]), (rows[2], rows[3])]:
        expect = math.log(float(a["err_psi"]) / float(b["err_psi"])) / math.log(
            float(a["h"]) / float(b["h"]))
        assert float(b["order_psi"]) == pytest.approx(expect, abs=1e-5)
    assert "err_psi" in capsys.readouterr().out


def test_biharm_conv_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["biharm-conv", "--n", "4", "8", "--k", "0", "--l", "k+1", "--error", "projection"]
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    ra, rb = read_rows(a), read_rows(b)
    for x, y in zip(ra, rb):
        for key in ("h", "n", "k", "err_psi", "err_omega", "order_psi", "order_omega", "iters"):
            assert x[key] == y[key]
    assert ra[1]["order_omega"] != ""


def test_biharm_solve_outputs(tmp_path, capsys):
    hist, out = tmp_path / "hist.txt", tmp_path / "solve.csv"
    assert main(["biharm-solve", "--n", "8", "--k", "1", "--alpha", "2", "--history", str(hist),
                 "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "FCG iterations" in text and "preconditioner alpha=2" in text
    residuals = [float(v) for v in hist.read_text().split()]
    assert residuals[0] == pytest.approx(1.0) and residuals[-1] < 1e-8
    row = read_rows(out)[0]
    assert row["alpha"] == "2" and int(row["iters"]) == len(residuals) - 1


def test_precond_bench(tmp_path):
    out = tmp_path / "pc.csv"
    assert main(["precond-bench", "--n", "16", "--k", "0", "--alpha", "0", "8",
                 "--out", str(out)]) == 0
    rows = read_rows(out)
    assert [r["alpha"] for r in rows] == ["0", "8"]
    assert int(rows[1]["iters"]) < int(rows[0]["iters"])


def test_mesh_roundtrip(tmp_path, capsys):
    path = tmp_path / "tri.mesh"
    assert main(["mesh-gen", "--mesh", "tri", "--n", "3", "--out", str(path)]) == 0
    assert read_mesh(path).n_cells == 18
    capsys.readouterr()
    assert main(["mesh-info", "--mesh", f"file:{path}"]) == 0
    text = capsys.readouterr().out
    assert "{3: 18}" in text and "total measure 1" in text


def test_file_mesh_study(tmp_path):
    path = tmp_path / "q.mesh"
    main(["mesh-gen", "--n", "4", "--out", str(path)])
    out = tmp_path / "f.csv"
    assert main(["normalder-conv", "--mesh", f"file:{path}", "--n", "4", "--k", "0",
                 "--out", str(out)]) == 0
    ref = tmp_path / "r.csv"
    main(["normalder-conv", "--n", "4", "--k", "0", "--out", str(ref)])
    assert read_rows(out)[0]["err_psi"] == read_rows(ref)[0]["err_psi"]


def test_config_file(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# study settings\nn = 4 8\nk = 1\nout = " + str(tmp_path / "c.csv") + "\n")
    assert main(["--config", str(conf), "normalder-conv"]) == 0
    rows = read_rows(tmp_path / "c.csv")
    assert [(r["n"], r["k"]) for r in rows] == [("4", "1"), ("8", "1")]


def test_command_line_overrides_config(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("n = 4 8\nk = 1\n")
    out = tmp_path / "o.csv"
    assert main(["--config", str(conf), "normalder-conv", "--k", "0", "--out", str(out)]) == 0
    assert {r["k"] for r in read_rows(out)} == {"0"}


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.conf"
    bad.write_text("n 4\n")
    with pytest.raises(SystemExit):
        read_config(bad)
    unknown = tmp_path / "unknown.conf"
    unknown.write_text("colour = blue\n")
    with pytest.raises(SystemExit):
        main(["--config", str(unknown), "mesh-info"])


def test_runtime_error_returns_one(tmp_path, capsys):
    missing = tmp_path / "nope.mesh"
    assert main(["mesh-info", "--mesh", f"file:{missing}"]) == 1
    assert "error:" in capsys.readouterr().err
    assert main(["biharm-solve", "--n", "4", "--k", "0", "--l", "k+1", "--stab", "simple",
                 "--eps", "-1"]) == 1


def test_bad_choice_exits():
    with pytest.raises(SystemExit):
        main(["biharm-conv", "--case", "nonexistent"])
