import json
import math
import subprocess
import sys

import pytest

from ncsr import cli

DW = """epsilon = 0.45
y_max = 8.0
R = 0.5
[[piece]]
breakpoint = -1.0
coeffs = [1.0, 0.0, -2.0, 0.0, 1.0]
"""
Z2 = """epsilon = 0.5
n_max = 10
R = 1.0
words = 20
[[piece]]
coeffs = [0.0, 0.0, 1.0]
"""


@pytest.fixture
def cfgs(tmp_path):
    (tmp_path / "dw.toml").write_text(DW)
    (tmp_path / "z2.toml").write_text(Z2)
    (tmp_path / "bad.toml").write_text("epsilon = = 0.5\n")
    return tmp_path


def run(*args):
    return cli.main([str(a) for a in args])


def test_intervals(cfgs, capsys):
    out = cfgs / "o"
    assert run("intervals", "--config", cfgs / "dw.toml", "--out", out) == 0
    rep = json.loads((out / "intervals.json").read_text())
    assert len(rep["topology_intervals"]) == 3
    assert rep["epsilon0"]["merge"] == pytest.approx(math.sqrt(2))
    assert (out / "intervals.csv").read_text().startswith("epsilon,s,t,dim")
    assert run("intervals", "--config", cfgs / "z2.toml", "--out", out) == 0
    assert len(json.loads((out / "intervals.json").read_text())["topology_intervals"]) == 1


def test_malformed_config(cfgs, capsys):
    assert run("intervals", "--config", cfgs / "bad.toml") == 2
    assert "line 1" in capsys.readouterr().err


def test_bad_epsilon_and_mode(cfgs, capsys):
    assert run("lattice", "--config", cfgs / "dw.toml", "--epsilon", "-1") == 2
    assert run("lattice", "--config", cfgs / "dw.toml", "--compromise", "merge", "--mode", "under") == 2


def test_verify_z2_all_pass(cfgs, capsys):
    out = cfgs / "o"
    assert run("verify", "--config", cfgs / "z2.toml", "--out", out) == 0
    rep = json.loads((out / "verify.json").read_text())
    assert rep["results"] and all(r["status"] == "pass" for r in rep["results"])


def test_verify_merge_expected_fail(cfgs, capsys):
    out = cfgs / "o"
    assert run("verify", "--config", cfgs / "dw.toml", "--compromise", "merge", "--out", out) == 0
    rep = json.loads((out / "verify.json").read_text())
    status = {r["status"] for r in rep["results"]}
    assert "expected-fail" in status and "fail" not in status


def test_lattice_and_archive_integrity(cfgs, capsys):
    out = cfgs / "o"
    assert run("lattice", "--config", cfgs / "z2.toml", "--out", out) == 0
    svg = (out / "lattice.svg").read_text()
    assert svg.count('class="cross basis"') == 55
    assert (out / "lattice.dot").read_text().startswith("digraph")
    arc = out / "lattice.json"
    assert run("verify", "--config", cfgs / "z2.toml", "--out", out, "--archive", arc) == 0
    data = json.loads(arc.read_text())
    data["epsilon"] = 0.25
    arc.write_text(json.dumps(data))
    assert run("verify", "--config", cfgs / "z2.toml", "--out", out, "--archive", arc) == 2
    assert "integrity" in capsys.readouterr().err


def test_lattice_add_marks_added(cfgs, capsys):
    out = cfgs / "o"
    assert run("lattice", "--config", cfgs / "dw.toml", "--epsilon", "0.5", "--compromise", "add", "--out", out) == 0
    assert 'class="cross added" data-label="2,2"' in (out / "lattice.svg").read_text()


def test_reports_are_deterministic(cfgs, capsys):
    a, b = cfgs / "a", cfgs / "b"
    for o in (a, b):
        assert run("verify", "--config", cfgs / "dw.toml", "--compromise", "remove", "--out", o, "--seed", 3) == 0
    assert (a / "verify.json").read_bytes() == (b / "verify.json").read_bytes()


def test_topology_ops(cfgs, capsys):
    out = cfgs / "o"
    assert run("topology-ops", "--config", cfgs / "dw.toml", "--epsilon", "0.4", "--out", out) == 0
    rep = json.loads((out / "topology-ops.json").read_text())
    assert any("V_7" in r["name"] for r in rep["results"])


def test_render(cfgs, capsys):
    out = cfgs / "o"
    assert run("render", "--config", cfgs / "z2.toml", "--out", out) == 0
    assert (out / "surface.csv").read_text().splitlines()[0] == "x1,x2,x3,component"


def test_calculus_empty_suites(cfgs, caplog):
    (cfgs / "none.toml").write_text(Z2 + "")
    text = Z2.replace("words = 20", "words = 20\nsuites = []")
    (cfgs / "none.toml").write_text(text)
    assert run("calculus", "--config", cfgs / "none.toml", "--out", cfgs / "o") == 0
    assert "nothing to do" in caplog.text


def test_calculus_sphere(cfgs, capsys):
    text = Z2.replace("words = 20", 'words = 20\nsuites = ["sphere", "inner"]')
    (cfgs / "s.toml").write_text(text)
    assert run("calculus", "--config", cfgs / "s.toml", "--out", cfgs / "o") == 0
    rep = json.loads((cfgs / "o" / "calculus.json").read_text())
    assert all(r["status"] == "pass" for r in rep["results"])


def test_console_script(cfgs):
    p = subprocess.run([sys.executable, "-m", "ncsr.cli", "intervals", "--config", str(cfgs / "z2.toml"), "--out", str(cfgs / "o")], capture_output=True, text=True)
    assert p.returncode == 0
