import json
from pathlib import Path

import pytest

from robustlp.cli import main
from robustlp.flow import parse_flow_solution

DATA = Path(__file__).resolve().parents[1] / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_mincost_diamond(capsys, tmp_path):
    sol = tmp_path / "d.sol"
    code, out, _ = run(capsys, "mincost", DATA / "diamond.min", "--oracle-check", "--out", sol)
    assert code == 0 and out.splitlines()[0] == "s 5"
    assert "match" in out
    value, flows = parse_flow_solution(sol.read_text())
    assert value == 5 and flows.sum() == 4


def test_mincost_infeasible(capsys):
    code, out, err = run(capsys, "mincost", DATA / "infeasible.min")
    assert code == 2 and "infeasible" in err


def test_mincost_malformed(capsys, tmp_path):
    bad = tmp_path / "bad.min"
    bad.write_text("p min 2 1\na 1 2 0 1\n")
    code, _, err = run(capsys, "mincost", bad)
    assert code == 1 and "line 2" in err and "a 1 2 0 1" in err


def test_maxflow_parallel(capsys):
    code, out, _ = run(capsys, "maxflow", DATA / "parallel.max", "--oracle-check")
    assert code == 0 and out.splitlines()[0] == "s 5"


def test_l1_median(capsys, tmp_path):
    sol = tmp_path / "z.json"
    code, out, _ = run(capsys, "l1", DATA / "median.json", "--out", sol)
    assert code == 0
    z = json.loads(sol.read_text())["z"]
    assert abs(z[0] - 2) < 1e-5


def test_mdp_one_state(capsys):
    code, out, _ = run(capsys, "mdp", DATA / "onestate.json", "--delta", "1e-3")
    assert code == 0 and out.splitlines()[0] == "policy 1"
    assert abs(float(out.splitlines()[1].split()[2]) - 10) < 1e-9


def test_lp_box_with_trace(capsys, tmp_path):
    trace = tmp_path / "t.jsonl"
    code, out, _ = run(capsys, "lp", DATA / "box.mtx", DATA / "box.json", "--delta", "1e-5",
                       "--trace", trace, "--check-invariants")
    assert code == 0 and "invariants" in out and "ok" in out
    rec = json.loads(trace.read_text().splitlines()[0])
    assert list(rec) == ["t", "mu", "psi", "yinf", "feas"]


def test_deterministic_output(capsys):
    a = run(capsys, "l1", DATA / "median.json", "--seed", "3")[1]
    b = run(capsys, "l1", DATA / "median.json", "--seed", "3")[1]
    assert a == b


def test_bad_config(capsys):
    code, _, err = run(capsys, "l1", DATA / "median.json", "--delta", "0")
    assert code == 1 and "delta" in err
    with pytest.raises(SystemExit):
        main(["nosuch"])
