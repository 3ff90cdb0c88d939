import csv
import json

import pytest

from berezinlab import cli


def _run(tmp_path, argv, scenario=None):
    args = list(argv)
    if scenario is not None:
        p = tmp_path / "sc.json"
        p.write_text(json.dumps(scenario))
        args += ["--scenario", str(p)]
    out = tmp_path / "out.json"
    code = cli.main(args + ["--out", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None), out


def test_euler_report_and_csv(tmp_path):
    code, rep, out = _run(tmp_path, ["euler", "--radius", "12"])
    assert code == 0 and rep["status"] == "pass"
    rows = list(csv.reader(out.with_suffix(".csv").open(newline="")))
    assert len(rows) > 1
    assert out.with_suffix(".csv").read_bytes().count(b"\r\n") == len(rows)


def test_deterministic_output(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    _run(a, ["trace"])
    _run(b, ["trace"])
    assert (a / "out.json").read_bytes() == (b / "out.json").read_bytes()


def test_schema_violation_exits_2(tmp_path, capsys):
    code, rep, _ = _run(tmp_path, [], {"subcommand": "star", "bogus": 1})
    assert code == 2 and rep is None
    assert "scenario rejected" in capsys.readouterr().err


def test_subcommand_conflict_exits_2(tmp_path):
    code, _, _ = _run(tmp_path, ["trace"], {"subcommand": "star"})
    assert code == 2


def test_failing_tolerance_exits_1(tmp_path):
    sc = {
        "subcommand": "star",
        "level": 3,
        "k": {"type": "RandomMatrix", "N": 4, "seed": 1},
        "l": {"type": "RandomMatrix", "N": 4, "seed": 2},
        "tolerances": {"star": 1e-30},
    }
    code, rep, _ = _run(tmp_path, [], sc)
    assert code == 1 and rep["status"] == "fail"


def test_iqa(tmp_path):
    code, rep, _ = _run(tmp_path, ["iqa", "--t", "4"])
    assert code == 0
    assert "conventions" in json.dumps(rep).lower()


def test_version(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--version"])
    assert capsys.readouterr().out.strip()
