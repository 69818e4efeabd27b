import json
import subprocess
import sys

import numpy as np
import pytest

from cr3d.cli import main, parse_range
from cr3d.errors import InvalidParameter
from cr3d.reports import SCHEMA, dumps, envelope
from cr3d.verify import SUITES, run_suite


def test_dumps_format():
    text = dumps({"a": 0.1, "b": [1, 2.5], "c": np.float64(np.nan), "d": True, "e": np.arange(2)})
    data = json.loads(text)
    assert data == {"a": 0.1, "b": [1, 2.5], "c": None, "d": True, "e": [0, 1]}
    assert '"a": 0.10000000000000001' in text  # 17 significant digits
    assert envelope("x", {"y": 1})["schema"] == SCHEMA


def test_parse_range():
    assert parse_range("2..5") == [2, 3, 4, 5]
    assert parse_range("3") == [3]
    assert parse_range("1,4") == [1, 4]


@pytest.mark.parametrize("name", sorted(SUITES))
def test_every_suite_passes(name):
    checks = run_suite(name, range(1, 6), range(2, 5))
    failed = [c.name for c in checks if not c.passed]
    assert checks and not failed


def test_unknown_suite():
    with pytest.raises(InvalidParameter):
        run_suite("nope")


def _run(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_cli_mesh_and_infsup(tmp_path, capsys):
    path = tmp_path / "kuhn2.json"
    code, _, _ = _run(["mesh", "--gen", "kuhn", "--n", "2", "--out", str(path)], capsys)
    assert code == 0 and len(json.loads(path.read_text())["tets"]) == 48
    code, out, err = _run(["infsup", "--gen", "inner-critical-patch", "--k", "2", "--pair", "conforming"], capsys)
    rep = json.loads(out)
    assert code == 0 and err == ""
    assert rep["schema"] == SCHEMA and rep["result"]["spurious_modes"] >= 1


def test_cli_reports_are_deterministic(tmp_path, capsys):
    args = ["infsup", "--gen", "octahedron", "--k", "2"]
    _, a, _ = _run(args, capsys)
    _, b, _ = _run(args, capsys)
    assert a == b


def test_cli_critical_inner_patch(tmp_path, capsys):
    mesh = tmp_path / "inner.json"
    _run(["mesh", "--gen", "inner-critical-patch", "--out", str(mesh)], capsys)
    code, out, _ = _run(["critical", "--mesh", str(mesh), "--k", "3"], capsys)
    res = json.loads(out)["result"]
    inner = [c for c in res["certificates"] if c["edge"]["kind"] == "inner"]
    assert code == 0 and len(inner) == 2
    assert {c["apex"] for c in inner} == {0, 1}
    assert all(c["spurious"]["passed"] for c in inner)
    assert {c["elimination"]["status"] for c in inner} <= {"passed", "precondition_unmet"}


def test_cli_verify_and_csv(capsys):
    code, out, _ = _run(["verify", "--suite", "appendix-b", "--k", "2..8"], capsys)
    assert code == 0 and json.loads(out)["result"]["passed"]
    code, out, _ = _run(["nspace", "--gen", "reference", "--k", "2", "--format", "csv"], capsys)
    assert code == 0 and out.splitlines()[1].startswith("0,1,4,3")


@pytest.mark.parametrize("args", [
    ["infsup", "--gen", "kuhn", "--k", "9"],
    ["infsup", "--gen", "kuhn", "--k", "2", "--tol-rank", "0"],
    ["infsup", "--mesh", "/nonexistent.json", "--k", "2"],
    ["verify", "--suite", "nope"],
    ["mesh", "--gen", "outer-critical-patch", "--iota", "5"],
])
def test_cli_config_errors(args, capsys):
    code, out, err = _run(args, capsys)
    assert code == 2 and out == ""
    assert set(json.loads(err)) == {"error", "message"}


def test_cli_domain_error_exit_code(capsys):
    code, _, err = _run(["nspace", "--gen", "inner-critical-patch", "--k", "2", "--macro", "0,2"], capsys)
    assert code == 1 and json.loads(err)["error"] == "DisconnectedMacro"


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cr3d.cli", "mesh", "--gen", "reference"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and len(json.loads(proc.stdout)["tets"]) == 1
