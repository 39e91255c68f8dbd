import json
import subprocess
import sys

import pytest

from gallinac.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_reverse_golden(fixtures, capsys):
    code, out, _ = run(capsys, "run", str(fixtures / "reverse.gac"))
    assert code == 0
    assert out == (fixtures / "reverse.out").read_text()


@pytest.mark.parametrize("name, code, prefix", [
    ("deref_next.gac", 0, "done 9"),
    ("loop.gac", 2, "bottom (fuel 1000)"),
    ("oob.gac", 1, "failed "),
    ("uaf.gac", 1, "failed use after free"),
])
def test_run_exit_codes(fixtures, capsys, name, code, prefix):
    got, out, _ = run(capsys, "run", str(fixtures / name))
    assert got == code and out.startswith(prefix)


def test_fuel_flag(fixtures, capsys):
    code, out, _ = run(capsys, "run", str(fixtures / "reverse.gac"), "--fuel", "3")
    assert (code, out) == (2, "bottom (fuel 3)\n")


@pytest.mark.parametrize("name", ["malformed.gac", "unbound.gac", "missing.gac"])
def test_bad_input_exits_3(fixtures, capsys, name):
    code, out, err = run(capsys, "run", str(fixtures / name))
    assert code == 3 and out == "" and err


def test_trace_goes_to_stderr(fixtures, capsys):
    code, out, err = run(capsys, "run", str(fixtures / "deref_next.gac"), "--trace")
    assert code == 0 and out == "done 9\n"
    lines = err.splitlines()
    assert lines[0] == "CBind 0" and lines[-1] == "value 9 0"


def test_compile_dumps(fixtures, capsys):
    code, out, _ = run(capsys, "compile", str(fixtures / "deref_next.gac"), "--emit", "ir")
    assert code == 0 and out == (fixtures / "deref_next.ir").read_text()
    code, out, _ = run(capsys, "compile", str(fixtures / "nolocals.gac"), "--emit", "cminor")
    assert code == 0 and "stack_size 0" in out.splitlines()[1]


@pytest.mark.parametrize("argv", [
    ["compile", "x.gac", "--emit", "asm"],
    ["frobnicate"],
    ["run"],
    ["run", "x.gac", "--bogus"],
    [],
])
def test_usage_errors_exit_64(argv, capsys):
    with pytest.raises(SystemExit) as e:
        main(argv)
    assert e.value.code == 64


def test_check_triple_specs(fixtures, capsys, tmp_path):
    code, out, _ = run(capsys, "check-triple", str(fixtures / "mutation.spec"), "--samples", "10")
    assert code == 0 and out.startswith("triple 1: ok")
    js = tmp_path / "r.json"
    code, out, _ = run(capsys, "check-triple", str(fixtures / "reversal.spec"), "--json", str(js))
    assert code == 0 and out.count(": ok") == 5
    report = json.loads(js.read_text())
    assert [t["states_checked"] for t in report["triples"]] == [50] * 5


def test_wrong_postcondition_exits_1(fixtures, capsys):
    code, out, _ = run(capsys, "check-triple", str(fixtures / "wrong_post.spec"), "--samples", "5")
    assert code == 1
    assert "COUNTEREXAMPLE" in out and "from env[" in out and "... 2 more" in out


def test_check_triple_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.spec"
    bad.write_text("(triple (pre emp))")
    code, _, err = run(capsys, "check-triple", str(bad))
    assert code == 3 and "triple is missing" in err


def test_check_triple_is_byte_stable(fixtures, capsys):
    a = run(capsys, "check-triple", str(fixtures / "wrong_post.spec"), "--seed", "4")
    b = run(capsys, "check-triple", str(fixtures / "wrong_post.spec"), "--seed", "4")
    assert a == b


def test_validate_small(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("GALLINAC_SEED", "11")
    js = tmp_path / "v.json"
    code, out, _ = run(capsys, "validate", "--count", "15", "--json", str(js))
    assert code == 0
    assert out.startswith("cases 15 seed 11:")
    report = json.loads(js.read_text())
    assert report["seed"] == 11 and len(report["cases"]) == 15


def test_roundtrip(fixtures, capsys):
    code, out, _ = run(capsys, "roundtrip", str(fixtures / "reverse.gac"))
    assert code == 0
    assert out.strip() == (fixtures / "reverse.gac").read_text().splitlines()[-1]


def test_module_entry_point(fixtures):
    r = subprocess.run([sys.executable, "-m", "gallinac", "run", str(fixtures / "oob.gac")],
                       capture_output=True, text=True)
    assert r.returncode == 1 and r.stdout.startswith("failed")
