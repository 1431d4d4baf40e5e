import io
import json
import subprocess
import sys

import pytest

from tempinv.cli import main

from conftest import fixture_path

FT = fixture_path("floortile.pddl")
FT_MINI = fixture_path("floortile_mini.pddl")
FT_MUT = fixture_path("floortile_mutated.pddl")
DP = fixture_path("depot.pddl")
DP_MINI = fixture_path("depot_mini.pddl")


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_invariants_tis_text():
    code, out = run("invariants", "--mode", "tis", FT)
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == "tempinv-format 1"
    assert len(lines[1:]) == 5
    assert sum(l.endswith(" [fix]") for l in lines) == 2


def test_invariants_sis_text():
    code, out = run("invariants", "--mode", "sis", FT)
    assert code == 0 and out.splitlines() == ["tempinv-format 1"]


def test_invariants_json():
    code, out = run("invariants", "--format", "json", DP)
    doc = json.loads(out)
    assert doc["tempinv-format"] == 1
    assert {"template": "{available 0, lifting 0 [1]}", "proof": "ByCorStarSafety",
            "via_fix": True} in doc["accepted"]
    assert "timing" not in doc
    _, timed = run("invariants", "--format", "json", "--timing", DP)
    assert "timing" in json.loads(timed)


def test_idempotent_and_job_independent():
    outs = {run("invariants", "--format", "json", FT)[1] for _ in range(2)}
    outs.add(run("invariants", "--format", "json", "--jobs", "3", FT)[1])
    assert len(outs) == 1


def test_canon_round_trip(tmp_path):
    _, text = run("canon", FT)
    assert text.startswith("; tempinv-format 1")
    path = tmp_path / "canon.pddl"
    path.write_text(text)
    assert run("invariants", str(path))[1] == run("invariants", FT)[1]
    assert run("canon", str(path))[1] == text


def test_verify_holds():
    code, out = run("verify", "--template", "{robot-at 0 [1]}", FT, FT_MINI)
    assert code == 0 and out == "Holds (depth 8)\n"


def test_verify_violated():
    code, out = run("verify", "--template", "{painted 0 [1], clear 0}", FT_MUT, FT_MINI)
    lines = out.splitlines()
    assert code == 2
    assert lines[0].startswith("Violated at (tile2)")
    assert lines[1:] == ["start paint-up(rbt1,tile2,tile1,black)",
                         "end paint-up(rbt1,tile2,tile1,black)"]


def test_verify_bad_template(capsys):
    code, _ = run("verify", "--template", "{nosuch 0}", FT, FT_MINI)
    assert code == 1
    assert "unknown relation" in capsys.readouterr().err


def test_statevars():
    code, out = run("statevars", "--mode", "bis", FT, FT_MINI)
    assert code == 0
    assert out.splitlines()[1] == "# variables 10 mean-domain-size 2"
    code, out = run("statevars", "--mode", "tis", "--format", "json", DP, DP_MINI)
    doc = json.loads(out)
    assert doc["stats"]["variable_count"] == 22


def test_debug(tmp_path):
    expect = tmp_path / "expected.txt"
    expect.write_text("tempinv-format 1\n{robot-at 0 [1]}\n{clear 0, painted 0 [1]}  # wrong\n")
    code, out = run("debug", "--expect", str(expect), FT)
    assert code == 0
    assert "- {clear 0, painted 0 [1]}" in out
    assert "    up-end: {clear(x)} is relevant unbounded" in out
    assert "+ {clear 0, painted 0 [1], robot-at 1 [0]}" in out
    assert "{robot-at 0 [1]}" not in out


def test_diagnostics(tmp_path, capsys):
    bad = tmp_path / "bad.pddl"
    bad.write_text("(define (domain x)\n (:predicates (p ?a))\n"
                   " (:action a :parameters (?x) :precondition (q ?x) :effect (p ?x)))")
    code, _ = run("invariants", str(bad))
    assert code == 1
    assert capsys.readouterr().err.strip() == f"{bad}:3:44: undeclared predicate 'q'"
    code, _ = run("canon", str(tmp_path / "missing.pddl"))
    assert code == 1


def test_illegal_durative_diagnostic(tmp_path, capsys):
    bad = tmp_path / "ill.pddl"
    bad.write_text("(define (domain d) (:predicates (p ?x))\n"
                   " (:durative-action a :parameters (?x) :duration (= ?duration 1)\n"
                   "  :condition (over all (p ?x)) :effect (at start (not (p ?x)))))")
    assert run("canon", str(bad))[0] == 1
    err = capsys.readouterr().err
    assert err.startswith(f"{bad}:2:") and "condition 2" in err


def test_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["invariants", "--bogus", FT])
    assert e.value.code == 2


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "tempinv.cli", "invariants", FT],
                       capture_output=True, text=True, check=True)
    assert r.stdout.splitlines()[0] == "tempinv-format 1"
