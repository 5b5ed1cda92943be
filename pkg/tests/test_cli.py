import json
import subprocess
import sys

from barrierlogic.cli import EXIT_FAIL, EXIT_LIMIT, EXIT_OK, EXIT_USAGE, main

from conftest import CORPUS


def path(name):
    return str(CORPUS / name)


def test_verify_strong(capsys):
    assert main(["verify", path("barrier-strong.ss")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "th1: VERIFIED" in out and "FAILED" not in out


def test_verify_json_has_no_timing_by_default(capsys):
    assert main(["verify", path("barrier-weak.ss"), "--json", "--proc", "th1"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    (row,) = data["procedures"]
    assert row["name"] == "th1" and row["verified"] and "seconds" not in row


def test_verify_mutant(capsys):
    assert main(["verify", path("half-share-write.ss")]) == EXIT_FAIL
    assert main(["verify", path("half-share-write.ss"), "--expect", "fail"]) == EXIT_OK


def test_broken_barrier_names_the_check(capsys):
    assert main(["barrier", path("broken-frame.bar")]) == EXIT_FAIL
    assert "FAILED g" in capsys.readouterr().out
    assert main(["barrier", path("broken-frame.bar"), "--expect", "fail"]) == EXIT_OK


def test_barrier_json(capsys):
    assert main(["barrier", path("appendix.bar"), "--json"]) == EXIT_OK
    (b,) = json.loads(capsys.readouterr().out)["barriers"]
    assert b["ok"] and b["failed"] == [] and b["entailments"] > 0


def test_sleek_suite(capsys):
    assert main(["sleek", path("fractions.slk")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "0 unexpected" in out


def test_sleek_expect_flag_applies_only_without_inline(tmp_path, capsys):
    f = tmp_path / "t.slk"
    f.write_text("data cl { int val; }\ncheckentail x::cl<1> |- x::cl<2>.\n")
    assert main(["sleek", str(f)]) == EXIT_OK
    assert main(["sleek", str(f), "--expect", "pass"]) == EXIT_FAIL
    assert main(["sleek", str(f), "--expect", "fail"]) == EXIT_OK


def test_run_and_erasure(capsys):
    assert main(["run", path("barrier-strong.ss"), "-q"]) == EXIT_OK
    assert "outcome: Done" in capsys.readouterr().out
    assert main(["run", path("half-share-write.ss"), "-q"]) == EXIT_FAIL
    assert main(["run", path("barrier-strong.ss"), "-q", "--cap", "10"]) == EXIT_LIMIT
    assert main(["erasure-check", path("barrier-strong.ss"), "--sched", "rand",
                 "--runs", "3"]) == EXIT_OK
    assert capsys.readouterr().out.count("erasure commutes") == 3


def test_run_trace_json(capsys):
    assert main(["run", path("barrier-strong.ss"), "--trace-json", "--sched", "rand",
                 "--seed", "4"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["outcome"] == "Done"
    assert {"Seq", "Suspend", "Release", "Exit"} <= {s["rule"] for s in data["steps"]}


def test_usage_errors(tmp_path, capsys):
    assert main(["sleek", "--help"]) == EXIT_OK
    assert main([]) == EXIT_USAGE
    assert main(["sleek", str(tmp_path / "missing.slk")]) == EXIT_USAGE
    bad = tmp_path / "bad.slk"
    bad.write_text("checkentail x::cl@[L,LL]<1> |- emp.")
    assert main(["sleek", str(bad)]) == EXIT_USAGE
    assert "overlapping" in capsys.readouterr().err


def test_ill_formed_predicate_rejected(tmp_path, capsys):
    f = tmp_path / "p.slk"
    f.write_text("data node { int val; node next; }\n"
                 "pred ll<n> == self = null & n = 0 or self::node<_, q> * q::ll<n - 1> "
                 "inv n >= 1.\n")
    assert main(["sleek", str(f)]) == EXIT_USAGE
    assert "ill-formed" in capsys.readouterr().err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "barrierlogic", "sleek", "--help"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "usage" in r.stdout
