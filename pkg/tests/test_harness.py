import json
import subprocess
import sys

import pytest

from nbfeb.feb_memory import FebMemory
from nbfeb.harness.baseline import CasBaselineObject, compare_contention
from nbfeb.harness.cli import main
from nbfeb.harness.workloads import RunConfig, UnknownWorkload, run


def test_contention_m256_depth8():
    report = compare_contention(256, 8)
    assert report.nbfeb["controller_requests"] < 256
    assert report.cas["controller_requests"] == 256
    assert report.nbfeb["max_contention_level"] < report.cas["max_contention_level"]
    assert report.controller_ratio > 1
    # one append wins in each scheme
    assert report.nbfeb_winners == 1 and report.cas_winners == 1


def test_contention_single_request():
    report = compare_contention(1, 8)
    assert report.nbfeb["controller_requests"] == report.cas["controller_requests"] == 1


def test_contention_without_a_tree():
    report = compare_contention(64, 0)
    assert report.nbfeb["controller_requests"] == report.cas["controller_requests"] == 64


def test_cas_baseline_only_first_of_two_racing_appends_succeeds():
    obj = CasBaselineObject(FebMemory(), 5)
    assert obj.value() == 5
    execute = obj.executor()
    first = obj.append_request("a", 6)
    second = obj.append_request("b", 7)
    assert execute(first).flag
    assert not execute(second).flag
    assert obj.current().id == first.operand
    # the new locator's owner has not committed, so the old value still shows
    assert obj.value() == 5


def test_counter_run_is_exact():
    rec = run(RunConfig(workload="counter", threads=3, ops=60, seed=2))
    assert rec["final"] == rec["committed"] == rec["commits"]
    assert rec["violations"] == 0
    assert set(rec) >= {
        "phase", "commits", "aborts", "controller_requests",
        "max_contention_level", "live_locators_max", "seed",
    }


@pytest.mark.parametrize("workload", ["invariant-pair", "list-shuffle", "find-head", "consensus"])
def test_workloads_report_no_violations(workload):
    rec = run(RunConfig(workload=workload, threads=4, ops=30, seed=1, cm="polite"))
    assert rec["violations"] == 0


def test_halted_thread_keeps_live_locators_bounded():
    # the halted thread had already linked its locator; once released it
    # publishes it, so whatever was linked after it must not have been freed
    rec = run(RunConfig(workload="counter", threads=4, ops=80, halt=3, audit=True, seed=5))
    assert rec["live_locators_max"] <= 16
    assert rec["violations"] == 0
    assert rec["residency_while_halted"] > rec["residency"]
    assert rec["residency"] <= 16 and rec["deferred"] == 0


def test_unknown_workload_is_refused():
    with pytest.raises(UnknownWorkload):
        run(RunConfig(workload="nope"))


def test_run_output_is_byte_identical_for_a_seed(tmp_path):
    paths = [tmp_path / "a.jsonl", tmp_path / "b.jsonl"]
    for p in paths:
        run(RunConfig(workload="counter", threads=4, ops=50, seed=11, out=str(p)))
    assert paths[0].read_bytes() == paths[1].read_bytes()
    other = tmp_path / "c.jsonl"
    run(RunConfig(workload="counter", threads=4, ops=50, seed=12, out=str(other)))
    assert other.read_bytes() != paths[0].read_bytes()


# -- command line ------------------------------------------------------------------


def lines(capsys):
    return [json.loads(l) for l in capsys.readouterr().out.splitlines()]


def test_cli_run(capsys):
    assert main(["run", "--workload", "counter", "--threads", "2", "--ops", "20", "--seed", "3"]) == 0
    (rec,) = lines(capsys)
    assert rec["phase"] == "counter" and rec["seed"] == 3


def test_cli_unknown_workload_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--workload", "nope", "--threads", "2", "--ops", "1"])
    assert exc.value.code == 2
    assert "invalid choice" in capsys.readouterr().err


def test_cli_contend(capsys):
    assert main(["contend", "--m", "256", "--depth", "8"]) == 0
    (rec,) = lines(capsys)
    assert rec["nbfeb"]["controller_requests"] < rec["cas"]["controller_requests"] == 256


def test_cli_check(tmp_path, capsys):
    good = tmp_path / "good.txt"
    good.write_text("0 inv tfas w 1\n0 ret bot 0\n")
    assert main(["check", "--history", str(good), "--brute"]) == 0
    assert lines(capsys)[0] == {"phase": "check", "linearizable": True, "witness": [0], "brute_force": True}
    bad = tmp_path / "bad.txt"
    bad.write_text("0 inv load w\n0 ret 5 1\n")
    assert main(["check", "--history", str(bad)]) == 1
    broken = tmp_path / "broken.txt"
    broken.write_text("0 ret 5 1\n")
    assert main(["check", "--history", str(broken)]) == 2


def test_cli_explore(tmp_path, capsys):
    path = tmp_path / "s.txt"
    path.write_text("object x 0\n0 inc x 1\n1 read x\n")
    assert main(["explore", "--script", str(path), "--bound", "2"]) == 0
    rec = lines(capsys)[0]
    assert rec["counterexamples"] == 0 and rec["schedules"] > 1
    path.write_text("object x 0\n" + "0 read x\n" * 9)
    assert main(["explore", "--script", str(path)]) == 2


def test_module_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "nbfeb", "contend", "--m", "4", "--depth", "2"],
        capture_output=True,
        text=True,
        check=True,
    )
    assert json.loads(out.stdout)["m"] == 4
