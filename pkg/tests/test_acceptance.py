"""End-to-end acceptance checks, one test per criterion, at full size."""

import itertools
import random
import time

import pytest

from nbfeb.combining import MemReply, MemRequest, combine, resolve
from nbfeb.feb_memory import BOTTOM, FebMemory, Kind
from nbfeb.harness.baseline import compare_contention
from nbfeb.harness.explore import explore, parse_script
from nbfeb.harness.history import brute_force_linearizable, check_linearizable, random_history
from nbfeb.harness.scheduler import VirtualScheduler
from nbfeb.harness.workloads import RunConfig, run
from nbfeb.stm import COMMITTED, Stm

from oracles import serial_pair

pytestmark = pytest.mark.slow

OPS = ["load", "sac", "sas", "tfas"]
VALUES = [BOTTOM, 0, 1, 2]


def test_combining_table_matches_serial_order(criterion):
    started = time.perf_counter()
    mismatches = cases = 0
    for op1, op2 in itertools.product(OPS, repeat=2):
        for v1, v2, value in itertools.product(VALUES, repeat=3):
            for flag in (False, True):
                a1 = None if op1 == "load" else v1
                a2 = None if op2 == "load" else v2
                plan = combine(MemRequest(Kind(op1), 1, a1, "a"), MemRequest(Kind(op2), 1, a2, "b"))
                mem = FebMemory()
                w = mem.alloc(value, flag)
                reply = mem.execute(plan.combined.kind, w, plan.combined.operand)
                first, second = resolve(plan, MemReply(*reply))
                got = first.astuple(), second.astuple(), mem.peek(w)
                mismatches += got != serial_pair(op1, a1, op2, a2, value, flag)
                cases += 1
    elapsed = time.perf_counter() - started
    ok = mismatches == 0 and cases == 2048 and elapsed < 5
    criterion(1, ok, f"{cases} cases, {mismatches} mismatches, {elapsed:.2f}s (< 5s)")
    assert ok


def test_consensus_agreement_and_single_step(criterion):
    started = time.perf_counter()
    rec = run(RunConfig(workload="consensus", threads=32, ops=10_000, seed=2024))
    elapsed = time.perf_counter() - started
    ok = rec["violations"] == 0 and rec["proposals_not_single_step"] == 0 and elapsed < 30
    criterion(
        2,
        ok,
        f"{rec['trials']} trials x 32 proposers, {rec['violations']} violations, "
        f"{rec['proposals_not_single_step']} multi-step proposals, {elapsed:.1f}s (< 30s)",
    )
    assert ok


def test_counter_is_exact_for_every_policy(criterion):
    started = time.perf_counter()
    bad = []
    commits = 0
    for threads, cm in itertools.product((2, 4, 8), ("aggressive", "polite", "timid")):
        rec = run(RunConfig(workload="counter", threads=threads, ops=1000, cm=cm, strict=True, seed=threads))
        commits += rec["committed"]
        if rec["final"] != rec["committed"]:
            bad.append((threads, cm, rec["final"], rec["committed"]))
    elapsed = time.perf_counter() - started
    ok = not bad and elapsed < 60
    criterion(3, ok, f"9 runs, {commits} commits, mismatches {bad}, {elapsed:.1f}s (< 60s)")
    assert ok


def test_invariant_pair_snapshots_are_consistent(criterion):
    started = time.perf_counter()
    # one writer and three readers, each reader taking a third of the snapshots
    rec = run(RunConfig(workload="invariant-pair", threads=4, ops=33_334, seed=7))
    elapsed = time.perf_counter() - started
    ok = rec["snapshots"] >= 100_000 and rec["violations"] == 0 and rec["final_sum"] == 100 and elapsed < 60
    criterion(
        4, ok, f"{rec['snapshots']} snapshots, {rec['violations']} inconsistent, {elapsed:.1f}s (< 60s)"
    )
    assert ok


def _real_time_trial(seed: int) -> bool:
    """T1 commits x, then T2 starts; a third thread keeps writing y and reading x."""
    mem = FebMemory()
    sched = VirtualScheduler(mem, seed=seed, stickiness=0.5)
    stm = Stm(3, memory=mem)
    stm.pause = sched.pause
    x = stm.create_object(0, "x")
    y = stm.create_object(0, "y")
    expected = seed + 1
    committed = [False]
    observed = []

    def first():
        while True:
            tx = stm.start(0)
            data = stm.open_write(tx, x)
            if data is not None:
                data.value = expected
            if stm.commit(tx) == COMMITTED:
                committed[0] = True
                return

    def second():
        while not committed[0]:
            sched.yield_point()
        while True:
            tx = stm.start(1)
            data = stm.open_read(tx, x)
            if data is not None:
                observed.append(data.value)
            if stm.commit(tx) == COMMITTED:
                return

    def noise():
        for k in range(8):
            tx = stm.start(2)
            stm.open_read(tx, x)
            data = stm.open_write(tx, y)
            if data is not None:
                data.value = k
            stm.commit(tx)

    for body in (first, second, noise):
        sched.spawn(body)
    sched.run()
    return bool(observed) and all(v == expected for v in observed)


def test_real_time_order(criterion):
    good = sum(_real_time_trial(seed) for seed in range(1000))
    ok = good == 1000
    criterion(5, ok, f"T2 saw T1's value in {good}/1000 runs")
    assert ok


@pytest.mark.parametrize("threads, ops", [(4, 3334), (8, 1429)])
def test_space_bound_with_a_halted_thread(criterion, threads, ops):
    rec = run(
        RunConfig(workload="counter", threads=threads, ops=ops, halt=threads - 1, audit=True, seed=threads)
    )
    bound = 4 * threads
    during = (threads - 1) * ops
    ok = (
        rec["live_locators_max"] <= bound
        and rec["residency"] <= bound
        and rec["violations"] == 0
        and during >= 10_000
    )
    criterion(
        6,
        ok,
        f"N={threads}: {during} transactions while halted, reachable max {rec['live_locators_max']} "
        f"(<= {bound}); residency {rec['residency']} after release (<= {bound}), "
        f"{rec['residency_while_halted']} while halted ({rec['deferred_while_halted']} frees deferred)",
    )
    assert ok


SMALL_SCRIPTS = {
    "increments": """
        object x 0
        object y 0
        0 inc x 1
        0 inc y 1
        1 read y
        1 write x 5
    """,
    "write-skew": """
        object x 0
        object y 0
        0 read x
        0 write y 1
        1 read y
        1 write x 1
    """,
}


def test_small_schedules_are_serializable(criterion):
    total = cex = 0
    for text in SMALL_SCRIPTS.values():
        verdict = explore(parse_script(text.strip().splitlines()), bound=2)
        total += verdict.schedules
        cex += len(verdict.counterexamples)
    ok = cex == 0 and total > 0
    criterion(7, ok, f"{total} schedules (up to 2 preemptions), {cex} counterexamples")
    assert ok


def test_linearizability_checker_matches_brute_force(criterion):
    rng = random.Random(8)
    agree = rejected = 0
    for _ in range(1000):
        events, init = random_history(rng, ops=6)
        verdict = check_linearizable(events, init).ok
        agree += verdict == brute_force_linearizable(events, init)
        rejected += not verdict
    ok = agree == 1000
    criterion(8, ok, f"{agree}/1000 verdicts agree ({rejected} histories rejected)")
    assert ok


def test_contention_reduction(criterion):
    report = compare_contention(256, 8, 2)
    feb, cas = report.nbfeb, report.cas
    ok = (
        feb["controller_requests"] < 256
        and cas["controller_requests"] == 256
        and feb["max_contention_level"] < cas["max_contention_level"]
        and report.controller_ratio > 1
    )
    criterion(
        9,
        ok,
        f"controller requests {feb['controller_requests']} vs {cas['controller_requests']} "
        f"(ratio {report.controller_ratio:.1f}); contention {feb['max_contention_level']} vs "
        f"{cas['max_contention_level']} (ratio {report.contention_ratio:.1f})",
    )
    assert ok


def test_find_head_returns_within_n_iterations(criterion):
    worst = {}
    for threads in (2, 4, 8):
        worst[threads] = max(
            run(RunConfig(workload="find-head", threads=threads, seed=s, stickiness=0.5))["max_iterations"]
            for s in range(200)
        )
    ok = all(it <= n for n, it in worst.items())
    criterion(10, ok, "worst iterations per N: " + ", ".join(f"N={n}: {it}" for n, it in worst.items()))
    assert ok
