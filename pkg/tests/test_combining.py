import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nbfeb.combining import (
    MemReply,
    MemRequest,
    Topology,
    combine,
    combine_fai,
    execute_on,
    resolve,
    simulate,
    try_combine,
)
from nbfeb.feb_memory import BOTTOM, FebMemory, Kind

from oracles import serial_pair, word_step

NAMES = ["load", "sac", "sas", "tfas"]
OPERANDS = [BOTTOM, 0, 1, 2]


def _req(op, v, tag, loc=1):
    kind = Kind(op)
    return MemRequest(kind, loc, None if kind is Kind.LOAD else v, tag)


def _combined_run(op1, v1, op2, v2, value, flag):
    plan = combine(_req(op1, v1, "a"), _req(op2, v2, "b"))
    assert plan is not None
    mem = FebMemory()
    w = mem.alloc(value, flag)
    merged = plan.combined
    reply = mem.execute(merged.kind, w, merged.operand)
    first, second = resolve(plan, MemReply(*reply))
    return first.astuple(), second.astuple(), mem.peek(w)


def test_combining_table_is_exhaustively_serial():
    cases = 0
    for op1, op2 in itertools.product(NAMES, repeat=2):
        for v1, v2, value in itertools.product(OPERANDS, repeat=3):
            for flag in (0, 1):
                got = _combined_run(op1, v1, op2, v2, value, flag)
                want = serial_pair(
                    op1, None if op1 == "load" else v1, op2, None if op2 == "load" else v2, value, flag
                )
                assert got == want, (op1, v1, op2, v2, value, flag)
                cases += 1
    assert cases == 16 * 4**3 * 2


def test_load_then_sas_merges_into_sas():
    plan = combine(_req("load", None, "a"), _req("sas", 7, "b"))
    assert plan.combined.kind is Kind.SAS
    assert plan.combined.operand == 7


def test_tfas_second_reply_depends_on_flag():
    plan = combine(_req("tfas", 4, "a"), _req("load", None, "b"))
    assert resolve(plan, MemReply(BOTTOM, False))[1] == MemReply(4, True)
    assert resolve(plan, MemReply(9, True))[1] == MemReply(9, True)


def test_different_locations_do_not_combine():
    assert combine(_req("load", None, "a", 1), _req("load", None, "b", 2)) is None


def test_fai_combines_by_summing():
    a = MemRequest(Kind.FAI, 1, tag="a", increment=2)
    b = MemRequest(Kind.FAI, 1, tag="b", increment=5)
    plan = combine_fai(a, b)
    assert plan.combined.increment == 7
    first, second = resolve(plan, MemReply(10, False))
    assert (first.value, second.value) == (10, 12)


def test_fai_and_feb_requests_do_not_mix():
    assert try_combine(MemRequest(Kind.FAI, 1, tag="a"), _req("load", None, "b")) is None


def test_request_operand_rules():
    with pytest.raises(ValueError):
        MemRequest(Kind.TFAS, 1, None)
    with pytest.raises(ValueError):
        MemRequest(Kind.LOAD, 1, 3)


def _oracle_replay(batch, order, init):
    """Execute requests one at a time in ``order`` with the reference model."""
    state = dict(init)
    replies = {}
    by_tag = {r.tag: r for r in batch}
    for tag in order:
        r = by_tag[tag]
        value, flag = state[r.location]
        if r.kind is Kind.FAI:
            reply, value, flag = word_step("fai", value, flag, r.increment)
        else:
            reply, value, flag = word_step(r.kind.value, value, flag, r.operand)
        state[r.location] = (value, bool(flag))
        replies[tag] = reply
    return replies, state


request_st = st.tuples(
    st.sampled_from(NAMES + ["fai"]), st.sampled_from(OPERANDS), st.integers(0, 1)
)


@settings(max_examples=150, deadline=None)
@given(
    reqs=st.lists(request_st, min_size=1, max_size=24),
    depth=st.integers(0, 4),
    spread=st.integers(0, 3),
    seed=st.integers(0, 2**16),
)
def test_network_equals_some_serial_order(reqs, depth, spread, seed):
    mem = FebMemory()
    words = [mem.alloc(0, False), mem.alloc(BOTTOM, True)]
    init = {w: mem.peek(w) for w in words}
    batch = []
    for i, (op, v, loc) in enumerate(reqs):
        kind = Kind(op)
        operand = None if kind in (Kind.LOAD, Kind.FAI) else v
        batch.append(MemRequest(kind, words[loc], operand, tag=i))
    result = simulate(Topology(2, depth), batch, execute_on(mem), spread=spread, seed=seed)
    assert sorted(result.order) == list(range(len(batch)))
    replies, final = _oracle_replay(batch, result.order, init)
    assert {t: r.astuple() for t, r in result.replies.items()} == replies
    assert {w: mem.peek(w) for w in words} == final
    assert result.stats.controller_requests <= len(batch)


def test_hot_spot_collapses_in_a_full_tree():
    mem = FebMemory()
    w = mem.alloc(BOTTOM, False)
    batch = [MemRequest(Kind.TFAS, w, i + 1, tag=i) for i in range(256)]
    result = simulate(Topology(2, 8), batch, execute_on(mem))
    assert result.stats.controller_requests == 1
    assert result.stats.max_contention_level == 1
    winners = [t for t, r in result.replies.items() if not r.flag]
    assert len(winners) == 1


def test_without_combining_everything_reaches_the_controller():
    mem = FebMemory()
    w = mem.alloc(0, False)
    batch = [MemRequest(Kind.LOAD, w, tag=i) for i in range(16)]
    result = simulate(Topology(2, 4), batch, execute_on(mem), combining=False)
    assert result.stats.controller_requests == 16
    assert result.stats.max_contention_level == 16


def test_depth_zero_cannot_combine():
    mem = FebMemory()
    w = mem.alloc(0, False)
    batch = [MemRequest(Kind.FAI, w, tag=i) for i in range(8)]
    result = simulate(Topology(2, 0), batch, execute_on(mem))
    assert result.stats.controller_requests == 8
    assert sorted(r.value for r in result.replies.values()) == list(range(8))


def test_simulation_is_seed_deterministic():
    def once(seed):
        mem = FebMemory()
        w = mem.alloc(0, False)
        rng = random.Random(1)
        batch = [MemRequest(Kind.FAI, w, tag=i, increment=rng.randint(1, 3)) for i in range(40)]
        return simulate(Topology(2, 3), batch, execute_on(mem), spread=4, seed=seed)

    a, b = once(5), once(5)
    assert a.order == b.order
    assert a.stats.record() == b.stats.record()


def test_topology_rejects_bad_shapes():
    with pytest.raises(ValueError):
        Topology(1, 2)
    with pytest.raises(ValueError):
        Topology(2, -1)
