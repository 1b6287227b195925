import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nbfeb.consensus import BottomProposal, ConsensusInstance, propose
from nbfeb.feb_memory import BOTTOM, FebMemory, Kind
from nbfeb.harness.scheduler import VirtualScheduler


def test_single_proposer_gets_own_value():
    inst = ConsensusInstance.create(FebMemory())
    assert propose(inst, 42) == 42


def test_decision_word_starts_empty():
    mem = FebMemory()
    inst = ConsensusInstance.create(mem)
    assert mem.peek(inst.decision) == (BOTTOM, False)


def test_bottom_proposal_rejected_without_touching_memory():
    mem = FebMemory()
    inst = ConsensusInstance.create(mem)
    with pytest.raises(BottomProposal):
        propose(inst, BOTTOM)
    assert sum(mem.counts.values()) == 0


def test_later_proposers_learn_first_value():
    mem = FebMemory()
    inst = ConsensusInstance.create(mem)
    assert inst.propose(7) == 7
    assert inst.propose(8) == 7
    assert mem.peek(inst.decision) == (7, True)


@settings(max_examples=60, deadline=None)
@given(
    proposals=st.lists(st.integers(0, 2**40), min_size=1, max_size=12),
    seed=st.integers(0, 2**32),
)
def test_agreement_validity_and_one_step(proposals, seed):
    mem = FebMemory()
    sched = VirtualScheduler(mem, seed=seed)
    inst = ConsensusInstance.create(mem)
    order = []
    mem.trace = lambda kind, w, arg, reply: order.append((arg, reply))
    for p in proposals:
        sched.spawn(inst.propose, p)
    results = sched.run()
    # the first TFAS in the linearization decides
    first_value = order[0][0]
    assert results == [first_value] * len(proposals)
    assert all(t.steps == 1 for t in sched.tasks)
    assert mem.counts[Kind.TFAS] == len(proposals)
