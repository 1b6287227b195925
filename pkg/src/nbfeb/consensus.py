"""Wait-free consensus for any number of processes from a single TFAS word."""

from __future__ import annotations

from dataclasses import dataclass

from .feb_memory import BOTTOM, FebMemory


class BottomProposal(ValueError):
    pass


@dataclass
class ConsensusInstance:
    """One-shot consensus object; ``decision`` starts as (⊥, clear)."""

    memory: FebMemory
    decision: int

    @classmethod
    def create(cls, memory: FebMemory) -> "ConsensusInstance":
        return cls(memory, memory.alloc(BOTTOM, False))

    def propose(self, proposal: int) -> int:
        return propose(self, proposal)


def propose(inst: ConsensusInstance, proposal: int) -> int:
    """Return the value agreed on by every caller of ``inst``.

    Exactly one shared-memory primitive is issued per call.  The first
    process whose TFAS reaches the decision word wins.
    """
    if proposal == BOTTOM:
        raise BottomProposal("proposals must not be ⊥")
    first, _ = inst.memory.tfas(inst.decision, proposal)
    if first == BOTTOM:
        return proposal
    return first
