"""A CAS-based, DSTM-style object and the contention comparison.

The baseline object keeps one head word that names the current locator and
is replaced by compare-and-swap.  CAS carries an expected value, so two CAS
requests for one word cannot be merged in a switch; every one of them
reaches the memory controller.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from ..combining import MemReply, MemRequest, Topology, execute_on, simulate
from ..feb_memory import BOTTOM, FebMemory, Kind

CAS = "cas"  # request kind absent from the combining table


@dataclass(eq=False)
class CasLocator:
    id: int
    tx_status: int  # word id
    old: int
    new: int


class CasBaselineObject:
    """Object whose state is a single head reference swung by CAS."""

    def __init__(self, memory: FebMemory, initial: int = 0) -> None:
        self.memory = memory
        self.locators: dict[int, CasLocator] = {}
        self._ids = itertools.count(1)
        self._expected: dict[object, int] = {}
        status = memory.alloc(2, True)  # committed
        first = self._locator(status, initial, initial)
        self.head = memory.alloc(first.id, True)

    def _locator(self, status: int, old: int, new: int) -> CasLocator:
        loc = CasLocator(next(self._ids), status, old, new)
        self.locators[loc.id] = loc
        return loc

    def current(self) -> CasLocator:
        return self.locators[self.memory.peek(self.head)[0]]

    def value(self) -> int:
        loc = self.current()
        committed = self.memory.peek(loc.tx_status)[0] == 2
        return loc.new if committed else loc.old

    def append_request(self, tag: object, new_value: int) -> MemRequest:
        """CAS request installing a fresh locator over the one seen now."""
        seen = self.current()
        status = self.memory.alloc(1, False)
        loc = self._locator(status, self.value(), new_value)
        self._expected[tag] = seen.id
        return MemRequest(CAS, self.head, loc.id, tag)

    def executor(self):
        """Controller callable: executes CAS requests, delegates the rest."""
        plain = execute_on(self.memory)

        def run(req: MemRequest) -> MemReply:
            if req.kind != CAS:
                return plain(req)
            cur, flag = self.memory.peek(self.head)
            if cur == self._expected[req.tag]:
                self.memory.apply(Kind.SAS, self.head, req.operand)
                return MemReply(cur, True)  # flag: swap happened
            return MemReply(cur, False)

        return run


@dataclass
class ContentionReport:
    m: int
    depth: int
    arity: int
    nbfeb: dict = field(default_factory=dict)
    cas: dict = field(default_factory=dict)
    nbfeb_winners: int = 0
    cas_winners: int = 0

    @property
    def controller_ratio(self) -> float:
        return self.cas["controller_requests"] / self.nbfeb["controller_requests"]

    @property
    def contention_ratio(self) -> float:
        return self.cas["max_contention_level"] / self.nbfeb["max_contention_level"]

    def record(self) -> dict:
        return {
            "phase": "contend",
            "m": self.m,
            "depth": self.depth,
            "arity": self.arity,
            "nbfeb": self.nbfeb,
            "cas": self.cas,
            "nbfeb_winners": self.nbfeb_winners,
            "cas_winners": self.cas_winners,
            "controller_ratio": round(self.controller_ratio, 6),
            "contention_ratio": round(self.contention_ratio, 6),
        }


def compare_contention(
    m: int,
    depth: int,
    arity: int = 2,
    *,
    spread: int = 0,
    seed: Optional[int] = None,
) -> ContentionReport:
    """``m`` transactions race to append a locator to one object.

    Under NBFEB each append is a TFAS on the head locator's next word, sent
    through a combining tree.  Under the baseline each is a CAS on the head
    reference, sent through the same tree.
    """
    if m < 1:
        raise ValueError("m must be positive")
    topo = Topology(arity, depth)

    mem = FebMemory()
    next_word = mem.alloc(BOTTOM, False)
    batch = [MemRequest(Kind.TFAS, next_word, 1000 + i, tag=i) for i in range(m)]
    feb = simulate(topo, batch, execute_on(mem), spread=spread, seed=seed)
    feb_winners = sum(1 for r in feb.replies.values() if not r.flag)

    cmem = FebMemory()
    obj = CasBaselineObject(cmem)
    cbatch = [obj.append_request(i, i + 1) for i in range(m)]
    cas = simulate(topo, cbatch, obj.executor(), spread=spread, seed=seed)
    cas_winners = sum(1 for r in cas.replies.values() if r.flag)

    return ContentionReport(
        m, depth, arity, feb.stats.record(), cas.stats.record(), feb_winners, cas_winners
    )
