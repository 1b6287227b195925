"""Switch-level combining of memory requests and a tree network simulator.

Two requests for the same word that meet at a switch are merged into one
request; when the reply to the merged request comes back, the switch builds
a reply for each original request as if the two had executed back to back
(first, then second).

The pairwise rules for the NB-FEB primitives live in ``_TABLE``.  Row is the
first request, column the second.  Each entry gives the kind of the merged
request, which operand it carries, and how the second request's reply is
derived from the memory reply ``(r, f)``.  The first request always gets
``(r, f)`` unchanged.
"""

from __future__ import annotations

import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Optional, Sequence

from .feb_memory import FEB_KINDS, FebMemory, Kind, check_value

__all__ = [
    "MemRequest",
    "MemReply",
    "CombinePlan",
    "Topology",
    "Stats",
    "combine",
    "combine_fai",
    "try_combine",
    "resolve",
    "simulate",
    "execute_on",
    "execute_serial",
]


@dataclass(frozen=True)
class MemRequest:
    kind: Hashable
    location: int
    operand: Optional[int] = None
    tag: Hashable = None
    increment: int = 1  # FAI only

    def __post_init__(self) -> None:
        if self.kind in (Kind.SAC, Kind.SAS, Kind.TFAS):
            if self.operand is None:
                raise ValueError(f"{self.kind.value} needs an operand")
            check_value(self.operand)
        elif self.kind in (Kind.LOAD, Kind.FAI) and self.operand is not None:
            raise ValueError(f"{self.kind.value} takes no operand")


@dataclass(frozen=True)
class MemReply:
    value: int
    flag: bool = False

    def astuple(self) -> tuple[int, bool]:
        return self.value, self.flag


# second-reply rules
_SAME, _V1_CLEAR, _V1_SET, _AFTER_TFAS = "same", "v1,0", "v1,1", "tfas"

_L, _C, _S, _T = Kind.LOAD, Kind.SAC, Kind.SAS, Kind.TFAS

# (first, second) -> (merged kind, operand source, second-reply rule)
_TABLE: dict[tuple[Kind, Kind], tuple[Kind, Optional[str], str]] = {
    (_L, _L): (_L, None, _SAME),
    (_L, _C): (_C, "v2", _SAME),
    # Printed as SAC(v2) in the source table; SAS(v2) is what serial
    # execution of Load;SAS produces.
    (_L, _S): (_S, "v2", _SAME),
    (_L, _T): (_T, "v2", _SAME),
    (_C, _L): (_C, "v1", _V1_CLEAR),
    (_C, _C): (_C, "v2", _V1_CLEAR),
    (_C, _S): (_S, "v2", _V1_CLEAR),
    (_C, _T): (_S, "v2", _V1_CLEAR),
    (_S, _L): (_S, "v1", _V1_SET),
    (_S, _C): (_C, "v2", _V1_SET),
    (_S, _S): (_S, "v2", _V1_SET),
    (_S, _T): (_S, "v1", _V1_SET),
    (_T, _L): (_T, "v1", _AFTER_TFAS),
    (_T, _C): (_C, "v2", _AFTER_TFAS),
    (_T, _S): (_S, "v2", _AFTER_TFAS),
    (_T, _T): (_T, "v1", _AFTER_TFAS),
}


@dataclass(frozen=True)
class CombinePlan:
    """A merged request plus what is needed to split its reply."""

    combined: MemRequest
    first: MemRequest
    second: MemRequest
    rule: str

    def resolve(self, reply: MemReply) -> tuple[MemReply, MemReply]:
        return resolve(self, reply)


def _merged_tag(first: MemRequest, second: MemRequest) -> tuple:
    return ("combined", first.tag, second.tag)


def combine(first: MemRequest, second: MemRequest) -> Optional[CombinePlan]:
    """Merge two NB-FEB requests, or return None if they cannot be merged."""
    if first.location != second.location:
        return None
    entry = _TABLE.get((first.kind, second.kind))
    if entry is None:
        return None
    kind, source, rule = entry
    operand = {"v1": first.operand, "v2": second.operand, None: None}[source]
    merged = MemRequest(kind, first.location, operand, _merged_tag(first, second))
    return CombinePlan(merged, first, second, rule)


def combine_fai(first: MemRequest, second: MemRequest) -> Optional[CombinePlan]:
    """Merge two fetch-and-increment requests into one with the summed increment."""
    if first.kind is not Kind.FAI or second.kind is not Kind.FAI:
        return None
    if first.location != second.location:
        return None
    merged = MemRequest(
        Kind.FAI,
        first.location,
        tag=_merged_tag(first, second),
        increment=first.increment + second.increment,
    )
    return CombinePlan(merged, first, second, "fai")


def try_combine(first: MemRequest, second: MemRequest) -> Optional[CombinePlan]:
    if first.kind is Kind.FAI:
        return combine_fai(first, second)
    if first.kind in FEB_KINDS and second.kind in FEB_KINDS:
        return combine(first, second)
    return None


def resolve(plan: CombinePlan, reply: MemReply) -> tuple[MemReply, MemReply]:
    r, f = reply.value, reply.flag
    rule = plan.rule
    if rule == "fai":
        return MemReply(r, f), MemReply((r + plan.first.increment) & ((1 << 64) - 1), f)
    if rule == _SAME:
        second = MemReply(r, f)
    elif rule == _V1_CLEAR:
        second = MemReply(plan.first.operand, False)
    elif rule == _V1_SET:
        second = MemReply(plan.first.operand, True)
    elif rule == _AFTER_TFAS:
        second = MemReply(plan.first.operand, True) if not f else MemReply(r, True)
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return MemReply(r, f), second


# ---------------------------------------------------------------------------
# Executing requests against a store
# ---------------------------------------------------------------------------


def execute_on(memory: FebMemory) -> Callable[[MemRequest], MemReply]:
    """Controller that runs requests directly on ``memory`` (no hooks)."""

    def run(req: MemRequest) -> MemReply:
        operand = req.increment if req.kind is Kind.FAI else req.operand
        value, flag = memory.apply(req.kind, req.location, operand)
        return MemReply(value, flag)

    return run


def execute_serial(
    memory: FebMemory, requests: Iterable[MemRequest]
) -> dict[Hashable, MemReply]:
    run = execute_on(memory)
    return {req.tag: run(req) for req in requests}


# ---------------------------------------------------------------------------
# Network simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Topology:
    """A k-ary tree of switches with ``arity ** depth`` processor ports.

    Depth 0 connects every processor straight to the memory controller.
    """

    arity: int = 2
    depth: int = 0

    def __post_init__(self) -> None:
        if self.arity < 2:
            raise ValueError("arity must be at least 2")
        if self.depth < 0:
            raise ValueError("depth must be non-negative")

    @property
    def ports(self) -> int:
        return self.arity**self.depth

    def switch_of(self, processor: int, level: int) -> int:
        return processor // self.arity**level


@dataclass
class Stats:
    requests_in: int = 0
    controller_requests: int = 0
    combines: int = 0
    depth: int = 0
    arity: int = 2
    seed: Optional[int] = None
    rounds: int = 0
    max_contention_level: int = 0
    contention_by_location: dict[int, int] = field(default_factory=dict)
    switch_queue_peaks: dict[tuple[int, int], int] = field(default_factory=dict)

    def record(self) -> dict:
        """JSON-ready summary."""
        return {
            "requests_in": self.requests_in,
            "controller_requests": self.controller_requests,
            "combines": self.combines,
            "depth": self.depth,
            "arity": self.arity,
            "seed": self.seed,
            "rounds": self.rounds,
            "max_contention_level": self.max_contention_level,
            "max_switch_queue": max(self.switch_queue_peaks.values(), default=0),
        }


@dataclass
class SimResult:
    replies: dict[Hashable, MemReply]
    stats: Stats
    order: list[Hashable]  # serial order the combined execution is equivalent to


def simulate(
    topology: Topology,
    batch: Sequence[MemRequest],
    execute: Callable[[MemRequest], MemReply],
    *,
    sources: Optional[Sequence[int]] = None,
    issue_rounds: Optional[Sequence[int]] = None,
    spread: int = 0,
    seed: Optional[int] = None,
    combining: bool = True,
) -> SimResult:
    """Push ``batch`` through the network and execute it at the controller.

    Request ``i`` enters at processor ``sources[i]`` (default ``i`` modulo the
    port count) in round ``issue_rounds[i]`` (default 0, or uniform in
    ``[0, spread]`` when a seed is given).  Each hop takes one round.  Within a
    round a switch folds its same-location arrivals pairwise in FIFO order.
    The controller serves one request per location per round.
    """
    if not batch:
        raise ValueError("empty batch")
    tags = [req.tag for req in batch]
    if len(set(tags)) != len(tags):
        raise ValueError("request tags must be unique")
    n = len(batch)
    ports = topology.ports
    if sources is None:
        sources = [i % ports for i in range(n)] if topology.depth else list(range(n))
    if issue_rounds is None:
        rng = random.Random(seed)
        issue_rounds = [rng.randint(0, spread) if spread else 0 for _ in range(n)]

    stats = Stats(requests_in=n, depth=topology.depth, arity=topology.arity, seed=seed)
    plans: dict[Hashable, CombinePlan] = {}

    # arrivals[(level, switch)][round] -> list of (port order key, request)
    arrivals: dict[tuple[int, int], dict[int, list]] = defaultdict(lambda: defaultdict(list))
    controller_in: dict[int, list] = defaultdict(list)

    def send_up(level: int, child: int, rnd: int, reqs: list[MemRequest]) -> None:
        # from (level, child) to the next level up, arriving next round
        if level == topology.depth:
            controller_in[rnd + 1].extend(reqs)
        else:
            parent = child // topology.arity
            arrivals[(level + 1, parent)][rnd + 1].extend((child, k, r) for k, r in enumerate(reqs))

    # Processors inject at level 0.
    per_proc: dict[tuple[int, int], list[MemRequest]] = defaultdict(list)
    for req, src, rnd in zip(batch, sources, issue_rounds):
        per_proc[(src, rnd)].append(req)
    for (src, rnd), reqs in sorted(per_proc.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        if topology.depth == 0:
            controller_in[rnd + 1].extend(reqs)
        else:
            arrivals[(1, src // topology.arity)][rnd + 1].extend(
                (src, k, r) for k, r in enumerate(reqs)
            )

    def fold(reqs: list[MemRequest]) -> list[MemRequest]:
        if not combining:
            return reqs
        out: list[MemRequest] = []
        open_by_loc: dict[int, int] = {}
        for req in reqs:
            idx = open_by_loc.get(req.location)
            if idx is not None:
                plan = try_combine(out[idx], req)
                if plan is not None:
                    plans[plan.combined.tag] = plan
                    stats.combines += 1
                    out[idx] = plan.combined
                    continue
            open_by_loc[req.location] = len(out)
            out.append(req)
        return out

    # Advance the switch levels bottom-up, round by round.
    queues: dict[int, deque] = defaultdict(deque)
    service_order: list[MemRequest] = []
    rnd = 0
    last_issue = max(issue_rounds)
    while True:
        rnd += 1
        for level in range(1, topology.depth + 1):
            for key in [k for k in list(arrivals) if k[0] == level]:
                incoming = arrivals[key].pop(rnd, None)
                if not incoming:
                    continue
                incoming.sort(key=lambda item: (item[0], item[1]))
                reqs = [item[2] for item in incoming]
                peak = stats.switch_queue_peaks.get(key, 0)
                stats.switch_queue_peaks[key] = max(peak, len(reqs))
                send_up(level, key[1], rnd, fold(reqs))
        for req in controller_in.pop(rnd, []):
            queues[req.location].append(req)
            stats.controller_requests += 1
        for loc, q in queues.items():
            if len(q) > stats.contention_by_location.get(loc, 0):
                stats.contention_by_location[loc] = len(q)
        for loc in list(queues):
            q = queues[loc]
            if q:
                service_order.append(q.popleft())
        pending = any(arrivals[k] for k in arrivals) or controller_in or any(queues.values())
        if not pending and rnd > last_issue:
            break
    stats.rounds = rnd
    stats.max_contention_level = max(stats.contention_by_location.values(), default=0)

    replies: dict[Hashable, MemReply] = {}
    order: list[Hashable] = []

    def deliver(tag: Hashable, reply: MemReply) -> None:
        plan = plans.get(tag)
        if plan is None:
            replies[tag] = reply
            order.append(tag)
            return
        first, second = resolve(plan, reply)
        deliver(plan.first.tag, first)
        deliver(plan.second.tag, second)

    for req in service_order:
        deliver(req.tag, execute(req))
    return SimResult(replies, stats, order)
