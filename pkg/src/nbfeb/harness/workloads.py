"""Workloads driven over the STM, with their built-in oracles.

Every workload runs its threads as greenlets under a seeded
:class:`VirtualScheduler` unless ``real_threads`` is set, so a run is a
function of its configuration.  Each returns a JSON-ready stats record.
"""

from __future__ import annotations

import json
import random
import threading
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Optional

from ..consensus import ConsensusInstance
from ..feb_memory import FebMemory, Kind
from ..reclaim import audit_live
from ..stm import COMMITTED, DataVersion, Policy, Stm, TMObject, Transaction
from .baseline import compare_contention
from .scheduler import Task, VirtualScheduler


class TxAborted(Exception):
    """Raised inside a transaction body when an open returned ⊥."""


class UnknownWorkload(ValueError):
    pass


@dataclass
class RunConfig:
    workload: str = "counter"
    threads: int = 4
    ops: int = 100
    payload: int = 8
    cm: str = "aggressive"
    strict: bool = True
    depth: int = 0
    arity: int = 2
    seed: int = 0
    out: Optional[str] = None
    real_threads: bool = False
    halt: Optional[int] = None  # freeze this thread just before its first slot update
    audit: bool = False
    wall: bool = False
    stickiness: float = 0.97  # chance a running thread keeps the processor at each step


def read(stm: Stm, tx: Transaction, obj: TMObject) -> int:
    data = stm.open_read(tx, obj)
    if data is None:
        raise TxAborted
    return data.value


def update(stm: Stm, tx: Transaction, obj: TMObject) -> DataVersion:
    data = stm.open_write(tx, obj)
    if data is None:
        raise TxAborted
    return data


def attempt(stm: Stm, thread: int, body: Callable[[Transaction], Any]) -> tuple[bool, Any]:
    """Run ``body`` once as a transaction; returns (committed, body result)."""
    tx = stm.start(thread)
    try:
        result = body(tx)
    except TxAborted:
        result = None
    return stm.commit(tx) == COMMITTED, result


class Env:
    """One STM instance plus whatever runs its threads."""

    def __init__(self, cfg: RunConfig) -> None:
        self.cfg = cfg
        self.memory = FebMemory()
        self.sched: Optional[VirtualScheduler] = None
        self.pending: dict[int, int] = defaultdict(int)
        self.max_contention = 0
        if not cfg.real_threads:
            self.sched = VirtualScheduler(seed=cfg.seed, stickiness=cfg.stickiness)
            self.memory.hook = self._hook
        self.stm = Stm(
            cfg.threads,
            memory=self.memory,
            payload_width=cfg.payload,
            strict=cfg.strict,
            policy=Policy(cfg.cm),
            reclaim=not cfg.real_threads,
        )
        if self.sched is not None:
            self.stm.pause = self.sched.pause
        self.live_max = 0
        self.audits = 0

    def _hook(self, kind: Kind, w: int, operand):
        # requests waiting on one word at the same instant must be served one by one
        pending = self.pending
        n = pending[w] = pending[w] + 1
        if n > self.max_contention:
            self.max_contention = n
        try:
            return self.sched._hook(kind, w, operand)
        finally:
            pending[w] -= 1

    def halt_before_slot_write(self, thread: int) -> None:
        slots = {w for obj in self.stm.objects() for w in obj.slots}

        def rule(task: Task, kind: Kind, w: int) -> bool:
            return task.index == thread and kind is Kind.SAS and w in slots

        self.sched.halt_rule = rule

    def audit(self) -> None:
        if not self.cfg.audit:
            return
        self.audits += 1
        for obj in self.stm.objects():
            self.live_max = max(self.live_max, audit_live(self.stm, obj))

    def run_threads(self, bodies: list[Callable[[], Any]]) -> list[Any]:
        if self.sched is not None:
            for i, body in enumerate(bodies):
                self.sched.spawn(body, name=f"thread{i}")
            return self.sched.run()
        results: list[Any] = [None] * len(bodies)

        def wrap(i: int) -> None:
            results[i] = bodies[i]()

        workers = [threading.Thread(target=wrap, args=(i,)) for i in range(len(bodies))]
        for t in workers:
            t.start()
        for t in workers:
            t.join()
        return results

    def record(self, phase: str, **extra: Any) -> dict:
        s = self.stm.stats
        rec = {
            "phase": phase,
            "workload": self.cfg.workload,
            "threads": self.cfg.threads,
            "commits": s["commits"],
            "aborts": {
                "cm": s["aborts_cm"],
                "lsa": s["aborts_lsa"],
                "enemy": s["aborts_enemy"],
                "strict": s["aborts_strict"],
            },
            "controller_requests": sum(self.memory.counts.values()),
            "max_contention_level": self.max_contention,
            "live_locators_max": self.live_max,
            "seed": self.cfg.seed,
        }
        rec.update(extra)
        return rec


# ---------------------------------------------------------------------------


def counter(cfg: RunConfig) -> dict:
    """Every thread increments one shared counter ``ops`` times (attempts)."""
    env = Env(cfg)
    stm = env.stm
    obj = stm.create_object(0, "counter")
    if cfg.halt is not None:
        env.halt_before_slot_write(cfg.halt)

    def body(tx: Transaction) -> None:
        data = update(stm, tx, obj)
        data.value = data.value + 1

    def worker(i: int) -> int:
        wins = 0
        for _ in range(cfg.ops):
            ok, _ = attempt(stm, i, body)
            wins += ok
            env.audit()
        return wins

    wins = env.run_threads([lambda i=i: worker(i) for i in range(cfg.threads)])
    extra = {}
    if cfg.halt is not None and env.sched is not None:
        # while the halted thread stays pinned, nothing retired after it pinned can go
        stm.collect()
        extra["residency_while_halted"] = stm.unreclaimed_locators(obj)
        extra["deferred_while_halted"] = stm.epochs.deferred()
        env.sched.release_halted()
        wins = env.sched.run()
    wins = [w or 0 for w in wins]
    final = stm.peek_value(obj).value
    for _ in range(3):
        stm.collect()
    return env.record(
        "counter",
        final=final,
        committed=sum(wins),
        violations=int(final != sum(wins)),
        residency=stm.unreclaimed_locators(obj),
        deferred=stm.epochs.deferred(),
        **extra,
    )


def invariant_pair(cfg: RunConfig) -> dict:
    """Writers move amounts between x and y; readers check x + y stays 100.

    With one thread there are no readers and nothing runs.  Each reader
    retries until it has taken ``ops`` complete snapshots; writers run until
    the last reader is done.
    """
    env = Env(cfg)
    stm = env.stm
    x = stm.create_object(50, "x")
    y = stm.create_object(50, "y")
    writers = max(1, cfg.threads // 4)
    snapshots = [0] * cfg.threads
    violations = [0] * cfg.threads
    rngs = [random.Random(f"{cfg.seed}:{i}") for i in range(cfg.threads)]

    def write_body(i: int):
        def body(tx: Transaction) -> None:
            dx = update(stm, tx, x)
            dy = update(stm, tx, y)
            if dx.value + dy.value != 100:
                violations[i] += 1
            amount = rngs[i].randint(0, 100) - dx.value
            dx.value += amount
            dy.value -= amount

        return body

    def read_body(i: int):
        def body(tx: Transaction) -> None:
            a = read(stm, tx, x)
            b = read(stm, tx, y)
            snapshots[i] += 1
            if a + b != 100:
                violations[i] += 1

        return body

    readers_left = [cfg.threads - writers]

    def worker(i: int) -> None:
        if i < writers:
            # writers keep going for as long as anyone is reading
            body = write_body(i)
            while readers_left[0] > 0:
                attempt(stm, i, body)
                env.audit()
            return
        body = read_body(i)
        while snapshots[i] < cfg.ops:
            attempt(stm, i, body)
            env.audit()
        readers_left[0] -= 1

    env.run_threads([lambda i=i: worker(i) for i in range(cfg.threads)])
    return env.record(
        "invariant-pair",
        snapshots=sum(snapshots),
        violations=sum(violations),
        final_sum=stm.peek_value(x).value + stm.peek_value(y).value,
    )


def list_shuffle(cfg: RunConfig) -> dict:
    """Swaps over several objects plus a version counter.

    A transaction that begins after another has committed must see a version
    at least as new, and every snapshot must still be a permutation.
    """
    env = Env(cfg)
    stm = env.stm
    k = max(3, cfg.threads + 1)
    cells = [stm.create_object(v, f"cell{v}") for v in range(k)]
    version = stm.create_object(0, "version")
    published = [0]  # highest version whose transaction has returned from commit
    violations = [0]
    rngs = [random.Random(f"{cfg.seed}:{i}") for i in range(cfg.threads)]

    def worker(i: int) -> int:
        rng = rngs[i]
        commits = 0
        for n in range(cfg.ops):
            floor = published[0]
            if n % 4 == 3:
                def body(tx):
                    v = read(stm, tx, version)
                    vals = [read(stm, tx, c) for c in cells]
                    return v, vals

                ok, res = attempt(stm, i, body)
                if ok:
                    v, vals = res
                    if v < floor or sorted(vals) != list(range(k)):
                        violations[0] += 1
            else:
                a, b = rng.sample(range(k), 2)

                def body(tx):
                    ver = update(stm, tx, version)
                    seen = ver.value
                    ver.value = seen + 1
                    da, db = update(stm, tx, cells[a]), update(stm, tx, cells[b])
                    da.value, db.value = db.value, da.value
                    return seen

                ok, seen = attempt(stm, i, body)
                if ok:
                    if seen < floor:
                        violations[0] += 1
                    published[0] = max(published[0], seen + 1)
            commits += ok
            env.audit()
        return commits

    env.run_threads([lambda i=i: worker(i) for i in range(cfg.threads)])
    final = sorted(stm.peek_value(c).value for c in cells)
    if final != list(range(k)):
        violations[0] += 1
    return env.record("list-shuffle", violations=violations[0], version=stm.peek_value(version).value)


def consensus_trials(cfg: RunConfig) -> dict:
    """``ops`` independent trials of ``threads`` proposers on one TFAS word each."""
    rng = random.Random(cfg.seed)
    violations = 0
    multi_step = 0
    for trial in range(cfg.ops):
        memory = FebMemory()
        sched = VirtualScheduler(memory, seed=rng.getrandbits(32))
        inst = ConsensusInstance.create(memory)
        proposals = [rng.getrandbits(32) for _ in range(cfg.threads)]
        for p in proposals:
            sched.spawn(inst.propose, p)
        decided = sched.run()
        if len(set(decided)) != 1 or decided[0] not in proposals:
            violations += 1
        multi_step += sum(1 for t in sched.tasks if t.steps != 1)
    return {
        "phase": "consensus",
        "workload": cfg.workload,
        "threads": cfg.threads,
        "trials": cfg.ops,
        "violations": violations,
        "proposals_not_single_step": multi_step,
        "seed": cfg.seed,
    }


def contention_sweep(cfg: RunConfig) -> dict:
    depth = cfg.depth or 8
    rows = [compare_contention(2**e, depth, cfg.arity).record() for e in range(depth + 1)]
    return {"phase": "contention-sweep", "depth": depth, "arity": cfg.arity, "rows": rows, "seed": cfg.seed}


def find_head_race(cfg: RunConfig) -> dict:
    """``threads`` transactions each append once to one object; count FindHead rounds."""
    env = Env(cfg)
    stm = env.stm
    obj = stm.create_object(0, "hot")
    worst = [0]

    def probe(event: str, iterations: int = 0, **_: Any) -> None:
        if event == "find_head":
            worst[0] = max(worst[0], iterations)

    stm.probe = probe

    def body(tx: Transaction) -> None:
        data = update(stm, tx, obj)
        data.value += 1

    env.run_threads([lambda i=i: attempt(stm, i, body)[0] for i in range(cfg.threads)])
    return env.record("find-head", max_iterations=worst[0], violations=int(worst[0] > cfg.threads))


WORKLOADS: dict[str, Callable[[RunConfig], dict]] = {
    "counter": counter,
    "invariant-pair": invariant_pair,
    "list-shuffle": list_shuffle,
    "consensus": consensus_trials,
    "contention-sweep": contention_sweep,
    "find-head": find_head_race,
}


def run(cfg: RunConfig) -> dict:
    """Execute the configured workload and append its stats line to ``cfg.out``."""
    try:
        fn = WORKLOADS[cfg.workload]
    except KeyError:
        raise UnknownWorkload(cfg.workload) from None
    if cfg.threads < 1 or cfg.ops < 0:
        raise ValueError("threads must be positive and ops non-negative")
    started = time.perf_counter()
    rec = fn(cfg)
    if cfg.wall:
        rec["wall_seconds"] = round(time.perf_counter() - started, 3)
    if cfg.out:
        with open(cfg.out, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return rec


def config_record(cfg: RunConfig) -> dict:
    return asdict(cfg)
