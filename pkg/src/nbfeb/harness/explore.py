"""Exhaustive schedule exploration of tiny scripted programs.

A script declares transactional objects and FEB words, then lists each
thread's operations::

    object x 0
    word s 1 0          # value (or bot) and flag
    0 read x
    0 write y 5
    1 inc x 1
    2 tfas s 3

A thread's transactional operations (``read``, ``write``, ``inc``) form one
transaction that begins before the first and commits after the last.
FEB operations (``load``, ``sac``, ``sas``, ``tfas``) are issued directly.
Every schedule is checked for a serial witness of the committed
transactions, for linearizability of the FEB operations, for at most one
status transition per transaction and for well-formed locator chains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..feb_memory import BOTTOM, FebMemory, Kind
from ..stm import COMMITTED, Stm, TMObject
from .history import HistoryEvent, check_linearizable
from .scheduler import VirtualScheduler, explore_schedules
from .serial import TxLog, serial_witness
from .workloads import TxAborted

MAX_THREADS = 3
MAX_OPS = 3
TX_OPS = ("read", "write", "inc")
FEB_OPS = {"load": Kind.LOAD, "sac": Kind.SAC, "sas": Kind.SAS, "tfas": Kind.TFAS}


class ScriptError(ValueError):
    pass


class ScriptTooLarge(ScriptError):
    pass


@dataclass
class Script:
    objects: dict[str, int] = field(default_factory=dict)
    words: dict[str, tuple[int, bool]] = field(default_factory=dict)
    threads: dict[int, list[tuple[str, str, Optional[int]]]] = field(default_factory=dict)

    @property
    def nthreads(self) -> int:
        return max(self.threads, default=-1) + 1


def _value(token: str) -> int:
    return BOTTOM if token in ("bot", "⊥") else int(token)


def parse_script(lines: Iterable[str]) -> Script:
    s = Script()
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "object":
                s.objects[parts[1]] = int(parts[2]) if len(parts) > 2 else 0
            elif parts[0] == "word":
                value = _value(parts[2]) if len(parts) > 2 else BOTTOM
                flag = bool(int(parts[3])) if len(parts) > 3 else False
                s.words[parts[1]] = (value, flag)
            else:
                thread, op, target = int(parts[0]), parts[1], parts[2]
                arg = _value(parts[3]) if len(parts) > 3 else None
                s.threads.setdefault(thread, []).append((op, target, arg))
        except (IndexError, ValueError) as exc:
            raise ScriptError(f"line {lineno}: cannot parse {line!r}") from exc
    _validate(s)
    return s


def _validate(s: Script) -> None:
    if set(s.threads) != set(range(s.nthreads)):
        raise ScriptError("threads must be numbered 0..n-1 without gaps")
    if s.nthreads > MAX_THREADS or any(len(ops) > MAX_OPS for ops in s.threads.values()):
        raise ScriptTooLarge(f"at most {MAX_THREADS} threads with {MAX_OPS} operations each")
    for t, ops in s.threads.items():
        kinds = {op in TX_OPS for op, _, _ in ops}
        if len(kinds) > 1:
            raise ScriptError(f"thread {t} mixes transactional and FEB operations")
        for op, target, arg in ops:
            if op in TX_OPS:
                if target not in s.objects:
                    raise ScriptError(f"unknown object {target!r}")
                if op != "read" and arg is None:
                    raise ScriptError(f"{op} needs a value")
            elif op in FEB_OPS:
                if target not in s.words:
                    raise ScriptError(f"unknown word {target!r}")
                if (op != "load") != (arg is not None):
                    raise ScriptError(f"bad argument for {op}")
            else:
                raise ScriptError(f"unknown operation {op!r}")


@dataclass
class Counterexample:
    schedule: list[int]
    problems: list[str]


@dataclass
class ExploreVerdict:
    schedules: int
    counterexamples: list[Counterexample]
    bound: int
    outcomes: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.counterexamples

    def record(self) -> dict:
        return {
            "phase": "explore",
            "bound": self.bound,
            "schedules": self.schedules,
            "counterexamples": len(self.counterexamples),
            "outcomes": dict(sorted(self.outcomes.items())),
        }


def _program(script: Script, strict: bool):
    def program(sched: VirtualScheduler):
        memory = FebMemory()
        n = max(script.nthreads, 1)
        stm = Stm(n, memory=memory, strict=strict, sweep_every=1)
        objs: dict[str, TMObject] = {name: stm.create_object(v, name) for name, v in script.objects.items()}
        words = {name: memory.alloc(v, f) for name, (v, f) in script.words.items()}
        sched.attach(memory)
        stm.pause = sched.pause
        logs: list[TxLog] = []
        txs = []
        events: list[HistoryEvent] = []
        transitions: dict[int, int] = {}
        status_words: set[int] = set()

        def trace(kind, w, operand, reply):
            if kind is Kind.TFAS and not reply[1] and w in status_words:
                transitions[w] = transitions.get(w, 0) + 1

        memory.trace = trace

        def tx_thread(t: int, ops) -> None:
            log = TxLog(t, began=sched.steps)
            logs.append(log)
            tx = stm.start(t)
            txs.append(tx)
            status_words.add(tx.status)
            try:
                for op, name, arg in ops:
                    obj = objs[name]
                    if op == "read":
                        data = stm.open_read(tx, obj)
                        if data is None:
                            raise TxAborted
                        log.ops.append((op, name, None, data.value))
                    else:
                        data = stm.open_write(tx, obj)
                        if data is None:
                            raise TxAborted
                        seen = data.value
                        data.value = arg if op == "write" else seen + arg
                        log.ops.append((op, name, arg, None if op == "write" else seen))
            except TxAborted:
                pass
            log.committed = stm.commit(tx) == COMMITTED
            log.ended = sched.steps

        def feb_thread(t: int, ops) -> None:
            for op, name, arg in ops:
                kind = FEB_OPS[op]
                events.append(HistoryEvent(t, "inv", op=kind, word=name, arg=arg))
                value, flag = memory.execute(kind, words[name], arg)
                events.append(HistoryEvent(t, "ret", value=value, flag=flag))

        for t in range(script.nthreads):
            ops = script.threads[t]
            if ops and ops[0][0] in TX_OPS:
                sched.spawn(tx_thread, t, ops)
            else:
                sched.spawn(feb_thread, t, ops)

        def finish() -> tuple[str, list[str]]:
            problems: list[str] = []
            if logs:
                final = {name: stm.peek_value(o).value for name, o in objs.items()}
                if serial_witness(script.objects, logs, final) is None:
                    problems.append("no serial witness for committed transactions")
            if events and not check_linearizable(events, script.words).ok:
                problems.append("FEB history not linearizable")
            for w, count in transitions.items():
                if count > 1:
                    problems.append(f"status word {w} changed {count} times")
            for o in objs.values():
                problems.extend(stm.audit_chains(o))
            summary = "".join("C" if lg.committed else "A" for lg in sorted(logs, key=lambda l: l.thread))
            if events:
                wins = sum(1 for e in events if e.kind == "ret" and not e.flag)
                summary += f"|clear={wins}"
            return summary, problems

        return finish

    return program


def explore(script: Script, bound: int = 2, *, strict: bool = True, limit: Optional[int] = None) -> ExploreVerdict:
    """Check ``script`` under every schedule with at most ``bound`` preemptions."""
    _validate(script)
    if bound < 0:
        raise ValueError("bound must be non-negative")
    outcomes: dict[str, int] = {}

    def keep(result) -> bool:
        summary, problems = result
        outcomes[summary] = outcomes.get(summary, 0) + 1
        return bool(problems)

    stats = explore_schedules(_program(script, strict), bound, limit=limit, keep=keep)
    cex = [Counterexample(s.choices, s.outcome[1]) for s in stats.outcomes]
    return ExploreVerdict(stats.schedules, cex, bound, outcomes)
