"""Concurrent histories of FEB-word operations and their linearizability.

A history is a real-time ordered list of invocation and response events.
The checker searches for a linearization word by word (linearizability is
local, so a history is linearizable iff each word's subhistory is), with a
memoized depth-first search in the style of Wing and Gong.  A plain
permutation search over the whole history serves as the independent oracle.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from ..feb_memory import BOTTOM, Kind, fmt_value, step

OPS = {k.value: k for k in Kind}


class MalformedHistory(ValueError):
    pass


@dataclass(frozen=True)
class HistoryEvent:
    thread: int
    kind: str  # "inv" or "ret"
    op: Optional[Kind] = None
    word: Optional[str] = None
    arg: Optional[int] = None
    value: Optional[int] = None
    flag: Optional[bool] = None


@dataclass(frozen=True)
class Operation:
    index: int
    thread: int
    op: Kind
    word: str
    arg: Optional[int]
    invoked: int
    returned: Optional[int]  # None: still pending at the end of the history
    reply: Optional[tuple[int, bool]]

    def precedes(self, other: "Operation") -> bool:
        return self.returned is not None and self.returned < other.invoked


@dataclass
class Verdict:
    ok: bool
    witness: Optional[list[int]] = None  # operation indices in linearization order
    reason: str = ""


def _parse_value(token: str) -> int:
    return BOTTOM if token in ("bot", "⊥") else int(token)


def parse_history(lines: Iterable[str]) -> tuple[list[HistoryEvent], dict[str, tuple[int, bool]]]:
    """Read the text form.

    ``init <word> <value|bot> <flag>`` lines set initial word states (default
    ``(bot, 0)``); ``<thread> inv <op> <word> [arg]`` and
    ``<thread> ret <value|bot> <flag>`` lines are events in real-time order.
    """
    events: list[HistoryEvent] = []
    init: dict[str, tuple[int, bool]] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "init":
                init[parts[1]] = (_parse_value(parts[2]), bool(int(parts[3])))
                continue
            thread = int(parts[0])
            if parts[1] == "inv":
                op = OPS[parts[2]]
                arg = _parse_value(parts[4]) if len(parts) > 4 else None
                events.append(HistoryEvent(thread, "inv", op=op, word=parts[3], arg=arg))
            elif parts[1] == "ret":
                events.append(
                    HistoryEvent(thread, "ret", value=_parse_value(parts[2]), flag=bool(int(parts[3])))
                )
            else:
                raise MalformedHistory(f"line {lineno}: unknown event {parts[1]!r}")
        except (IndexError, KeyError, ValueError) as exc:
            if isinstance(exc, MalformedHistory):
                raise
            raise MalformedHistory(f"line {lineno}: cannot parse {line!r}") from exc
    return events, init


def format_history(events: Sequence[HistoryEvent], init: Optional[dict] = None) -> str:
    out = []
    for word, (value, flag) in sorted((init or {}).items()):
        out.append(f"init {word} {_fmt(value)} {int(flag)}")
    for e in events:
        if e.kind == "inv":
            tail = "" if e.arg is None else f" {_fmt(e.arg)}"
            out.append(f"{e.thread} inv {e.op.value} {e.word}{tail}")
        else:
            out.append(f"{e.thread} ret {_fmt(e.value)} {int(e.flag)}")
    return "\n".join(out) + "\n"


def _fmt(v: int) -> str:
    return "bot" if v == BOTTOM else str(v)


def operations(events: Sequence[HistoryEvent]) -> list[Operation]:
    """Pair invocations with responses; reject ill-formed histories."""
    open_inv: dict[int, tuple[int, HistoryEvent]] = {}
    done: list[tuple[int, HistoryEvent, Optional[int], Optional[HistoryEvent]]] = []
    for pos, e in enumerate(events):
        if e.kind == "inv":
            if e.thread in open_inv:
                raise MalformedHistory(f"thread {e.thread} invokes while an operation is pending")
            if e.op.has_operand and e.arg is None:
                raise MalformedHistory(f"{e.op.value} needs an argument")
            if not e.op.has_operand and e.arg is not None:
                raise MalformedHistory(f"{e.op.value} takes no argument")
            open_inv[e.thread] = (pos, e)
        else:
            if e.thread not in open_inv:
                raise MalformedHistory(f"thread {e.thread} responds without an invocation")
            start, inv = open_inv.pop(e.thread)
            done.append((start, inv, pos, e))
    for start, inv in open_inv.values():
        done.append((start, inv, None, None))
    done.sort(key=lambda item: item[0])
    return [
        Operation(
            i, inv.thread, inv.op, inv.word, inv.arg, start, end,
            None if ret is None else (ret.value, ret.flag),
        )
        for i, (start, inv, end, ret) in enumerate(done)
    ]


def _initial(init: Optional[dict], word: str) -> tuple[int, bool]:
    return (init or {}).get(word, (BOTTOM, False))


def check_linearizable(
    events: Sequence[HistoryEvent], init: Optional[dict] = None
) -> Verdict:
    """Accept iff some real-time-respecting order explains every response."""
    ops = operations(events)
    witness: list[int] = []
    for word in sorted({o.word for o in ops}):
        sub = [o for o in ops if o.word == word]
        order = _search_word(sub, _initial(init, word))
        if order is None:
            return Verdict(False, reason=f"no linearization for word {word}")
        witness.extend(order)
    return Verdict(True, witness)


def _search_word(ops: list[Operation], start: tuple[int, bool]) -> Optional[list[int]]:
    n = len(ops)
    complete = 0
    for i, o in enumerate(ops):
        if o.returned is not None:
            complete |= 1 << i
    # must[i]: operations that finished before ops[i] was invoked
    must = [0] * n
    for i, a in enumerate(ops):
        for j, b in enumerate(ops):
            if b.precedes(a):
                must[i] |= 1 << j
    seen: set[tuple[int, tuple[int, bool]]] = set()
    path: list[int] = []

    def dfs(done: int, state: tuple[int, bool]) -> bool:
        if done & complete == complete:
            return True
        if (done, state) in seen:
            return False
        seen.add((done, state))
        for i, o in enumerate(ops):
            bit = 1 << i
            if done & bit or must[i] & ~done:
                continue
            reply, nxt = step(o.op, state, o.arg)
            if o.reply is not None and o.reply != reply:
                continue
            path.append(o.index)
            if dfs(done | bit, nxt):
                return True
            path.pop()
        return False

    return list(path) if dfs(0, start) else None


def brute_force_linearizable(
    events: Sequence[HistoryEvent], init: Optional[dict] = None
) -> bool:
    """Try every subset of pending operations and every permutation."""
    ops = operations(events)
    complete = [o for o in ops if o.returned is not None]
    pending = [o for o in ops if o.returned is None]
    for r in range(len(pending) + 1):
        for extra in itertools.combinations(pending, r):
            chosen = complete + list(extra)
            for perm in itertools.permutations(chosen):
                if _valid_sequence(perm, init):
                    return True
    return False


def _valid_sequence(seq: Sequence[Operation], init: Optional[dict]) -> bool:
    pos = {o.index: k for k, o in enumerate(seq)}
    for a in seq:
        for b in seq:
            if a.precedes(b) and pos[a.index] > pos[b.index]:
                return False
    state: dict[str, tuple[int, bool]] = {}
    for o in seq:
        cur = state.get(o.word, _initial(init, o.word))
        reply, state[o.word] = step(o.op, cur, o.arg)
        if o.reply is not None and reply != o.reply:
            return False
    return True


def random_history(
    rng: random.Random,
    *,
    threads: int = 3,
    ops: int = 6,
    words: Sequence[str] = ("a", "b"),
    values: Sequence[int] = (BOTTOM, 0, 1, 2),
    perturb: float = 0.5,
    kinds: Sequence[Kind] = (Kind.LOAD, Kind.SAC, Kind.SAS, Kind.TFAS),
) -> tuple[list[HistoryEvent], dict[str, tuple[int, bool]]]:
    """A concurrent history generated from real executions of the word model.

    Each operation takes effect at a random instant between its invocation
    and its response.  With probability ``perturb`` one response is then
    altered, which may or may not make the history non-linearizable.
    """
    init = {w: (rng.choice(values), rng.random() < 0.5) for w in words}
    per_thread = [[] for _ in range(threads)]
    for k in range(ops):
        kind = rng.choice(kinds)
        arg = rng.choice(values) if kind.has_operand else None
        per_thread[rng.randrange(threads)].append((kind, rng.choice(words), arg))
    phase = [0] * threads  # 0: idle, 1: invoked, 2: took effect
    cursor = [0] * threads
    state = dict(init)
    pending_reply: dict[int, tuple[int, bool]] = {}
    events: list[HistoryEvent] = []
    while True:
        live = [t for t in range(threads) if cursor[t] < len(per_thread[t])]
        if not live:
            break
        t = rng.choice(live)
        kind, word, arg = per_thread[t][cursor[t]]
        if phase[t] == 0:
            events.append(HistoryEvent(t, "inv", op=kind, word=word, arg=arg))
            phase[t] = 1
        elif phase[t] == 1:
            pending_reply[t], state[word] = step(kind, state[word], arg)
            phase[t] = 2
        else:
            value, flag = pending_reply.pop(t)
            events.append(HistoryEvent(t, "ret", value=value, flag=flag))
            phase[t] = 0
            cursor[t] += 1
    if rng.random() < perturb:
        rets = [i for i, e in enumerate(events) if e.kind == "ret"]
        i = rng.choice(rets)
        e = events[i]
        if rng.random() < 0.5:
            alt = [v for v in values if v != e.value] or [e.value]
            events[i] = HistoryEvent(e.thread, "ret", value=rng.choice(alt), flag=e.flag)
        else:
            events[i] = HistoryEvent(e.thread, "ret", value=e.value, flag=not e.flag)
    return events, init


def describe(op: Operation) -> str:
    arg = "" if op.arg is None else f"({fmt_value(op.arg)})"
    return f"t{op.thread}:{op.op.value}{arg}@{op.word}"
