"""Emulated shared memory of full/empty-bit words.

Every word holds a ``(value, flag)`` pair.  Values are 64-bit unsigned
integers; the all-ones pattern is reserved as ``BOTTOM``, the empty
value.  Link words additionally read the all-zero pattern as
bottom, which is what a recycled word looks like.

The four NB-FEB primitives are ``tfas``, ``load``, ``sac`` and ``sas``.
``fai`` (fetch-and-increment) is provided for the global commit clock.
Each primitive updates its word as one indivisible unit.
"""

from __future__ import annotations

import enum
import threading
from collections import Counter
from typing import Callable, Optional

WORD_MASK = (1 << 64) - 1
BOTTOM = WORD_MASK

Reply = tuple[int, bool]


class Kind(enum.Enum):
    LOAD = "load"
    SAC = "sac"
    SAS = "sas"
    TFAS = "tfas"
    FAI = "fai"

    # members are singletons; identity hashing keeps hot counters cheap
    __hash__ = object.__hash__

    @property
    def has_operand(self) -> bool:
        return self in (Kind.SAC, Kind.SAS, Kind.TFAS, Kind.FAI)


FEB_KINDS = (Kind.LOAD, Kind.SAC, Kind.SAS, Kind.TFAS)


class InvalidWord(LookupError):
    """Raised when a primitive names a word that does not exist (or was freed)."""


def is_null_link(value: int) -> bool:
    """True if a link word's value encodes bottom (all-ones or all-zeros)."""
    return value == BOTTOM or value == 0


def fmt_value(value: int) -> str:
    return "⊥" if value == BOTTOM else str(value)


def check_value(value: int) -> int:
    if not 0 <= value <= WORD_MASK:
        raise ValueError(f"value {value!r} does not fit in a 64-bit word")
    return value


def step(kind: Kind, state: Reply, operand: Optional[int] = None) -> tuple[Reply, Reply]:
    """Sequential semantics of one primitive.

    Returns ``(reply, new_state)``.  This is the model every concurrent
    history is checked against.
    """
    value, flag = state
    if kind is Kind.LOAD:
        return state, state
    if kind is Kind.TFAS:
        return state, (state if flag else (operand, True))
    if kind is Kind.SAC:
        return state, (operand, False)
    if kind is Kind.SAS:
        return state, (operand, True)
    if kind is Kind.FAI:
        return state, ((value + operand) & WORD_MASK, flag)
    raise ValueError(f"unknown primitive {kind!r}")


# A hook is called before a primitive executes.  It may return a reply, in
# which case the primitive is considered already executed (e.g. by a
# network simulator) and the store is not touched again.
Hook = Callable[[Kind, int, Optional[int]], Optional[Reply]]
Trace = Callable[[Kind, int, Optional[int], Reply], None]


class FebMemory:
    """A store of FEB words addressed by integer ids."""

    def __init__(self) -> None:
        self._words: dict[int, list] = {}
        self._free: list[int] = []
        self._next_id = 1
        self._lock = threading.Lock()
        self.hook: Optional[Hook] = None
        self.trace: Optional[Trace] = None
        self.counts: Counter[Kind] = Counter()

    # -- allocation -------------------------------------------------------

    def alloc(self, initial: int = 0, flag: bool = False) -> int:
        check_value(initial)
        with self._lock:
            if self._free:
                w = self._free.pop()
            else:
                w = self._next_id
                self._next_id += 1
            self._words[w] = [initial, bool(flag)]
        return w

    def free(self, w: int) -> None:
        """Release a word.  Recycled storage comes back all-bits-zero."""
        with self._lock:
            if w not in self._words:
                raise InvalidWord(w)
            del self._words[w]
            self._free.append(w)

    def __contains__(self, w: int) -> bool:
        return w in self._words

    def __len__(self) -> int:
        return len(self._words)

    # -- primitives -------------------------------------------------------

    def _do(self, kind: Kind, w: int, operand: Optional[int]) -> Reply:
        if operand is not None:
            check_value(operand)
        hook = self.hook
        reply = hook(kind, w, operand) if hook is not None else None
        if reply is None:
            reply = self.apply(kind, w, operand)
        if self.trace is not None:
            self.trace(kind, w, operand, reply)
        return reply

    def apply(self, kind: Kind, w: int, operand: Optional[int] = None) -> Reply:
        """Execute a primitive directly on the store, bypassing the hook."""
        with self._lock:
            try:
                cell = self._words[w]
            except KeyError:
                raise InvalidWord(w) from None
            reply, (cell[0], cell[1]) = step(kind, (cell[0], cell[1]), operand)
            self.counts[kind] += 1
        return reply

    def tfas(self, w: int, v: int) -> Reply:
        return self._do(Kind.TFAS, w, v)

    def load(self, w: int) -> Reply:
        return self._do(Kind.LOAD, w, None)

    def sac(self, w: int, v: int) -> Reply:
        return self._do(Kind.SAC, w, v)

    def sas(self, w: int, v: int) -> Reply:
        return self._do(Kind.SAS, w, v)

    def fai(self, w: int, inc: int = 1) -> int:
        return self._do(Kind.FAI, w, inc)[0]

    def execute(self, kind: Kind, w: int, operand: Optional[int] = None) -> Reply:
        return self._do(kind, w, operand)

    # -- inspection -------------------------------------------------------

    def peek(self, w: int) -> Reply:
        """Read a word without scheduling, tracing or counting (audits only)."""
        try:
            cell = self._words[w]
        except KeyError:
            raise InvalidWord(w) from None
        return cell[0], cell[1]

    def poke(self, w: int, value: int, flag: bool) -> None:
        """Overwrite a word outside the primitive set (test setup only)."""
        with self._lock:
            if w not in self._words:
                raise InvalidWord(w)
            self._words[w] = [check_value(value), bool(flag)]

    def dump(self, ids: Optional[list[int]] = None) -> str:
        ids = sorted(self._words) if ids is None else ids
        lines = []
        for w in ids:
            value, flag = self.peek(w)
            lines.append(f"{w}: ({fmt_value(value)}, {int(flag)})")
        return "\n".join(lines)
