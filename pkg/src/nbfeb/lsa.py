"""Minimal lazy-snapshot machinery: commit clock, validity ranges, version choice.

A transaction carries a validity range ``[lower, upper]`` of clock values at
which everything it has seen so far was simultaneously current.  Opening an
object intersects that range with the range of the version chosen; an empty
intersection means no consistent snapshot exists and the transaction aborts.

Ranges are inclusive on both ends and ``upper=None`` stands for "still
current".  The half-open range ``[a, b)`` of a version replaced at ``b`` is
``ValidityRange(a, b - 1)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Optional, Protocol, Sequence

from .combining import MemRequest, Topology, execute_on, simulate
from .feb_memory import FebMemory, Kind


class Mode(enum.Enum):
    READ = "read"
    WRITE = "write"


class Clock:
    """Global commit counter driven by fetch-and-increment.

    Timestamp 0 belongs to initial versions; the first tick returns 1.
    """

    def __init__(self, memory: FebMemory) -> None:
        self.memory = memory
        self.word = memory.alloc(0, False)

    def now(self) -> int:
        return self.memory.load(self.word)[0]

    def tick(self) -> int:
        return self.memory.fai(self.word, 1) + 1

    def tick_batch(self, count: int, topology: Topology, **kwargs) -> list[int]:
        """Issue ``count`` concurrent ticks through a combining network."""
        batch = [MemRequest(Kind.FAI, self.word, tag=i) for i in range(count)]
        result = simulate(topology, batch, execute_on(self.memory), **kwargs)
        self.last_stats = result.stats
        return [result.replies[i].value + 1 for i in range(count)]


@dataclass(frozen=True)
class ValidityRange:
    lower: int
    upper: Optional[int] = None

    def __post_init__(self) -> None:
        if self.upper is not None and self.upper < self.lower:
            raise ValueError(f"empty range [{self.lower}, {self.upper}]")

    @classmethod
    def half_open(cls, lower: int, end: Optional[int]) -> "ValidityRange":
        return cls(lower, None if end is None else end - 1)

    def contains(self, t: int) -> bool:
        return self.lower <= t and (self.upper is None or t <= self.upper)

    def capped(self, now: Optional[int]) -> "ValidityRange":
        """Bound an open range by the clock value at which it was observed."""
        if self.upper is not None or now is None:
            return self
        return ValidityRange(self.lower, max(now, self.lower))

    def intersect(self, other: "ValidityRange") -> Optional["ValidityRange"]:
        lower = max(self.lower, other.lower)
        uppers = [u for u in (self.upper, other.upper) if u is not None]
        upper = min(uppers) if uppers else None
        if upper is not None and upper < lower:
            return None
        return ValidityRange(lower, upper)

    def __str__(self) -> str:
        hi = "∞)" if self.upper is None else f"{self.upper}]"
        return f"[{self.lower}, {hi}"


@dataclass(frozen=True)
class VersionView:
    data: Any
    commit_ts: int
    range: ValidityRange

    def __post_init__(self) -> None:
        if self.range.lower != self.commit_ts:
            raise ValueError("a version's range starts at its commit timestamp")


@dataclass
class LsaState:
    range: ValidityRange
    read_set: list[tuple[Hashable, int]] = field(default_factory=list)
    # (object, locator, timestamp of the version the locator copied)
    write_set: list[tuple[Hashable, Any, int]] = field(default_factory=list)


class LsaTransaction(Protocol):
    lsa: LsaState

    def abort(self, cause: str) -> None: ...

    def announce(self, ts: Optional[int]) -> None: ...


def lsa_start(tx: LsaTransaction, now: int) -> None:
    tx.lsa = LsaState(ValidityRange(now))


def lsa_open(
    tx: LsaTransaction,
    versions: Sequence[VersionView],
    mode: Mode,
    *,
    now: Optional[int] = None,
    extend: Optional[Callable[[int], bool]] = None,
    key: Hashable = None,
) -> Optional[VersionView]:
    """Pick a version consistent with ``tx``'s snapshot and narrow its range.

    Read mode takes the oldest version that overlaps the current range,
    which keeps the snapshot as close to the transaction start as the
    available versions allow.  Write mode insists on the most recent
    version.  If nothing fits and ``extend`` is given, the range is pushed up
    to ``now`` when ``extend(now)`` confirms everything read so far is still
    current, and the choice is retried once.  Returns None after aborting
    ``tx`` when no version fits.
    """
    if not versions:
        raise ValueError("no versions to choose from")
    ordered = sorted(versions, key=lambda v: v.commit_ts)

    def choose(current: ValidityRange) -> Optional[tuple[VersionView, ValidityRange]]:
        pool = ordered[-1:] if mode is Mode.WRITE else ordered
        for view in pool:
            joint = view.range.capped(now).intersect(current)
            if joint is not None:
                return view, joint
        return None

    picked = choose(tx.lsa.range)
    if picked is None and extend is not None and now is not None:
        rng = tx.lsa.range
        if rng.upper is not None and rng.upper < now and extend(now):
            tx.lsa.range = ValidityRange(rng.lower, now)
            picked = choose(tx.lsa.range)
    if picked is None:
        tx.abort("lsa")
        return None
    view, joint = picked
    tx.lsa.range = joint
    if mode is Mode.READ:
        tx.lsa.read_set.append((key, view.commit_ts))
    return view


def lsa_commit(
    tx: LsaTransaction,
    clock: Clock,
    valid_at: Callable[[Hashable, int, int], bool],
) -> Optional[int]:
    """Obtain a commit timestamp and check the snapshot still holds at it.

    The transaction first announces that it is committing, so that readers
    racing with the tick can tell its timestamp may precede theirs.  Every
    read version and every version copied for writing must still be the
    current one at the new timestamp.  The range is not extended first.
    """
    tx.announce(None)
    ts = clock.tick()
    tx.announce(ts)
    for key, ts_read in tx.lsa.read_set:
        if not valid_at(key, ts_read, ts):
            tx.abort("lsa")
            return None
    for key, _, ts_base in tx.lsa.write_set:
        if not valid_at(key, ts_base, ts):
            tx.abort("lsa")
            return None
    return ts
