"""Obstruction-free multi-version STM built on TFAS and SAC.

Each transactional object is an array of ``N`` single-writer slots, one per
thread, each holding ``(locator, timestamp)`` packed into one FEB word so
the pair changes atomically.  Locators form a list linked by FEB ``next``
words; a writer appends its locator to the head of the list with a single
TFAS, so of several racing writers exactly one wins.  After publishing, the
writer breaks chains of obsolete locators by resetting their ``next`` words,
which is what keeps the number of unreclaimable locators per object linear
in ``N``.

Reads are invisible: a reader snapshots the slots and picks a version from
at most ``N + 1`` candidates (see :mod:`nbfeb.lsa`).
"""

from __future__ import annotations

import enum
import threading
import time
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .feb_memory import BOTTOM, FebMemory, is_null_link
from .lsa import Clock, Mode, ValidityRange, VersionView, lsa_commit, lsa_open, lsa_start
from .reclaim import EpochManager, sweep

ACTIVE, COMMITTED, ABORTED = 1, 2, 3
STATUS_NAMES = {0: "Unset", ACTIVE: "Active", COMMITTED: "Committed", ABORTED: "Aborted"}

# The zero pattern also reads as ⊥ in link words.  Strict mode resets links
# to (0, set): the set flag makes every later TFAS on the link fail, so
# nothing can be appended behind a retired locator, and the zero tells a
# retired end of chain from a live one.
RESET_ZERO = 0

_TS_BITS = 32
_TS_MASK = (1 << _TS_BITS) - 1


def pack_slot(loc_id: int, ts: int) -> int:
    if not 0 <= loc_id < (1 << 32) - 1 or not 0 <= ts <= _TS_MASK:
        raise OverflowError("slot field out of range")
    return (loc_id << _TS_BITS) | ts


def unpack_slot(value: int) -> tuple[int, int]:
    if value == BOTTOM:
        return 0, 0
    return value >> _TS_BITS, value & _TS_MASK


class UseAfterFree(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


class Record:
    __slots__ = ("id", "dead")

    def poison(self) -> None:
        self.dead = True


class DataVersion(Record):
    __slots__ = ("data",)

    def __init__(self, data: bytearray) -> None:
        self.data = data
        self.dead = False

    @property
    def value(self) -> int:
        return int.from_bytes(self.data, "little")

    @value.setter
    def value(self, v: int) -> None:
        self.data[:] = v.to_bytes(len(self.data), "little")

    def poison(self) -> None:
        self.dead = True
        self.data = None

    def __repr__(self) -> str:
        return f"<data {self.id} {self.value if not self.dead else 'freed'}>"


class Locator(Record):
    __slots__ = ("obj", "tx", "old", "new", "cts", "next")

    def __init__(self, obj: int, next_word: int) -> None:
        self.obj = obj
        self.tx: Optional[Transaction] = None
        self.old: Optional[DataVersion] = None
        self.new: Optional[DataVersion] = None
        self.cts = 0
        self.next = next_word
        self.dead = False

    def poison(self) -> None:
        self.dead = True
        self.tx = self.old = self.new = None

    def __repr__(self) -> str:
        return f"<loc {self.id} obj={self.obj} cts={self.cts}>"


class Transaction(Record):
    """Per-attempt transaction record.

    ``status`` and ``cts_word`` are FEB words.  ``status`` is the only field
    other threads may change, and only to Aborted.  ``cts_word`` lets readers
    see that a commit is under way: flag clear means no timestamp has been
    requested yet, ``(⊥, set)`` means one is being requested, ``(ts, set)``
    gives it.
    """

    __slots__ = (
        "stm", "thread", "status", "cts_word", "cts", "lsa", "reads", "read_ts",
        "writes", "owned", "held", "aborted", "abort_cause", "finished", "outcome",
        "start_ts",
    )

    def __init__(self, stm: "Stm", thread: int) -> None:
        self.stm = stm
        self.thread = thread
        self.dead = False
        self.cts = 0
        self.reads: dict[int, DataVersion] = {}
        self.read_ts: dict[int, int] = {}
        self.writes: dict[int, Locator] = {}
        self.owned: list[int] = []
        self.held: dict[str, Locator] = {}
        self.aborted = False
        self.abort_cause: Optional[str] = None
        self.finished = False
        self.outcome: Optional[int] = None

    def abort(self, cause: str) -> None:
        _, flag = self.stm.memory.tfas(self.status, ABORTED)
        self.aborted = True
        if self.abort_cause is None:
            self.abort_cause = cause if not flag else "enemy"

    def announce(self, ts: Optional[int]) -> None:
        self.stm.memory.sas(self.cts_word, BOTTOM if ts is None else ts)

    def poison(self) -> None:
        self.dead = True
        self.lsa = None
        self.reads = self.writes = None

    def __repr__(self) -> str:
        return f"<tx {self.id} thread={self.thread}>"


class Heap:
    """Registry of live records; freed ids stay tombstoned forever."""

    def __init__(self) -> None:
        self._records: dict[int, Record] = {}
        self._next = 1
        self._lock = threading.Lock()
        self.freed = 0

    def add(self, rec: Record) -> Record:
        with self._lock:
            rec.id = self._next
            self._next += 1
            self._records[rec.id] = rec
        return rec

    def get(self, rid: int) -> Record:
        try:
            rec = self._records[rid]
        except KeyError:
            raise UseAfterFree(f"record {rid} is not live") from None
        return rec

    def remove(self, rid: int) -> Record:
        with self._lock:
            rec = self._records.pop(rid)
            self.freed += 1
        return rec

    def published_ids(self) -> list[int]:
        return list(self._records)

    def live(self) -> Iterable[Record]:
        return list(self._records.values())

    def __len__(self) -> int:
        return len(self._records)


@dataclass(eq=False)
class TMObject:
    id: int
    name: str
    slots: list[int]

    def __repr__(self) -> str:
        return f"<TMObj {self.name}>"


# ---------------------------------------------------------------------------
# Contention management
# ---------------------------------------------------------------------------


class Policy(enum.Enum):
    AGGRESSIVE = "aggressive"
    POLITE = "polite"
    TIMID = "timid"


POLITE_RETRIES = 4


@dataclass(frozen=True)
class ContentionDecision:
    proceed: bool
    backoff: int = 0  # >0: wait this many units, then look again


def cm_decide(policy: Policy, me: Transaction, enemy: Transaction, attempt: int) -> ContentionDecision:
    if policy is Policy.AGGRESSIVE:
        return ContentionDecision(True)
    if policy is Policy.TIMID:
        return ContentionDecision(False)
    if attempt < POLITE_RETRIES:
        return ContentionDecision(False, backoff=2**attempt)
    return ContentionDecision(True)


# ---------------------------------------------------------------------------
# The STM
# ---------------------------------------------------------------------------


class Stm:
    def __init__(
        self,
        nthreads: int,
        *,
        memory: Optional[FebMemory] = None,
        payload_width: int = 8,
        strict: bool = True,
        policy: Policy = Policy.AGGRESSIVE,
        reclaim: bool = True,
        sweep_every: int = 32,
    ) -> None:
        if nthreads < 1:
            raise ValueError("need at least one thread")
        self.nthreads = nthreads
        self.memory = memory if memory is not None else FebMemory()
        self.clock = Clock(self.memory)
        self.payload_width = payload_width
        self.strict = strict
        self.policy = policy
        self.reclaim = reclaim
        self.sweep_every = sweep_every
        self.heap = Heap()
        self.epochs = EpochManager(self._free_record)
        self.pause: Callable[[int], None] = lambda units: time.sleep(units * 1e-5)
        self.probe: Optional[Callable[..., None]] = None
        self.last_find_head_iterations = 0
        self.stats: Counter[str] = Counter()
        self._stats_lock = threading.Lock()
        self._objects: dict[int, TMObject] = {}
        self._current: dict[int, Transaction] = {}
        self._finished_since_sweep = 0
        self._sweep_lock = threading.Lock()
        self._bootstrap = self._make_bootstrap()

    # -- helpers ----------------------------------------------------------

    def _count(self, key: str, n: int = 1) -> None:
        with self._stats_lock:
            self.stats[key] += n

    def _make_bootstrap(self) -> Transaction:
        tx = self.heap.add(Transaction(self, -1))
        tx.status = self.memory.alloc(COMMITTED, True)
        tx.cts_word = self.memory.alloc(0, True)
        tx.finished = True
        tx.outcome = COMMITTED
        return tx

    def _new_data(self, data: bytes, tx: Optional[Transaction] = None) -> DataVersion:
        rec = self.heap.add(DataVersion(bytearray(data)))
        if tx is not None:
            tx.owned.append(rec.id)
        return rec

    def _locator(self, rid: int) -> Locator:
        rec = self.heap.get(rid)
        if not isinstance(rec, Locator) or rec.dead:
            raise UseAfterFree(f"record {rid} is not a live locator")
        return rec

    def _status(self, tx: Transaction) -> int:
        if tx.dead:
            raise UseAfterFree(f"transaction {tx.id} was freed")
        return self.memory.load(tx.status)[0]

    def _commit_ts(self, tx: Transaction) -> int:
        return self.memory.load(tx.cts_word)[0]

    def _free_record(self, rid: int) -> None:
        rec = self.heap.remove(rid)
        if isinstance(rec, Locator):
            self.memory.free(rec.next)
        elif isinstance(rec, Transaction):
            self.memory.free(rec.status)
            self.memory.free(rec.cts_word)
        rec.poison()

    # -- objects ----------------------------------------------------------

    def create_object(self, initial: int | bytes = 0, name: Optional[str] = None) -> TMObject:
        """Make an object whose single initial version has timestamp 0."""
        if isinstance(initial, int):
            initial = initial.to_bytes(self.payload_width, "little")
        if len(initial) != self.payload_width:
            raise ValueError(f"payload must be {self.payload_width} bytes")
        obj_id = len(self._objects) + 1
        loc = self.heap.add(Locator(obj_id, self.memory.alloc(BOTTOM, False)))
        loc.tx = self._bootstrap
        loc.new = self._new_data(initial)
        loc.cts = 0
        slots = [self.memory.alloc(0, False) for _ in range(self.nthreads)]
        self.memory.sas(slots[0], pack_slot(loc.id, 0))
        obj = TMObject(obj_id, name or f"o{obj_id}", slots)
        self._objects[obj_id] = obj
        return obj

    def objects(self) -> list[TMObject]:
        return list(self._objects.values())

    def object(self, obj_id: int) -> TMObject:
        return self._objects[obj_id]

    # -- snapshot & head --------------------------------------------------

    def snapshot_slots(self, obj: TMObject) -> list[tuple[int, int]]:
        """Atomic view of all slots by double collect.

        Slots are single-writer and every write installs a never-before-seen
        locator id, so two identical consecutive collects were both the state
        at any instant between them.
        """
        load = self.memory.load
        if len(obj.slots) == 1:
            return [unpack_slot(load(obj.slots[0])[0])]
        first = [load(w)[0] for w in obj.slots]
        while True:
            second = [load(w)[0] for w in obj.slots]
            if second == first:
                return [unpack_slot(v) for v in second]
            first = second

    def find_head(self, obj: TMObject, held: Optional[dict] = None) -> Locator:
        iterations = 0
        while True:
            iterations += 1
            start = self.snapshot_slots(obj)
            order = sorted((s for s in start if s[0]), key=lambda s: -s[1])
            for loc_id, _ in order:
                tmp, end = self._walk(loc_id, held)
                # a walk ending on a zero link met a retired locator (strict mode)
                if end != RESET_ZERO or not self.strict:
                    break
            else:
                continue
            again = self.snapshot_slots(obj)
            latest_ts = max(ts for loc, ts in again if loc)
            if tmp.cts >= latest_ts:
                self.last_find_head_iterations = iterations
                if self.probe is not None:
                    self.probe("find_head", obj=obj, head=tmp, iterations=iterations)
                return tmp

    def _walk(self, loc_id: int, held: Optional[dict]) -> tuple[Locator, int]:
        tmp = self._locator(loc_id)
        while True:
            if held is not None:
                held["tmp"] = tmp
            succ, _ = self.memory.load(tmp.next)
            if is_null_link(succ):
                return tmp, succ
            tmp = self._locator(succ)

    # -- version discovery ------------------------------------------------

    def versions(self, obj: TMObject, me: Optional[Transaction] = None) -> list[VersionView]:
        """Versions of ``obj`` with known validity ranges, oldest first.

        Every committed slot locator contributes its old version with the
        exact range ``[old ts, commit ts)``.  The newest version known is
        open-ended unless a transaction built on it is already committing.
        A committer whose timestamp is not yet visible is aborted, so its
        timestamp cannot fall inside a range handed out here.
        """
        while True:
            snap = self.snapshot_slots(obj)
            closed: dict[int, VersionView] = {}
            candidates: dict[int, DataVersion] = {}
            pending: list[tuple[int, int]] = []
            retry = False
            for loc_id in dict.fromkeys(loc for loc, _ in snap if loc):
                loc = self._locator(loc_id)
                tx = loc.tx
                st = self._status(tx)
                if st == COMMITTED:
                    c = self._commit_ts(tx)
                    if loc.old is not None and loc.cts < c:
                        closed[loc.cts] = VersionView(loc.old, loc.cts, ValidityRange(loc.cts, c - 1))
                    candidates[c] = loc.new
                    continue
                candidates.setdefault(loc.cts, loc.old)
                if st == ACTIVE and tx is not me:
                    ts, committing = self._pending_ts(tx)
                    if committing:
                        if ts is None:
                            retry = True
                            break
                        pending.append((loc.cts, ts))
            if retry:
                continue
            latest = max(candidates)
            later = [ts for base, ts in pending if base == latest and ts > latest]
            upper = min(later) - 1 if later else None
            views = [v for ts, v in sorted(closed.items()) if ts != latest]
            views.append(VersionView(candidates[latest], latest, ValidityRange(latest, upper)))
            return views

    def _pending_ts(self, tx: Transaction) -> tuple[Optional[int], bool]:
        """(timestamp, committing) for an active transaction.

        A committer caught between announcing and ticking gets two more looks
        before it is aborted.
        """
        for _ in range(3):
            value, flag = self.memory.load(tx.cts_word)
            if not flag:
                return None, False
            if value != BOTTOM:
                return value, True
        self.abort_enemy(tx)
        return None, True

    def valid_at(self, obj: TMObject, ts_version: int, t: int, me: Optional[Transaction] = None) -> bool:
        return any(
            v.commit_ts == ts_version and v.range.contains(t) for v in self.versions(obj, me)
        )

    def _revalidate(self, tx: Transaction, t: int) -> bool:
        return all(self.valid_at(self._objects[key], ts, t, tx) for key, ts in tx.lsa.read_set)

    # -- transactions -----------------------------------------------------

    def start(self, thread: int) -> Transaction:
        if not 0 <= thread < self.nthreads:
            raise ValueError(f"thread index {thread} out of range")
        self.epochs.pin(thread)
        tx = self.heap.add(Transaction(self, thread))
        tx.owned.append(tx.id)
        tx.status = self.memory.alloc()
        tx.cts_word = self.memory.alloc()
        self._current[thread] = tx
        self.memory.sac(tx.status, ACTIVE)
        tx.start_ts = self.clock.now()
        lsa_start(tx, tx.start_ts)
        return tx

    def _usable(self, tx: Transaction) -> bool:
        if tx.finished:
            raise RuntimeError("transaction already finished")
        return not tx.aborted

    def open_read(self, tx: Transaction, obj: TMObject) -> Optional[DataVersion]:
        """Return a version of ``obj`` consistent with ``tx``'s view, or None on abort."""
        if not self._usable(tx):
            return None
        if obj.id in tx.writes:
            return tx.writes[obj.id].new
        if obj.id in tx.reads:
            return tx.reads[obj.id]
        now = self.clock.now()
        view = lsa_open(
            tx,
            self.versions(obj, tx),
            Mode.READ,
            now=now,
            extend=lambda t: self._revalidate(tx, t),
            key=obj.id,
        )
        if view is None:
            return None
        if self._status(tx) == ABORTED:
            tx.aborted = True
            tx.abort_cause = tx.abort_cause or "enemy"
            return None
        tx.reads[obj.id] = view.data
        tx.read_ts[obj.id] = view.commit_ts
        return view.data

    def open_write(self, tx: Transaction, obj: TMObject) -> Optional[DataVersion]:
        """Append a fresh locator for ``tx`` and return its private copy, or None on abort."""
        if not self._usable(tx):
            return None
        if obj.id in tx.writes:
            return tx.writes[obj.id].new
        i = tx.thread
        mem = self.memory
        new_loc = self.heap.add(Locator(obj.id, mem.alloc()))
        tx.owned.append(new_loc.id)
        held = tx.held
        held["new"] = new_loc
        attempt = 0
        try:
            while True:
                now = self.clock.now()
                head = self.find_head(obj, held)
                held["head"] = head
                held.pop("tmp", None)
                base = None
                for _ in range(2):
                    st = self._status(head.tx)
                    if st == COMMITTED:
                        base = head.new, self._commit_ts(head.tx)
                        break
                    if st == ABORTED:
                        base = head.old, head.cts
                        break
                    decision = cm_decide(self.policy, tx, head.tx, attempt)
                    attempt += 1
                    if decision.backoff:
                        self._count("backoffs")
                        self.pause(decision.backoff)
                        continue
                    if not decision.proceed:
                        tx.abort("cm")
                        return None
                    self.abort_enemy(head.tx)
                if base is None:
                    continue
                old_data, cts = base
                new_loc.tx = tx
                new_loc.old = old_data
                new_loc.cts = cts
                new_loc.new = self._new_data(old_data.data, tx)
                mem.sac(new_loc.next, BOTTOM)
                view = lsa_open(
                    tx,
                    [VersionView(old_data, cts, ValidityRange(cts))],
                    Mode.WRITE,
                    now=now,
                    extend=lambda t: self._revalidate(tx, t),
                    key=obj.id,
                )
                if view is None:
                    return None
                if self._status(tx) == ABORTED:
                    tx.aborted = True
                    tx.abort_cause = tx.abort_cause or "enemy"
                    return None
                prev, flag = mem.tfas(head.next, new_loc.id)
                if flag:
                    continue  # someone else appended first
                if self.strict and prev == RESET_ZERO:
                    # only reachable if a retired link was left claimable
                    self._reset_link(new_loc)
                    tx.abort("strict")
                    return None
                old_id, _ = unpack_slot(mem.load(obj.slots[i])[0])
                mem.sas(obj.slots[i], pack_slot(new_loc.id, cts))
                if old_id:
                    old_loc = self._locator(old_id)
                    held["old"] = old_loc
                    self._reset_link(old_loc)
                for j in range(self.nthreads):
                    if j == i:
                        continue
                    lj, tsj = unpack_slot(mem.load(obj.slots[j])[0])
                    if lj and tsj < cts:
                        self._reset_link(self._locator(lj))
                tx.writes[obj.id] = new_loc
                tx.lsa.write_set.append((obj.id, new_loc, cts))
                if self.strict:
                    latest = max(ts for loc, ts in self.snapshot_slots(obj) if loc)
                    if cts < latest:
                        tx.abort("strict")
                        return None
                return new_loc.new
        finally:
            held.clear()

    def _reset_link(self, loc: Locator) -> None:
        if self.strict:
            self.memory.sas(loc.next, RESET_ZERO)
        else:
            self.memory.sac(loc.next, BOTTOM)

    def abort_enemy(self, victim: Transaction) -> int:
        """Try to abort ``victim``; returns the status it ends up with."""
        if victim.dead:
            raise UseAfterFree(f"transaction {victim.id} was freed")
        prev, flag = self.memory.tfas(victim.status, ABORTED)
        if not flag:
            self._count("enemy_aborts")
            return ABORTED
        return prev

    def commit(self, tx: Transaction) -> int:
        """Finish ``tx``.  Read-only transactions commit without touching shared memory."""
        if tx.finished:
            return tx.outcome
        if tx.aborted:
            outcome = ABORTED
        elif not tx.writes:
            outcome = COMMITTED
        else:
            ts = lsa_commit(
                tx,
                self.clock,
                lambda key, ts_v, t: self.valid_at(self._objects[key], ts_v, t, tx),
            )
            if ts is None:
                outcome = ABORTED
            else:
                tx.cts = ts
                _, flag = self.memory.tfas(tx.status, COMMITTED)
                if flag:
                    tx.aborted = True
                    tx.abort_cause = tx.abort_cause or "enemy"
                    outcome = ABORTED
                else:
                    outcome = COMMITTED
        self._finish(tx, outcome)
        return outcome

    def abort(self, tx: Transaction) -> int:
        """Give up on ``tx`` voluntarily."""
        if not tx.finished:
            if not tx.aborted:
                tx.abort("user")
            self._finish(tx, ABORTED)
        return tx.outcome

    def _finish(self, tx: Transaction, outcome: int) -> None:
        tx.finished = True
        tx.outcome = outcome
        if outcome == COMMITTED:
            self._count("commits")
            if not tx.writes:
                self._count("read_only_commits")
        else:
            self._count("aborts")
            self._count(f"aborts_{tx.abort_cause or 'unknown'}")
        if self._current.get(tx.thread) is tx:
            del self._current[tx.thread]
        self.epochs.unpin(tx.thread)
        if self.reclaim:
            with self._stats_lock:
                self._finished_since_sweep += 1
                due = self._finished_since_sweep >= self.sweep_every
                if due:
                    self._finished_since_sweep = 0
            if due:
                self.collect()

    def collect(self) -> int:
        """Retire unreachable records and free those past their grace period."""
        if not self._sweep_lock.acquire(blocking=False):
            return 0
        try:
            return sweep(self)
        finally:
            self._sweep_lock.release()

    # -- audit support ----------------------------------------------------

    def in_flight_ids(self) -> set[int]:
        ids: set[int] = set()
        for tx in list(self._current.values()):
            ids.update(tx.owned)
        return ids

    def held_locators(self, obj: TMObject) -> list[Locator]:
        out = []
        for tx in list(self._current.values()):
            out.extend(loc for loc in list(tx.held.values()) if loc.obj == obj.id)
        return out

    def current(self, thread: int) -> Optional[Transaction]:
        return self._current.get(thread)

    def peek_slot(self, obj: TMObject, j: int) -> tuple[Optional[Locator], int]:
        loc_id, ts = unpack_slot(self.memory.peek(obj.slots[j])[0])
        return (self._locator(loc_id) if loc_id else None), ts

    def peek_next(self, loc: Locator) -> Optional[Locator]:
        value, _ = self.memory.peek(loc.next)
        return None if is_null_link(value) else self._locator(value)

    def audit_chains(self, obj: TMObject) -> list[str]:
        """Problems with ``obj``'s reachable list: falling timestamps or shared successors."""
        from .reclaim import reachable_locators

        problems = []
        pred: dict[int, int] = {}
        for loc in sorted(reachable_locators(self, obj), key=lambda l: l.id):
            succ = self.peek_next(loc)
            if succ is None:
                continue
            if succ.cts < loc.cts:
                problems.append(f"locator {loc.id} (cts {loc.cts}) links to {succ.id} (cts {succ.cts})")
            if succ.id in pred:
                problems.append(f"locator {succ.id} linked from both {pred[succ.id]} and {loc.id}")
            pred[succ.id] = loc.id
        return problems

    def unreclaimed_locators(self, obj: TMObject) -> int:
        return sum(1 for r in self.heap.live() if isinstance(r, Locator) and r.obj == obj.id)

    def peek_value(self, obj: TMObject) -> DataVersion:
        """Current committed version of ``obj`` read without side effects."""
        best_ts, best = -1, None
        for j in range(self.nthreads):
            loc, _ = self.peek_slot(obj, j)
            if loc is None:
                continue
            st = self.memory.peek(loc.tx.status)[0]
            if st == COMMITTED:
                ts, data = self.memory.peek(loc.tx.cts_word)[0], loc.new
            else:
                ts, data = loc.cts, loc.old
            if ts > best_ts:
                best_ts, best = ts, data
        return best

    def dump(self, obj: TMObject) -> dict:
        """JSON-ready picture of an object's slots and reachable locators."""
        slots = []
        for j in range(self.nthreads):
            loc, ts = self.peek_slot(obj, j)
            slots.append({"thread": j, "loc": loc.id if loc else None, "ts": ts})
        from .reclaim import reachable_locators

        locs = []
        for loc in sorted(reachable_locators(self, obj), key=lambda l: l.id):
            nxt, flag = self.memory.peek(loc.next)
            locs.append(
                {
                    "id": loc.id,
                    "tx": loc.tx.id,
                    "status": STATUS_NAMES[self.memory.peek(loc.tx.status)[0]],
                    "cts": loc.cts,
                    "next": None if is_null_link(nxt) else nxt,
                    "next_flag": int(flag),
                }
            )
        return {"object": obj.name, "slots": slots, "locators": locs}
