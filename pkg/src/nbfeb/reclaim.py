"""Epoch-based deferred reclamation for locators, transactions and versions.

Objects are retired once they can no longer be reached from any shared
root; they are freed only after every thread that might still hold a
reference has left the epoch in which they were retired.  A thread pins
itself for the whole of a transaction, so anything it picked up while
pinned stays valid until it unpins.
"""

from __future__ import annotations

import threading
from collections import defaultdict
from typing import Callable, Hashable, Iterable


class ReclamationError(RuntimeError):
    """Contract violation: nested pin, unbalanced unpin or double retire."""


class EpochManager:
    def __init__(self, free: Callable[[Hashable], None]) -> None:
        self._free = free
        self._lock = threading.RLock()
        self.epoch = 0
        self._local: dict[Hashable, int] = {}
        self._active: dict[Hashable, bool] = {}
        self._limbo: dict[int, list[Hashable]] = defaultdict(list)
        self._retired: set[Hashable] = set()
        self.freed_total = 0

    def pin(self, thread: Hashable) -> None:
        with self._lock:
            if self._active.get(thread):
                raise ReclamationError(f"thread {thread!r} is already pinned")
            self._active[thread] = True
            self._local[thread] = self.epoch

    def unpin(self, thread: Hashable) -> None:
        with self._lock:
            if not self._active.get(thread):
                raise ReclamationError(f"thread {thread!r} is not pinned")
            self._active[thread] = False
            self.try_advance()
            self.collect()

    def is_pinned(self, thread: Hashable) -> bool:
        return bool(self._active.get(thread))

    def retire(self, obj: Hashable) -> None:
        with self._lock:
            if obj in self._retired:
                raise ReclamationError(f"{obj!r} retired twice")
            self._retired.add(obj)
            self._limbo[self.epoch].append(obj)

    def is_retired(self, obj: Hashable) -> bool:
        return obj in self._retired

    def _pinned_epochs(self) -> list[int]:
        return [self._local[t] for t, on in self._active.items() if on]

    def try_advance(self) -> bool:
        """Move the global epoch forward if every pinned thread has caught up."""
        with self._lock:
            if all(e == self.epoch for e in self._pinned_epochs()):
                self.epoch += 1
                return True
            return False

    def collect(self) -> list[Hashable]:
        """Free every retired object whose grace period has elapsed."""
        with self._lock:
            pinned = self._pinned_epochs()
            oldest = min(pinned) if pinned else None
            freed: list[Hashable] = []
            for e in sorted(self._limbo):
                if oldest is not None and oldest <= e:
                    break
                for obj in self._limbo.pop(e):
                    self._retired.discard(obj)
                    self._free(obj)
                    freed.append(obj)
            self.freed_total += len(freed)
            return freed

    def deferred(self) -> int:
        with self._lock:
            return sum(len(v) for v in self._limbo.values())


def reachable_locators(stm, obj, extra_roots: Iterable = ()) -> set:
    """Locators reachable from ``obj``'s slots (and ``extra_roots``) via links."""
    seen: set = set()
    stack = [stm.peek_slot(obj, j)[0] for j in range(stm.nthreads)]
    stack.extend(extra_roots)
    while stack:
        loc = stack.pop()
        if loc is None or loc in seen:
            continue
        seen.add(loc)
        succ = stm.peek_next(loc)
        if succ is not None:
            stack.append(succ)
    return seen


def audit_live(stm, obj) -> int:
    """Count the locators of ``obj`` that could not be reclaimed right now.

    That is everything reachable through next links from the object's slots
    or from a locator some thread currently holds.
    """
    return len(reachable_locators(stm, obj, stm.held_locators(obj)))


def sweep(stm) -> int:
    """Retire every published record no root can reach any more.

    Roots are the slots plus the locators running transactions hold.  A
    held locator may already be linked into a chain without being in a
    slot yet, and its successors must survive until it is published.
    Records created by transactions still in flight are left alone.
    """
    candidates = stm.heap.published_ids()
    exempt = stm.in_flight_ids()
    marked: set[int] = set()
    for obj in stm.objects():
        for loc in reachable_locators(stm, obj, stm.held_locators(obj)):
            marked.add(loc.id)
            for rec in (loc.tx, loc.old, loc.new):
                if rec is not None:
                    marked.add(rec.id)
    count = 0
    for rid in candidates:
        if rid in marked or rid in exempt or stm.epochs.is_retired(rid):
            continue
        stm.epochs.retire(rid)
        count += 1
    stm.epochs.try_advance()
    stm.epochs.collect()
    return count
