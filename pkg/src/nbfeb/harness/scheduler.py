"""Deterministic cooperative scheduler over greenlets.

Every task runs in its own greenlet.  The scheduler installs itself as the
memory hook, so a task yields control immediately before each shared
primitive; which task runs next is up to a chooser.  With a seeded random
chooser a run is a pure function of its seed; with a replaying chooser the
explorer can enumerate schedules one decision at a time.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import greenlet
from greenlet import getcurrent

from ..feb_memory import FebMemory, Kind


class Deadlock(RuntimeError):
    pass


class StepLimit(RuntimeError):
    pass


@dataclass(eq=False)
class Task:
    index: int
    name: str
    glet: greenlet.greenlet
    done: bool = False
    halted: bool = False
    result: Any = None
    steps: int = 0

    @property
    def runnable(self) -> bool:
        return not (self.done or self.halted)


@dataclass(frozen=True)
class Decision:
    """One scheduling point: who could run, who had been running, who was picked."""

    enabled: tuple[int, ...]
    current: Optional[int]
    chosen: int


Chooser = Callable[[Sequence[Task], Optional[Task]], Task]
# (task, kind, word) -> True to freeze the task just before this primitive
HaltRule = Callable[[Task, Kind, int], bool]


def random_chooser(rng: random.Random) -> Chooser:
    """Uniform choice among the enabled tasks."""

    def choose(enabled: Sequence[Task], current: Optional[Task]) -> Task:
        return enabled[rng.randrange(len(enabled))]

    return choose


class VirtualScheduler:
    def __init__(
        self,
        memory: Optional[FebMemory] = None,
        *,
        seed: Optional[int] = None,
        chooser: Optional[Chooser] = None,
        stickiness: float = 0.0,
        max_steps: int = 10_000_000,
        record: bool = False,
    ) -> None:
        self.rng = random.Random(seed)
        self.choose = chooser or random_chooser(self.rng)
        # keep-running shortcut for the random chooser; skips building the enabled list
        self._stick = stickiness if chooser is None and not record else 0.0
        self.tasks: list[Task] = []
        self.current: Optional[Task] = None
        self.steps = 0
        self.max_steps = max_steps
        self.halt_rule: Optional[HaltRule] = None
        self.decisions: list[Decision] | None = [] if record else None
        self._main = greenlet.getcurrent()
        self._next: Optional[Task] = None
        if memory is not None:
            self.attach(memory)

    def attach(self, memory: FebMemory) -> None:
        memory.hook = self._hook

    def spawn(self, fn: Callable[..., Any], *args: Any, name: Optional[str] = None) -> Task:
        index = len(self.tasks)
        task = Task(index, name or f"t{index}", None)  # type: ignore[arg-type]

        def body() -> None:
            task.result = fn(*args)

        task.glet = greenlet.greenlet(body, parent=self._main)
        self.tasks.append(task)
        return task

    def in_task(self) -> bool:
        return getcurrent() is not self._main

    # -- scheduling points -------------------------------------------------

    def _pick(self, current: Optional[Task]) -> Optional[Task]:
        enabled = [t for t in self.tasks if t.runnable]
        if not enabled:
            return None
        chosen = self.choose(enabled, current)
        if self.decisions is not None:
            self.decisions.append(
                Decision(
                    tuple(t.index for t in enabled),
                    current.index if current is not None and current.runnable else None,
                    chosen.index,
                )
            )
        return chosen

    def _hook(self, kind: Kind, w: int, operand: Optional[int]):
        if getcurrent() is self._main:
            return None
        task = self.current
        if self.halt_rule is not None and self.halt_rule(task, kind, w):
            task.halted = True
            self._next = None
            self._main.switch()
            # back here only after release_halted(); the primitive goes ahead
        if not (self._stick and self.rng.random() < self._stick):
            self._switch()
        task.steps += 1
        self.steps += 1
        if self.steps > self.max_steps:
            raise StepLimit(f"more than {self.max_steps} steps")
        return None

    def yield_point(self) -> None:
        """Offer the processor to another task (no-op outside tasks)."""
        if not self.in_task():
            return
        if self._stick and self.rng.random() < self._stick:
            return
        self._switch()

    def _switch(self) -> None:
        nxt = self._pick(self.current)
        if nxt is self.current:
            return
        self._next = nxt
        self._main.switch()

    def pause(self, units: int) -> None:
        for _ in range(units):
            self.yield_point()

    def run(self) -> list[Any]:
        self._next = self._pick(None)
        while self._next is not None:
            task = self._next
            self.current = task
            self._next = None
            task.glet.switch()
            if task.glet.dead:
                task.done = True
                self._next = self._pick(None)
            elif self._next is None and not task.halted:
                raise Deadlock("task yielded without a successor")  # pragma: no cover
            elif task.halted:
                self._next = self._pick(None)
        return [t.result for t in self.tasks]

    def halted(self) -> list[Task]:
        return [t for t in self.tasks if t.halted]

    def release_halted(self) -> None:
        """Drop the halt rule and let frozen tasks continue at the next run()."""
        self.halt_rule = None
        for t in self.tasks:
            t.halted = False


class ReplayChooser:
    """Follows a fixed prefix of choices, then the non-preempting default.

    The default keeps the running task if it can still run, otherwise it
    takes the lowest-numbered enabled task.
    """

    def __init__(self, prefix: Sequence[int]) -> None:
        self.prefix = list(prefix)
        self.pos = 0

    def __call__(self, enabled: Sequence[Task], current: Optional[Task]) -> Task:
        by_index = {t.index: t for t in enabled}
        if self.pos < len(self.prefix):
            choice = self.prefix[self.pos]
            self.pos += 1
            if choice not in by_index:
                raise RuntimeError("replayed schedule diverged")
            return by_index[choice]
        self.pos += 1
        if current is not None and current.index in by_index:
            return current
        return enabled[0]


@dataclass
class Schedule:
    choices: list[int]
    preemptions: int
    outcome: Any = None


@dataclass
class ExploreStats:
    schedules: int = 0
    max_depth: int = 0
    pruned: int = 0
    outcomes: list[Schedule] = field(default_factory=list)


def explore_schedules(
    program: Callable[[VirtualScheduler], Callable[[], Any]],
    bound: int,
    *,
    limit: Optional[int] = None,
    keep: Callable[[Any], bool] = lambda outcome: False,
) -> ExploreStats:
    """Run ``program`` under every schedule with at most ``bound`` preemptions.

    ``program(sched)`` must set up fresh state, spawn its tasks and return a
    callable that summarizes the finished run.  A preemption is switching
    away from a task that could have continued.  Each schedule is visited
    once: alternatives are only branched off after the replayed prefix.
    Outcomes for which ``keep`` is true are collected.
    """
    stats = ExploreStats()
    stack: list[tuple[list[int], int]] = [([], 0)]
    while stack:
        prefix, cost = stack.pop()
        sched = VirtualScheduler(chooser=ReplayChooser(prefix), record=True)
        finish = program(sched)
        sched.run()
        outcome = finish()
        stats.schedules += 1
        decisions = sched.decisions
        stats.max_depth = max(stats.max_depth, len(decisions))
        if keep(outcome):
            stats.outcomes.append(Schedule([d.chosen for d in decisions], cost, outcome))
        if limit is not None and stats.schedules >= limit:
            break
        running = _preemptions(decisions[: len(prefix)])
        for k in range(len(prefix), len(decisions)):
            d = decisions[k]
            for alt in d.enabled:
                if alt == d.chosen:
                    continue
                extra = 1 if d.current is not None and alt != d.current else 0
                if running + extra > bound:
                    stats.pruned += 1
                    continue
                stack.append(([x.chosen for x in decisions[:k]] + [alt], running + extra))
            if d.current is not None and d.chosen != d.current:
                running += 1
    return stats


def _preemptions(decisions: Sequence[Decision]) -> int:
    return sum(1 for d in decisions if d.current is not None and d.chosen != d.current)
