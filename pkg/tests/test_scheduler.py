import itertools

from nbfeb.feb_memory import FebMemory, Kind
from nbfeb.harness.scheduler import ReplayChooser, VirtualScheduler, explore_schedules


def two_writers(sched):
    mem = FebMemory()
    sched.attach(mem)
    w = mem.alloc(0, False)
    seen = []

    def body(t):
        for k in range(2):
            mem.sas(w, 10 * t + k)
            seen.append(mem.peek(w)[0])

    sched.spawn(body, 1)
    sched.spawn(body, 2)
    return lambda: tuple(seen)


def test_same_seed_same_interleaving():
    def once(seed):
        sched = VirtualScheduler(seed=seed)
        finish = two_writers(sched)
        sched.run()
        return finish()

    assert once(4) == once(4)
    assert len({once(s) for s in range(30)}) > 1


def test_results_are_collected_in_spawn_order():
    sched = VirtualScheduler(FebMemory(), seed=1)
    sched.spawn(lambda: "a")
    sched.spawn(lambda x: x * 2, 21)
    assert sched.run() == ["a", 42]


def test_halt_rule_freezes_a_task_before_its_primitive():
    mem = FebMemory()
    sched = VirtualScheduler(mem, seed=0)
    w = mem.alloc(0, False)
    sched.halt_rule = lambda task, kind, word: task.index == 0 and kind is Kind.SAS
    sched.spawn(lambda: (mem.load(w), mem.sas(w, 9)))
    sched.spawn(lambda: mem.sas(w, 3))
    sched.run()
    assert [t.index for t in sched.halted()] == [0]
    assert mem.peek(w) == (3, True)


def test_replay_chooser_follows_prefix_then_keeps_running_task():
    sched = VirtualScheduler(chooser=ReplayChooser([1, 0]), record=True)
    finish = two_writers(sched)
    sched.run()
    chosen = [d.chosen for d in sched.decisions]
    assert chosen[:2] == [1, 0]
    # task 1 starts, is preempted before its first write, and task 0 then runs out
    assert finish() == (10, 11, 20, 21)


def test_zero_bound_runs_each_task_to_completion_in_some_order():
    stats = explore_schedules(two_writers, 0, keep=lambda outcome: True)
    assert stats.schedules == 2
    assert {s.outcome for s in stats.outcomes} == {(10, 11, 20, 21), (20, 21, 10, 11)}


def _interleavings(a, b):
    for picks in itertools.combinations(range(a + b), a):
        yield picks


def test_unbounded_exploration_covers_every_interleaving_once():
    # two tasks of two primitives each: C(4, 2) = 6 distinct interleavings.
    # Several choice sequences can produce the same one (no partial-order
    # reduction), but no choice sequence repeats.
    stats = explore_schedules(two_writers, 10, keep=lambda outcome: True)
    choices = [tuple(s.choices) for s in stats.outcomes]
    assert len(choices) == len(set(choices)) == stats.schedules
    assert len({s.outcome for s in stats.outcomes}) == len(list(_interleavings(2, 2)))
    assert stats.pruned == 0


def test_bound_limits_preemptions():
    stats = explore_schedules(two_writers, 1, keep=lambda outcome: True)
    assert all(s.preemptions <= 1 for s in stats.outcomes)
    assert stats.pruned > 0
    full = explore_schedules(two_writers, 10)
    assert 2 < stats.schedules < full.schedules
