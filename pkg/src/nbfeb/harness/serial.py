"""Serial-witness search for small sets of committed transactions."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence


@dataclass
class TxLog:
    """What one transaction did, as seen by its thread.

    ``ops`` holds ``(op, object, argument, observed)`` with op one of
    ``read``, ``write`` or ``inc``; ``observed`` is the value the
    transaction saw (None for blind writes).  ``began`` and ``ended`` are
    global step counts used for real-time order.
    """

    thread: int
    ops: list[tuple[str, str, Optional[int], Optional[int]]] = field(default_factory=list)
    committed: bool = False
    began: int = 0
    ended: int = 0


def apply_serially(
    state: dict[str, int], tx: TxLog, check: bool = True
) -> bool:
    """Replay ``tx`` on ``state`` in place; False if an observation disagrees."""
    for op, obj, arg, seen in tx.ops:
        if op == "read":
            if check and seen != state[obj]:
                return False
        elif op == "write":
            state[obj] = arg
        elif op == "inc":
            if check and seen != state[obj]:
                return False
            state[obj] += arg
        else:
            raise ValueError(f"unknown op {op!r}")
    return True


def serial_witness(
    initial: Mapping[str, int],
    txs: Sequence[TxLog],
    final: Optional[Mapping[str, int]] = None,
) -> Optional[list[int]]:
    """Order of committed transactions that explains everything, or None.

    The order must respect real time (a transaction that ended before
    another began comes first), reproduce every value each transaction
    observed, and, when ``final`` is given, end in that state.
    """
    committed = [k for k, t in enumerate(txs) if t.committed]
    for perm in itertools.permutations(committed):
        pos = {k: i for i, k in enumerate(perm)}
        if any(
            txs[a].ended < txs[b].began and pos[a] > pos[b]
            for a in committed
            for b in committed
        ):
            continue
        state = dict(initial)
        if not all(apply_serially(state, txs[k]) for k in perm):
            continue
        if final is not None and any(state[o] != v for o, v in final.items()):
            continue
        return list(perm)
    return None
