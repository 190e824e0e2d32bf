"""History recording and an exhaustive FIFO linearizability checker.

Small concurrent histories recorded from a live queue are checked against a
sequential FIFO: the checker searches for an ordering of the operations that
(a) respects real-time precedence (one op's response before another's
invocation) and (b) replays legally on a FIFO queue.  The search walks
minimal-candidate frontiers with memoization on (linearized-set, queue
state), which is exhaustive and fast for the intended history sizes
(tens of events).
"""

from __future__ import annotations

import itertools
import json
import threading
from dataclasses import dataclass

__all__ = ["HistoryEvent", "HistoryRecorder", "Operation", "check_linearizable"]

EMPTY = "__empty__"  # dequeue-returned-empty marker in histories


@dataclass(frozen=True)
class HistoryEvent:
    thread: int
    kind: str  # "invoke" | "respond"
    op: str  # "enqueue" | "dequeue"
    value: object
    ts: int  # global total order, not wall time

    def to_json(self) -> dict:
        return {
            "thread": self.thread,
            "kind": self.kind,
            "op": self.op,
            "value": self.value,
            "ts": self.ts,
        }


class HistoryRecorder:
    """Collects invoke/respond events with a global logical clock.

    ``itertools.count`` hands out timestamps with a single C call, so the
    recorded order is a real total order even under free interleaving.
    """

    def __init__(self) -> None:
        self._clock = itertools.count()
        self._events: list[HistoryEvent] = []
        self._lock = threading.Lock()

    def invoke(self, thread: int, op: str, value=None) -> None:
        ev = HistoryEvent(thread, "invoke", op, value, next(self._clock))
        with self._lock:
            self._events.append(ev)

    def respond(self, thread: int, op: str, value=None) -> None:
        ev = HistoryEvent(thread, "respond", op, value, next(self._clock))
        with self._lock:
            self._events.append(ev)

    def enqueue(self, ring, rec, index: int) -> None:
        self.invoke(rec.tid, "enqueue", index)
        ring.enqueue(rec, index)
        self.respond(rec.tid, "enqueue", index)

    def dequeue(self, ring, rec):
        self.invoke(rec.tid, "dequeue")
        got = ring.dequeue(rec)
        self.respond(rec.tid, "dequeue", EMPTY if got is None else got)
        return got

    def history(self) -> list[HistoryEvent]:
        return sorted(self._events, key=lambda e: e.ts)

    def dump_json(self) -> str:
        return json.dumps([e.to_json() for e in self.history()], indent=2)


@dataclass
class Operation:
    op: str
    value: object
    invoke_ts: int
    respond_ts: int
    thread: int


def pair_operations(history: list[HistoryEvent]) -> list[Operation]:
    """Match invoke/respond events per thread into completed operations."""
    open_by_thread: dict[int, HistoryEvent] = {}
    ops: list[Operation] = []
    for ev in sorted(history, key=lambda e: e.ts):
        if ev.kind == "invoke":
            if ev.thread in open_by_thread:
                raise ValueError(f"thread {ev.thread} invoked twice without responding")
            open_by_thread[ev.thread] = ev
        else:
            inv = open_by_thread.pop(ev.thread, None)
            if inv is None or inv.op != ev.op:
                raise ValueError(f"respond without matching invoke on thread {ev.thread}")
            ops.append(Operation(ev.op, ev.value, inv.ts, ev.ts, ev.thread))
    if open_by_thread:
        raise ValueError("history is incomplete: some operations never responded")
    return ops


def check_linearizable(history: list[HistoryEvent]) -> bool:
    """True iff the history has a sequential FIFO witness.

    Exhaustive search over linearization orders.  At every step an operation
    is eligible if all operations that responded before it was invoked are
    already placed (real-time order), and applying it to the FIFO state is
    legal.  Memoized on the (placed-set, queue-state) pair.
    """
    ops = pair_operations(history)
    total = len(ops)
    if total == 0:
        return True
    if total > 24:
        raise ValueError("checker is exhaustive; keep histories small (<= 24 ops)")

    respond_ts = [o.respond_ts for o in ops]
    seen_states: set = set()

    def eligible(i: int, placed_mask: int) -> bool:
        inv = ops[i].invoke_ts
        for j in range(total):
            if not placed_mask >> j & 1 and respond_ts[j] < inv:
                return False
        return True

    def search(placed_mask: int, queue: tuple) -> bool:
        if placed_mask == (1 << total) - 1:
            return True
        key = (placed_mask, queue)
        if key in seen_states:
            return False
        seen_states.add(key)
        for i in range(total):
            if placed_mask >> i & 1 or not eligible(i, placed_mask):
                continue
            o = ops[i]
            if o.op == "enqueue":
                if search(placed_mask | 1 << i, queue + (o.value,)):
                    return True
            elif o.value == EMPTY:
                if not queue and search(placed_mask | 1 << i, queue):
                    return True
            else:
                if queue and queue[0] == o.value and search(placed_mask | 1 << i, queue[1:]):
                    return True
        return False

    return search(0, ())
