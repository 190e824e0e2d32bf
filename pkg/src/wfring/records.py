"""Per-thread helping state for the slow path.

Each registered thread owns one :class:`ThreadRecord` per ring.  The record
has two kinds of fields:

* private fields (``next_check``, ``next_tid``, the stat counters) that only
  the owning thread touches, and
* shared request fields published when the thread falls back to the slow
  path.  Publication follows a sequence-lock discipline: the owner bumps
  ``seq1`` when a request completes and writes ``seq2 = seq1`` when a new
  one opens, so a helper's snapshot is valid only while ``seq1 == seq2``.

``local_tail`` / ``local_head`` carry the request's current position in the
ring counters.  Two flag bits are stolen from the top of those words:

* ``FIN`` -- the request is finalized; cooperating threads must stop
  advancing counters on its behalf.
* ``INC`` -- a tentative position was written in phase 1 of the shared
  counter increment and phase 2 has not cleared it yet.

``counter_of`` strips both flags.  Ring orders are capped well below the
flag bits, so flags can never collide with counter bits.
"""

from __future__ import annotations

from .atomics import AtomicWord

__all__ = ["FIN", "INC", "COUNTER_MASK", "counter_of", "HelpRound", "ThreadRecord"]

# Local counter words follow a 64-bit word convention: FIN is the top bit,
# INC the one below, and everything underneath is counter.
FIN = 1 << 63
INC = 1 << 62
COUNTER_MASK = INC - 1


def counter_of(word: int) -> int:
    """Counter bits of a local position word, with FIN/INC masked off."""
    return word & COUNTER_MASK


class HelpRound:
    """Published descriptor for phase 2 of one shared-counter increment.

    When a thread installs ``cnt + 1`` into a global counter it publishes
    ``(local, cnt)`` here first, so any other thread can finish clearing the
    INC flag from ``local`` if the installer stalls.  ``seq1``/``seq2``
    guard torn reads exactly like the request fields on the thread record.
    """

    __slots__ = ("seq1", "local", "cnt", "seq2")

    def __init__(self) -> None:
        self.seq1 = 1
        self.local: AtomicWord | None = None
        self.cnt = 0
        self.seq2 = 0


class ThreadRecord:
    """Helping state and instrumentation counters for one thread on one ring."""

    __slots__ = (
        "tid",
        # private helper cursor
        "next_check",
        "next_tid",
        # shared request fields
        "phase2",
        "seq1",
        "enqueue",
        "pending",
        "local_tail",
        "init_tail",
        "local_head",
        "init_head",
        "index",
        "seq2",
        # instrumentation (owner-written, racily readable)
        "enq_fast_retries",
        "deq_fast_retries",
        "slow_enqueues",
        "slow_dequeues",
        "faa_rounds",
        "help_dispatches",
        "threshold_resets",
        "slot_writes",
        "deq_iters",
        "max_slot_loop",
    )

    def __init__(self, tid: int, num_threads: int, help_delay: int) -> None:
        self.tid = tid
        self.next_check = help_delay
        self.next_tid = (tid + 1) % num_threads
        self.phase2 = HelpRound()
        self.seq1 = 1
        self.enqueue = False
        self.pending = False
        # FIN with a zero counter marks "no request ever opened": requests
        # always start from a real fetch-and-add result, which is >= 2n, so
        # a stale scan can never match counter 0.
        self.local_tail = AtomicWord(FIN)
        self.init_tail = 0
        self.local_head = AtomicWord(FIN)
        self.init_head = 0
        self.index = 0
        self.seq2 = 0
        self.enq_fast_retries = 0
        self.deq_fast_retries = 0
        self.slow_enqueues = 0
        self.slow_dequeues = 0
        self.faa_rounds = 0
        self.help_dispatches = 0
        self.threshold_resets = 0
        self.slot_writes = 0
        self.deq_iters = 0
        self.max_slot_loop = 0

    STAT_FIELDS = (
        "enq_fast_retries",
        "deq_fast_retries",
        "slow_enqueues",
        "slow_dequeues",
        "faa_rounds",
        "help_dispatches",
        "threshold_resets",
        "slot_writes",
        "deq_iters",
    )

    def stats(self) -> dict:
        out = {name: getattr(self, name) for name in self.STAT_FIELDS}
        out["max_slot_loop"] = self.max_slot_loop
        return out
