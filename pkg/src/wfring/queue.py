"""Public queue surface: configuration, registration, payload indirection.

:class:`WaitFreeQueue` stores arbitrary payloads by indirection: a ``free``
ring hands out slot indices into a flat ``data`` array, an ``alloc`` ring
carries the indices of live payloads.  Enqueue is "take an index from free,
write the payload, publish the index on alloc"; dequeue is the mirror image.
Neither ring ever overflows because only ``n`` indices exist, so "full" and
"empty" both surface as an empty ring on one side or the other.

Threads must register for a handle before touching a queue; helping scans a
fixed record array, so the thread count is capped at construction.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from .records import ThreadRecord
from .ring import Ring

__all__ = ["QueueConfig", "ThreadHandle", "WaitFreeQueue"]


@dataclass(frozen=True)
class QueueConfig:
    """Construction parameters for a queue or a bare ring.

    ``ring_order`` sets the slot count: ``2**ring_order`` slots holding at
    most ``n = 2**(ring_order - 1)`` items.  ``num_threads`` must not exceed
    ``n``.  The patience values bound fast-path attempts before the
    wait-free fallback; ``scq_mode`` removes the fallback (unbounded
    lock-free retries, helping disabled) and serves as a baseline.
    """

    ring_order: int = 16
    num_threads: int = 8
    patience_enq: int = 16
    patience_deq: int = 64
    help_delay: int = 64
    catchup_bound: int = 8
    scq_mode: bool = False
    line_entries: int = 4
    identity_remap: bool = False

    def __post_init__(self) -> None:
        if not 2 <= self.ring_order <= 61:
            raise ValueError("ring_order must be in [2, 61]")
        n = 1 << (self.ring_order - 1)
        if not 1 <= self.num_threads <= n:
            raise ValueError(f"num_threads must be in [1, {n}] for ring_order {self.ring_order}")
        if self.patience_enq < 0 or self.patience_deq < 0:
            raise ValueError("patience must be >= 0")
        if self.help_delay < 1:
            raise ValueError("help_delay must be >= 1")
        if self.catchup_bound < 1:
            raise ValueError("catchup_bound must be >= 1")

    def make_ring(self) -> Ring:
        return Ring(
            self.ring_order,
            self.num_threads,
            patience_enq=self.patience_enq,
            patience_deq=self.patience_deq,
            help_delay=self.help_delay,
            catchup_bound=self.catchup_bound,
            scq_mode=self.scq_mode,
            line_entries=self.line_entries,
            identity_remap=self.identity_remap,
        )


class ThreadHandle:
    """Per-thread capability for one queue.

    A handle must not be shared between threads that run concurrently; get
    one per worker via :meth:`WaitFreeQueue.register`.
    """

    __slots__ = ("tid", "alloc_rec", "free_rec", "_queue")

    def __init__(self, tid: int, alloc_rec: ThreadRecord, free_rec: ThreadRecord, queue) -> None:
        self.tid = tid
        self.alloc_rec = alloc_rec
        self.free_rec = free_rec
        self._queue = queue

    def stats(self) -> dict:
        """This thread's instrumentation counters, summed over both rings."""
        alloc = self.alloc_rec.stats()
        free = self.free_rec.stats()
        return {
            key: max(alloc[key], free[key]) if key == "max_slot_loop" else alloc[key] + free[key]
            for key in alloc
        }

    def release(self) -> None:
        self._queue.release(self)


class WaitFreeQueue:
    """Bounded MPMC FIFO for arbitrary payloads (capacity ``n``).

    ``dequeue`` returns ``None`` for "empty", so storing ``None`` as a
    payload is not distinguishable from emptiness; wrap it if you need to.
    """

    def __init__(self, config: QueueConfig | None = None, **overrides) -> None:
        if config is None:
            config = QueueConfig(**overrides)
        elif overrides:
            raise TypeError("pass either a QueueConfig or keyword overrides, not both")
        self.config = config
        self.alloc = config.make_ring()
        self.free = config.make_ring()
        self.n = self.free.n
        self.data: list = [None] * self.n
        # Pre-fill the free ring with every index through the audited enqueue
        # path.  A scratch record keeps registered threads' counters at zero;
        # construction is single-threaded so helping state is never consulted.
        scratch = ThreadRecord(0, config.num_threads, config.help_delay)
        for index in range(self.n):
            assert self.free.try_enq(scratch, index) is None
        self._reg_lock = threading.Lock()
        self._free_tids = list(range(config.num_threads - 1, -1, -1))

    def register(self) -> ThreadHandle:
        """Claim a thread id.  Raises when all ``num_threads`` slots are taken."""
        with self._reg_lock:
            if not self._free_tids:
                raise RuntimeError("all thread slots are registered")
            tid = self._free_tids.pop()
        return ThreadHandle(tid, self.alloc.records[tid], self.free.records[tid], self)

    def release(self, handle: ThreadHandle) -> None:
        """Return a thread id to the pool.  The handle must be quiescent."""
        if handle.alloc_rec.pending or handle.free_rec.pending:
            raise RuntimeError("cannot release a handle with a pending help request")
        with self._reg_lock:
            self._free_tids.append(handle.tid)

    def enqueue(self, handle: ThreadHandle, payload) -> bool:
        """Append a payload; False means the queue is full."""
        index = self.free.dequeue(handle.free_rec)
        if index is None:
            return False
        self.data[index] = payload
        self.alloc.enqueue(handle.alloc_rec, index)
        return True

    def dequeue(self, handle: ThreadHandle):
        """Pop the oldest payload, or ``None`` when the queue is empty."""
        index = self.alloc.dequeue(handle.alloc_rec)
        if index is None:
            return None
        payload = self.data[index]
        self.data[index] = None
        self.free.enqueue(handle.free_rec, index)
        return payload

    def stats(self) -> dict:
        """Aggregate counters over both rings and all thread records."""
        alloc = self.alloc.stats()
        free = self.free.stats()
        return {
            key: max(alloc[key], free[key]) if key == "max_slot_loop" else alloc[key] + free[key]
            for key in alloc
        }
