"""Atomic cells for the ring protocol.

CPython's GIL makes a single attribute read or write atomic, but it does not
make read-modify-write sequences atomic: a thread can be preempted between
the read and the write.  Every cell here therefore funnels all *mutations*
through a per-cell lock, while plain loads stay lock-free:

* ``AtomicWord`` stores one integer in a slot attribute.  Reading ``.value``
  is a single bytecode and returns some value the cell actually held.
* ``AtomicPair`` stores two words as one tuple in a slot attribute.  Reading
  ``.pair`` yields an atomic snapshot of both words -- a torn read mixing two
  different writes is impossible because writers replace the whole tuple.

The pair cell supports mixed-width operations on the same location: a
word-wide fetch-and-add or compare-and-swap on the first word, and a
word-wide OR on the second word, all serialized with full-pair CAS through
the same lock.  This mirrors hardware that combines single-word RMW with
double-width CAS on a contiguous, aligned pair.

Everything behaves as if sequentially consistent: the GIL orders plain
accesses, and the per-cell locks order the RMWs.
"""

from __future__ import annotations

import threading

__all__ = ["AtomicWord", "AtomicPair"]


class AtomicWord:
    """One machine word with atomic load/store/CAS/fetch-add/fetch-or."""

    __slots__ = ("value", "_lock")

    def __init__(self, value: int = 0) -> None:
        self.value = value
        self._lock = threading.Lock()

    def load(self) -> int:
        return self.value

    def store(self, value: int) -> None:
        """Atomically replace the value.

        Goes through the lock so a store cannot land between the read and
        write halves of a concurrent RMW and get silently overwritten.
        """
        lock = self._lock
        lock.acquire()
        self.value = value
        lock.release()

    def cas(self, expect: int, new: int) -> bool:
        """Compare-and-swap; returns True iff the swap happened."""
        lock = self._lock
        lock.acquire()
        ok = self.value == expect
        if ok:
            self.value = new
        lock.release()
        return ok

    def fetch_add(self, delta: int) -> int:
        """Add ``delta`` and return the previous value."""
        lock = self._lock
        lock.acquire()
        old = self.value
        self.value = old + delta
        lock.release()
        return old

    def fetch_or(self, mask: int) -> int:
        """OR ``mask`` into the value and return the previous value."""
        lock = self._lock
        lock.acquire()
        old = self.value
        self.value = old | mask
        lock.release()
        return old

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"AtomicWord({self.value!r})"


class AtomicPair:
    """Two contiguous words loaded and CASed as one unit.

    ``.pair`` is the public snapshot: a 2-tuple ``(first, second)``.  Read it
    directly (a single attribute load is atomic); never assign to it from
    outside this class.
    """

    __slots__ = ("pair", "_lock")

    def __init__(self, first: int = 0, second=None) -> None:
        self.pair = (first, second)
        self._lock = threading.Lock()

    def load(self) -> tuple:
        return self.pair

    def load_first(self) -> int:
        return self.pair[0]

    def store(self, first: int, second) -> None:
        lock = self._lock
        lock.acquire()
        self.pair = (first, second)
        lock.release()

    def cas(self, expect: tuple, new: tuple) -> bool:
        """Double-width CAS: both words must match for the swap to happen."""
        lock = self._lock
        lock.acquire()
        ok = self.pair == expect
        if ok:
            self.pair = new
        lock.release()
        return ok

    def cas_first(self, expect: int, new: int) -> bool:
        """Word CAS on the first word, leaving the second word intact."""
        lock = self._lock
        lock.acquire()
        cur = self.pair
        ok = cur[0] == expect
        if ok:
            self.pair = (new, cur[1])
        lock.release()
        return ok

    def fetch_add_first(self, delta: int) -> int:
        """Fetch-and-add on the first word, leaving the second word intact.

        Coherent with :meth:`cas`: a concurrent double-width CAS that expected
        the old first word fails once this lands.
        """
        lock = self._lock
        lock.acquire()
        cur = self.pair
        old = cur[0]
        self.pair = (old + delta, cur[1])
        lock.release()
        return old

    def or_second(self, mask: int) -> int:
        """Atomic OR on the second word; returns its previous value."""
        lock = self._lock
        lock.acquire()
        cur = self.pair
        old = cur[1]
        self.pair = (cur[0], old | mask)
        lock.release()
        return old

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"AtomicPair{self.pair!r}"
