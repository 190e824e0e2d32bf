"""Bounded wait-free FIFO ring over index values.

The ring stores ``2n`` slots but never holds more than ``n`` live indices;
doubling the capacity is what lets dequeuers overshoot enqueuers without
livelock.  Positions come from monotonically increasing ``head``/``tail``
counters; a position ``p`` maps to slot ``remap(p mod 2n)`` and carries cycle
``p div 2n`` so slot reuse across wraps is unambiguous.

Each slot is an atomic pair ``(note, value)``:

* ``value`` packs ``{cycle, is_safe, enq, index}`` into one word.  ``index``
  occupies the low ``r`` bits (``2n == 2**r``) and uses two sentinels:
  ``EMPTY = 2n - 2`` and ``CONSUMED = 2n - 1``.  ``CONSUMED`` is all-ones in
  the index field so consuming is a single atomic OR.  ``enq`` is bit ``r``
  (0 marks a slow-path insertion not yet finalized), ``is_safe`` is bit
  ``r + 1``, and the cycle sits above.
* ``note`` is a cycle watermark only the slow path advances: once
  ``note >= c`` no cooperating thread will use the slot for cycle ``c``.

The fast path here is lock-free; wait-freedom comes from the bounded-patience
fallback in :mod:`wfring.slowpath`, reached through :meth:`Ring.enqueue` and
:meth:`Ring.dequeue`.

A ``threshold`` word bounds futile dequeue scanning: every successful
enqueue resets it to ``3n - 1``, every fruitless dequeue attempt decrements
it, and a negative value proves the ring is empty.
"""

from __future__ import annotations

from .atomics import AtomicPair, AtomicWord
from .records import COUNTER_MASK, FIN, ThreadRecord
from . import slowpath

__all__ = ["Ring", "build_remap", "cycle_of"]


def build_remap(order: int, line_entries: int = 4, identity: bool = False) -> list:
    """Slot permutation spreading consecutive positions across cache lines.

    With ``L`` entries per cache line and ``2n = 2**order`` slots the table
    maps ``i -> (i mod (2n/L)) * L + (i div (2n/L))``: a block/offset
    transpose, bijective for every power-of-two shape, that keeps adjacent
    positions in different lines and delays reuse of a line as long as
    possible.  ``identity=True`` disables the permutation for tests.
    """
    size = 1 << order
    if identity:
        return list(range(size))
    if line_entries < 1 or line_entries & (line_entries - 1):
        raise ValueError("line_entries must be a power of two")
    span = min(line_entries, size)
    blocks = size // span
    return [(i % blocks) * span + (i // blocks) for i in range(size)]


def cycle_of(counter: int, order: int) -> int:
    """Cycle of a flag-free position counter: ``counter div 2n``."""
    return counter >> order


class Ring:
    """One bounded FIFO ring of indices plus its per-thread helping records."""

    __slots__ = (
        "order",
        "cap",
        "n",
        "mask",
        "enq_bit",
        "safe_bit",
        "cshift",
        "empty_idx",
        "consumed_idx",
        "threshold_max",
        "num_threads",
        "patience_enq",
        "patience_deq",
        "help_delay",
        "catchup_bound",
        "scq_mode",
        "entries",
        "head",
        "tail",
        "threshold",
        "records",
        "remap",
        "probe",
    )

    def __init__(
        self,
        order: int,
        num_threads: int,
        *,
        patience_enq: int = 16,
        patience_deq: int = 64,
        help_delay: int = 64,
        catchup_bound: int = 8,
        scq_mode: bool = False,
        line_entries: int = 4,
        identity_remap: bool = False,
    ) -> None:
        if not 2 <= order <= 61:
            raise ValueError("ring order must be in [2, 61]")
        n = 1 << (order - 1)
        if not 1 <= num_threads <= n:
            raise ValueError(f"num_threads must be in [1, {n}] for order {order}")
        if patience_enq < 0 or patience_deq < 0:
            raise ValueError("patience must be >= 0")
        if help_delay < 1:
            raise ValueError("help_delay must be >= 1")
        if catchup_bound < 1:
            raise ValueError("catchup_bound must be >= 1")
        self.order = order
        self.cap = 1 << order
        self.n = n
        self.mask = self.cap - 1
        self.enq_bit = 1 << order
        self.safe_bit = 1 << (order + 1)
        self.cshift = order + 2
        self.empty_idx = self.cap - 2
        self.consumed_idx = self.cap - 1
        self.threshold_max = 3 * n - 1
        self.num_threads = num_threads
        self.patience_enq = patience_enq
        self.patience_deq = patience_deq
        self.help_delay = help_delay
        self.catchup_bound = catchup_bound
        self.scq_mode = scq_mode
        init_val = self.safe_bit | self.enq_bit | self.empty_idx
        self.entries = [AtomicPair(-1, init_val) for _ in range(self.cap)]
        self.head = AtomicPair(self.cap, None)
        self.tail = AtomicPair(self.cap, None)
        self.threshold = AtomicWord(-1)
        self.records = [ThreadRecord(i, num_threads, help_delay) for i in range(num_threads)]
        self.remap = build_remap(order, line_entries, identity_remap)
        self.probe = None

    # -- small accessors used by tests and the harness ------------------

    def record(self, tid: int) -> ThreadRecord:
        return self.records[tid]

    def slot_state(self, pos: int) -> dict:
        """Decode the slot a position maps to (for assertions, not hot code)."""
        note, val = self.entries[self.remap[pos & self.mask]].pair
        return {
            "note": note,
            "cycle": val >> self.cshift,
            "is_safe": bool(val & self.safe_bit),
            "enq": bool(val & self.enq_bit),
            "index": val & self.mask,
        }

    def stats(self) -> dict:
        """Aggregate instrumentation counters over all thread records."""
        total: dict = {name: 0 for name in ThreadRecord.STAT_FIELDS}
        total["max_slot_loop"] = 0
        for rec in self.records:
            for name in ThreadRecord.STAT_FIELDS:
                total[name] += getattr(rec, name)
            if rec.max_slot_loop > total["max_slot_loop"]:
                total["max_slot_loop"] = rec.max_slot_loop
        return total

    def reset(self) -> None:
        """Reinitialize in place.  Single-threaded use only (test harness)."""
        init_val = self.safe_bit | self.enq_bit | self.empty_idx
        init = (-1, init_val)
        for cell in self.entries:
            cell.pair = init
        self.head.pair = (self.cap, None)
        self.tail.pair = (self.cap, None)
        self.threshold.value = -1
        self.records = [
            ThreadRecord(i, self.num_threads, self.help_delay) for i in range(self.num_threads)
        ]

    # -- fast path -------------------------------------------------------

    def try_enq(self, rec: ThreadRecord, index: int):
        """One lock-free enqueue attempt.

        Returns ``None`` on success, else the claimed tail position (the
        caller may retry or fall back to the slow path with it).  Never
        reports "full": internal rings hold at most ``n`` live indices.
        """
        # inlined tail.fetch_add_first(1); this is the hottest line
        tail = self.tail
        lock = tail._lock
        lock.acquire()
        cur = tail.pair
        t = cur[0]
        tail.pair = (t + 1, cur[1])
        lock.release()
        probe = self.probe
        if probe is not None:
            probe("enq:faa", rec.tid, t)
        ct = t >> self.order
        cell = self.entries[self.remap[t & self.mask]]
        cshift = self.cshift
        loops = 0
        while True:
            pair = cell.pair
            val = pair[1]
            # eligible: older cycle, safe to claim, and holds no live index
            if (
                val >> cshift < ct
                and ((val & self.safe_bit) or self.head.pair[0] <= t)
                and val & self.mask >= self.empty_idx
            ):
                if probe is not None:
                    probe("enq:cas", rec.tid, t)
                new = (ct << cshift) | self.safe_bit | self.enq_bit | index
                lock = cell._lock
                lock.acquire()
                ok = cell.pair == pair
                if ok:
                    cell.pair = (pair[0], new)
                lock.release()
                if not ok:
                    loops += 1
                    if loops > rec.max_slot_loop:
                        rec.max_slot_loop = loops
                    continue
                rec.slot_writes += 1
                if self.threshold.value != self.threshold_max:
                    self.threshold.store(self.threshold_max)
                    rec.threshold_resets += 1
                return None
            return t

    def try_deq(self, rec: ThreadRecord):
        """One lock-free dequeue attempt.

        Returns ``(True, index)`` on success, ``(True, None)`` when the ring
        is provably empty, or ``(False, head_position)`` to retry.
        """
        rec.deq_iters += 1
        # inlined head.fetch_add_first(1)
        head = self.head
        lock = head._lock
        lock.acquire()
        cur = head.pair
        h = cur[0]
        head.pair = (h + 1, cur[1])
        lock.release()
        probe = self.probe
        if probe is not None:
            probe("deq:faa", rec.tid, h)
        ch = h >> self.order
        cell = self.entries[self.remap[h & self.mask]]
        cshift = self.cshift
        loops = 0
        while True:
            pair = cell.pair
            val = pair[1]
            vcycle = val >> cshift
            if vcycle == ch:
                # an entry for exactly this position: consume it
                self.consume(rec, h, cell, val)
                return True, val & self.mask
            if vcycle < ch:
                idx = val & self.mask
                if idx >= self.empty_idx:
                    # nothing to take: stamp our cycle so a late enqueuer
                    # cannot use this position anymore
                    new = (ch << cshift) | (val & self.safe_bit) | self.enq_bit | self.empty_idx
                else:
                    # live entry of an older cycle: mark unsafe instead of
                    # destroying it; its dequeuer checks head before reuse
                    new = val & ~self.safe_bit
                if probe is not None:
                    probe("deq:mark", rec.tid, h)
                lock = cell._lock
                lock.acquire()
                ok = cell.pair == pair
                if ok:
                    cell.pair = (pair[0], new)
                lock.release()
                if not ok:
                    loops += 1
                    if loops > rec.max_slot_loop:
                        rec.max_slot_loop = loops
                    continue
                rec.slot_writes += 1
            tail = self.tail.pair[0]
            if tail <= h + 1:
                self.catchup(tail, h + 1)
                self.threshold.fetch_add(-1)
                return True, None
            if self.threshold.fetch_add(-1) <= 0:
                return True, None
            return False, h

    def consume(self, rec: ThreadRecord, h: int, cell: AtomicPair, val: int) -> None:
        """Take the entry at a matching cycle: OR the index to CONSUMED.

        An entry still carrying ``enq == 0`` came from a slow-path insertion
        whose request is not finalized yet; finalize it first so the stalled
        enqueuer (or its helpers) cannot insert the same index twice.
        """
        if not val & self.enq_bit:
            probe = self.probe
            if probe is not None:
                probe("deq:enq0", rec.tid, h)
            self.finalize_request(rec, h)
        # inlined cell.or_second(enq_bit | mask)
        lock = cell._lock
        lock.acquire()
        cur = cell.pair
        cell.pair = (cur[0], cur[1] | self.enq_bit | self.mask)
        lock.release()
        rec.slot_writes += 1

    def finalize_request(self, rec: ThreadRecord, h: int) -> None:
        """Set FIN on the one enqueue request currently parked at position ``h``.

        Tail positions are claimed exactly once, so at most one record can
        match; no match means the enqueuer already finalized itself.
        """
        records = self.records
        num = self.num_threads
        i = (rec.tid + 1) % num
        while i != rec.tid:
            tail_word = records[i].local_tail
            if tail_word.value & COUNTER_MASK == h:
                tail_word.cas(h, h | FIN)
                return
            i = (i + 1) % num

    def catchup(self, tail: int, head: int) -> None:
        """Best-effort bump of ``tail`` up to ``head`` after dequeuers overshot.

        Bounded; correctness never depends on it succeeding.
        """
        tcell = self.tail
        for _ in range(self.catchup_bound):
            if tcell.cas_first(tail, head):
                return
            head = self.head.pair[0]
            tail = tcell.pair[0]
            if tail >= head:
                return

    # -- public wait-free operations --------------------------------------

    def enqueue(self, rec: ThreadRecord, index: int) -> None:
        """Enqueue ``index`` (< n).  Always succeeds.

        Runs the lock-free fast path up to ``patience_enq`` times, then
        publishes a help request and completes through the slow path.  In
        ``scq_mode`` the fast path retries forever and helping is disabled.
        """
        if self.scq_mode:
            while self.try_enq(rec, index) is not None:
                rec.enq_fast_retries += 1
            return
        rec.next_check -= 1
        if rec.next_check == 0:
            slowpath.help_scan(self, rec)
        t = None
        for _ in range(self.patience_enq):
            t = self.try_enq(rec, index)
            if t is None:
                return
            rec.enq_fast_retries += 1
        if t is None:
            # zero patience: claim a tail position without inspecting the
            # slot, exactly like an attempt that found it unusable
            t = self.tail.fetch_add_first(1)
        rec.slow_enqueues += 1
        seq = rec.seq1
        rec.local_tail.store(t)
        rec.init_tail = t
        rec.index = index
        rec.enqueue = True
        rec.seq2 = seq
        rec.pending = True
        probe = self.probe
        if probe is not None:
            probe("slow:publish", rec.tid, t)
        slowpath.enqueue_slow(self, t, index, rec, rec, seq)
        rec.pending = False
        rec.seq1 = seq + 1

    def dequeue(self, rec: ThreadRecord):
        """Dequeue one index, or return ``None`` when the ring is empty."""
        if self.threshold.value < 0:
            return None
        if self.scq_mode:
            while True:
                ok, res = self.try_deq(rec)
                if ok:
                    return res
                rec.deq_fast_retries += 1
        rec.next_check -= 1
        if rec.next_check == 0:
            slowpath.help_scan(self, rec)
        # At least one real attempt even at patience 0: a dequeue may only
        # move past a claimed head position after try_deq has inspected it
        # and stamped the slot, else a racing enqueuer could still insert
        # there and strand the entry forever.
        h = None
        for _ in range(self.patience_deq or 1):
            ok, res = self.try_deq(rec)
            if ok:
                return res
            h = res
            rec.deq_fast_retries += 1
        rec.slow_dequeues += 1
        seq = rec.seq1
        rec.local_head.store(h)
        rec.init_head = h
        rec.enqueue = False
        rec.seq2 = seq
        rec.pending = True
        probe = self.probe
        if probe is not None:
            probe("slow:publish", rec.tid, h)
        slowpath.dequeue_slow(self, h, rec, rec, seq)
        rec.pending = False
        rec.seq1 = seq + 1
        # gather what the cooperating threads produced for this request
        lh = rec.local_head.value
        assert lh & FIN, "slow dequeue finished without finalization"
        hh = lh & COUNTER_MASK
        cell = self.entries[self.remap[hh & self.mask]]
        val = cell.pair[1]
        if val >> self.cshift == hh >> self.order and val & self.mask != self.empty_idx:
            idx = val & self.mask
            assert idx < self.n, "gather found a non-index at a matched cycle"
            self.consume(rec, hh, cell, val)
            return idx
        return None
