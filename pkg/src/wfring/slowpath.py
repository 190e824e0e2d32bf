"""Helping machinery that upgrades the lock-free ring to wait-freedom.

A thread that exhausts its fast-path patience publishes a request on its
:class:`~wfring.records.ThreadRecord` and then runs the same slow procedure
that any helper would run.  The crux is that a helpee and its helpers must
behave as *one* logical thread:

* ``slow_faa`` replaces the fast path's fetch-and-add.  Per cooperative
  group, the global head/tail counter moves exactly once per round.  Phase 1
  CASes the group's shared ``local`` word from the last agreed value to
  ``cnt | INC``; the winner then publishes a phase-2 descriptor and installs
  ``cnt + 1`` into the global pair; finally INC is cleared and every
  cooperating thread adopts ``cnt``.  Any thread that sees the descriptor on
  the global pair finishes phase 2 on the stalled thread's behalf.
* ``try_enq_slow`` / ``try_deq_slow`` attempt one ring position for the
  group.  When one cooperating thread rejects a slot, it advances the slot's
  ``note`` watermark so late cooperators reject it too instead of using it
  for a cycle the group already abandoned.
* Insertions happen in two steps (``enq=0``, then FIN on the request, then
  ``enq=1``) so a dequeuer that consumes the entry early can finalize the
  request itself -- see ``Ring.consume``.

Helpers validate a request snapshot against the record's sequence numbers
and re-validate after every counter round; a request that completed in the
meantime is dropped without side effects.
"""

from __future__ import annotations

from .records import COUNTER_MASK, FIN, INC, ThreadRecord

__all__ = [
    "help_threads",
    "help_scan",
    "enqueue_slow",
    "dequeue_slow",
    "slow_faa",
    "try_enq_slow",
    "try_deq_slow",
    "load_global_help_phase2",
]


def help_threads(ring, me: ThreadRecord) -> None:
    """Amortized helper scan, called on entry to every public operation.

    Every ``help_delay`` calls, look at one other record (round-robin); if it
    holds a consistent pending request, execute that request's slow path.
    The countdown is duplicated inline in the ring's public operations; this
    wrapper keeps the full semantics callable on its own.
    """
    me.next_check -= 1
    if me.next_check != 0:
        return
    help_scan(ring, me)


def help_scan(ring, me: ThreadRecord) -> None:
    """Examine one candidate record and dispatch its request if valid."""
    thr = ring.records[me.next_tid]
    if thr.pending:
        probe = ring.probe
        if probe is not None:
            probe("help:dispatch", me.tid, thr.tid)
        me.help_dispatches += 1
        if thr.enqueue:
            # snapshot, then re-check seq1: a torn or completed request
            # fails validation and is skipped
            seq = thr.seq2
            idx = thr.index
            tail = thr.init_tail
            if thr.enqueue and thr.seq1 == seq:
                enqueue_slow(ring, tail, idx, thr, me, seq)
        else:
            seq = thr.seq2
            head = thr.init_head
            if not thr.enqueue and thr.seq1 == seq:
                dequeue_slow(ring, head, thr, me, seq)
    me.next_check = ring.help_delay
    me.next_tid = (me.next_tid + 1) % ring.num_threads


def load_global_help_phase2(ring, gpair, mylocal):
    """Read a global counter, finishing any phase-2 descriptor parked on it.

    Returns the counter word, or ``None`` if our own request was finalized
    (the caller's loop must exit).  Monotonic counters make the descriptor
    CAS ABA-free.
    """
    while True:
        if mylocal.value & FIN:
            return None
        snap = gpair.pair
        ref = snap[1]
        if ref is None:
            return snap[0]
        ph2 = ring.records[ref].phase2
        seq = ph2.seq2
        local = ph2.local
        cnt = ph2.cnt
        if ph2.seq1 == seq:
            # complete phase 2 for the stalled thread; fails harmlessly if
            # its local word already advanced
            local.cas(cnt | INC, cnt)
        if gpair.cas(snap, (snap[0], None)):
            return snap[0]


def slow_faa(ring, gpair, local, v: int, use_threshold: bool, me: ThreadRecord):
    """Advance the cooperative group's position by one, exactly once per round.

    ``local`` is the group's shared position word, ``v`` the caller's last
    agreed value.  Returns ``(True, value)`` with the round's agreed counter,
    or ``(False, _)`` once the request is finalized.  When ``use_threshold``
    is set the round's single global increment also pays the one threshold
    decrement (dequeue side).
    """
    probe = ring.probe
    phase2 = me.phase2
    while True:
        me.faa_rounds += 1
        cnt = load_global_help_phase2(ring, gpair, local)
        if cnt is None or not local.cas(v, cnt | INC):
            lv = local.value
            v = lv
            if lv & FIN:
                if probe is not None:
                    probe("faa:fin", me.tid, v)
                return False, v
            if not lv & INC:
                # another cooperating thread already finished this round;
                # adopt its value
                if probe is not None:
                    probe("faa:agree", me.tid, v)
                return True, v
            cnt = lv & COUNTER_MASK
        else:
            v = cnt | INC
            if probe is not None:
                probe("faa:phase1", me.tid, cnt)
        # publish our own phase-2 descriptor, then try to install cnt+1
        phase2.seq1 += 1
        seq = phase2.seq1
        phase2.local = local
        phase2.cnt = cnt
        phase2.seq2 = seq
        if probe is not None:
            probe("faa:install", me.tid, cnt)
        if gpair.cas((cnt, None), (cnt + 1, me.tid)):
            break
        if probe is not None:
            probe("faa:install_fail", me.tid, cnt)
    if probe is not None:
        probe("faa:installed", me.tid, cnt)
    if use_threshold:
        ring.threshold.fetch_add(-1)
    local.cas(cnt | INC, cnt)
    gpair.cas((cnt + 1, me.tid), (cnt + 1, None))
    if probe is not None:
        probe("faa:agree", me.tid, cnt)
    return True, cnt


def try_enq_slow(ring, t: int, index: int, rec: ThreadRecord, me: ThreadRecord) -> bool:
    """Try to insert ``index`` for the group's position ``t``.

    True means the request's entry exists at ``t`` (inserted here or by a
    peer); False means this position is unusable and the group must advance.
    """
    ct = t >> ring.order
    cell = ring.entries[ring.remap[t & ring.mask]]
    cshift = ring.cshift
    while True:
        pair = cell.pair
        note, val = pair
        if val >> cshift < ct and note < ct:
            if (
                not ((val & ring.safe_bit) or ring.head.pair[0] <= t)
                or val & ring.mask < ring.empty_idx
            ):
                # unusable for our cycle: raise the note watermark so every
                # other cooperating thread skips it for cycle ct as well
                if cell.cas(pair, (ct, val)):
                    me.slot_writes += 1
                    return False
                continue
            probe = ring.probe
            if probe is not None:
                probe("slow:insert", me.tid, t)
            inserted = (ct << cshift) | ring.safe_bit | index  # enq=0
            if not cell.cas(pair, (note, inserted)):
                continue
            me.slot_writes += 1
            if rec.local_tail.cas(t, t | FIN):
                # we finalized the request; flip enq so dequeuers need no help
                if cell.cas((note, inserted), (note, inserted | ring.enq_bit)):
                    me.slot_writes += 1
            if ring.threshold.value != ring.threshold_max:
                ring.threshold.store(ring.threshold_max)
                me.threshold_resets += 1
            return True
        if val >> cshift != ct:
            return False
        # Same cycle.  Only two writers reach cycle ct at this slot: a
        # cooperating thread inserting our index, or a dequeuer that stamped
        # the position EMPTY/CONSUMED first.  Treat only our own index as
        # success; a stamp means the position is lost and the group moves on.
        return val & ring.mask == index


def try_deq_slow(ring, h: int, rec: ThreadRecord, me: ThreadRecord) -> bool:
    """Try to resolve the group's dequeue at position ``h``.

    True either pins the result (entry present at cycle ``h``: FIN stops the
    group, the request owner consumes it afterwards) or confirms emptiness
    (threshold went negative).  False advances the group.
    """
    ch = h >> ring.order
    cell = ring.entries[ring.remap[h & ring.mask]]
    cshift = ring.cshift
    while True:
        pair = cell.pair
        note, val = pair
        vcycle = val >> cshift
        idx = val & ring.mask
        if vcycle == ch and idx != ring.empty_idx:
            # ready (a live index) or already consumed by this group's owner
            rec.local_head.cas(h, h | FIN)
            return True
        if idx < ring.empty_idx:
            # foreign live entry
            if vcycle < ch and note < ch:
                # avert other cooperating dequeuers from this slot first
                if not cell.cas(pair, (ch, val)):
                    continue
                me.slot_writes += 1
                continue  # reload; the unsafe-mark CAS below needs fresh note
            new = val & ~ring.safe_bit
        else:
            new = (ch << cshift) | (val & ring.safe_bit) | ring.enq_bit | ring.empty_idx
        if vcycle < ch:
            if not cell.cas(pair, (note, new)):
                continue
            me.slot_writes += 1
        tail = ring.tail.pair[0]
        if tail <= h + 1:
            ring.catchup(tail, h + 1)
        if ring.threshold.value < 0:
            rec.local_head.cas(h, h | FIN)
            return True
        return False


def enqueue_slow(ring, t: int, index: int, rec: ThreadRecord, me: ThreadRecord, seq: int) -> None:
    """Drive an enqueue request from position ``t`` until it is finalized.

    ``rec`` is the request owner's record; ``me`` is the executing thread
    (the owner itself or a helper).  ``seq`` is the request's sequence
    snapshot: if it moves, the request completed elsewhere and a helper must
    stop before acting on a position that now belongs to a newer request.
    """
    local = rec.local_tail
    gpair = ring.tail
    while True:
        ok, t = slow_faa(ring, gpair, local, t, False, me)
        if not ok:
            return
        if rec.seq1 != seq:
            return
        if try_enq_slow(ring, t, index, rec, me):
            return


def dequeue_slow(ring, h: int, rec: ThreadRecord, me: ThreadRecord, seq: int) -> None:
    """Dequeue-side twin of :func:`enqueue_slow`.

    The threshold decrement rides on the round's single global head
    increment, so the whole cooperative group decrements it exactly once per
    position regardless of how many helpers run.
    """
    local = rec.local_head
    gpair = ring.head
    while True:
        ok, h = slow_faa(ring, gpair, local, h, True, me)
        if not ok:
            return
        if rec.seq1 != seq:
            return
        if try_deq_slow(ring, h, rec, me):
            return
