"""Multi-threaded stress oracle for the payload queue.

Producers tag every payload ``(producer_id, sequence)``; consumers keep
what they dequeued.  At quiescence the run is checked for

* no loss / no duplication: consumed + residual == produced, as multisets;
* per-producer FIFO: within each consumer, sequences of any one producer
  strictly increase;
* index conservation: after draining, the free ring hands out every payload
  index exactly once.

Violations are reported, never raised, so a broken queue yields a readable
report instead of a stack trace.
"""

from __future__ import annotations

import collections
import json
import sys
import threading
import time
from dataclasses import dataclass, field

from ..queue import QueueConfig, WaitFreeQueue

__all__ = ["StressSpec", "StressReport", "run_stress"]

# Empty/full backoff: long enough to hand the GIL to a thread that has real
# work, short enough not to throttle a nearly-balanced run.
_BACKOFF = 0.0001


@dataclass(frozen=True)
class StressSpec:
    """One stress scenario: thread mix, volume, and queue parameters."""

    producers: int = 2
    consumers: int = 2
    ops_per_producer: int = 10_000
    ring_order: int = 10
    patience_enq: int = 16
    patience_deq: int = 64
    help_delay: int = 64
    scq_mode: bool = False
    seed: int = 0
    switch_interval: float | None = 0.005


@dataclass
class StressReport:
    spec: StressSpec
    elapsed: float = 0.0
    produced: int = 0
    consumed: int = 0
    residual: int = 0
    violations: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self) -> str:
        out = {
            "spec": self.spec.__dict__,
            "elapsed": self.elapsed,
            "produced": self.produced,
            "consumed": self.consumed,
            "residual": self.residual,
            "violations": self.violations,
            "stats": self.stats,
            "passed": self.passed,
        }
        return json.dumps(out, indent=2)


def run_stress(spec: StressSpec) -> StressReport:
    """Run one stress scenario to quiescence and check the oracles."""
    config = QueueConfig(
        ring_order=spec.ring_order,
        num_threads=spec.producers + spec.consumers + 1,  # +1 drains at the end
        patience_enq=spec.patience_enq,
        patience_deq=spec.patience_deq,
        help_delay=spec.help_delay,
        scq_mode=spec.scq_mode,
    )
    queue = WaitFreeQueue(config)
    report = StressReport(spec=spec)
    stop = threading.Event()
    consumed_lists: list = [None] * spec.consumers

    def producer(pid: int) -> None:
        handle = queue.register()
        enq = queue.enqueue
        for i in range(spec.ops_per_producer):
            while not enq(handle, (pid, i)):
                time.sleep(_BACKOFF)

    def consumer(cid: int) -> None:
        handle = queue.register()
        got: list = []
        append = got.append
        deq = queue.dequeue
        while True:
            item = deq(handle)
            if item is None:
                if stop.is_set():
                    break
                time.sleep(_BACKOFF)
                continue
            append(item)
        consumed_lists[cid] = got

    old_interval = sys.getswitchinterval()
    if spec.switch_interval is not None:
        sys.setswitchinterval(spec.switch_interval)
    threads = [
        threading.Thread(target=producer, args=(pid,), name=f"prod-{pid}")
        for pid in range(spec.producers)
    ] + [
        threading.Thread(target=consumer, args=(cid,), name=f"cons-{cid}")
        for cid in range(spec.consumers)
    ]
    start = time.perf_counter()
    try:
        for t in threads:
            t.start()
        for t in threads[: spec.producers]:
            t.join()
        stop.set()
        for t in threads[spec.producers :]:
            t.join()
    finally:
        sys.setswitchinterval(old_interval)
    report.elapsed = time.perf_counter() - start

    # quiescent residual drain
    drain_handle = queue.register()
    residual: list = []
    while True:
        item = queue.dequeue(drain_handle)
        if item is None:
            break
        residual.append(item)

    report.produced = spec.producers * spec.ops_per_producer
    report.consumed = sum(len(lst) for lst in consumed_lists if lst)
    report.residual = len(residual)
    report.stats = queue.stats()

    expected = collections.Counter(
        (pid, i) for pid in range(spec.producers) for i in range(spec.ops_per_producer)
    )
    actual = collections.Counter(
        item for lst in consumed_lists if lst for item in lst
    )
    actual.update(residual)
    missing = expected - actual
    extra = actual - expected
    if missing:
        report.violations.append(
            {"kind": "loss", "count": sum(missing.values()), "sample": list(missing)[:5]}
        )
    if extra:
        report.violations.append(
            {"kind": "duplication", "count": sum(extra.values()), "sample": list(extra)[:5]}
        )
    for cid, lst in enumerate(consumed_lists):
        last_seq: dict = {}
        for pid, i in lst or ():
            if last_seq.get(pid, -1) >= i:
                report.violations.append(
                    {"kind": "order", "consumer": cid, "producer": pid, "at": i}
                )
                break
            last_seq[pid] = i

    # index conservation: every payload slot index is free exactly once now
    free_ring = queue.free
    rec = drain_handle.free_rec
    indices = []
    for _ in range(queue.n + 1):
        idx = free_ring.dequeue(rec)
        if idx is None:
            break
        indices.append(idx)
    if sorted(indices) != list(range(queue.n)):
        report.violations.append(
            {"kind": "index-conservation", "freed": len(indices), "capacity": queue.n}
        )
    return report
