"""Bounded wait-free MPMC FIFO queue on a fetch-and-add ring.

The package provides:

* :class:`~wfring.queue.WaitFreeQueue` -- payload queue of capacity ``n``
  built from two index rings and a data array.
* :class:`~wfring.ring.Ring` -- the underlying bounded index ring with a
  lock-free fast path and a helping slow path that makes every operation
  complete in a bounded number of the caller's own steps.
* :mod:`wfring.atomics` -- the double-width atomic cells the protocol needs.
* :mod:`wfring.harness` -- stress oracles, a linearizability checker, and a
  deterministic interleaving replayer for the protocol's corner cases.
* :mod:`wfring.bench` -- throughput benchmark, also usable as a CLI via
  ``python -m wfring.bench``.
"""

from .atomics import AtomicPair, AtomicWord
from .queue import QueueConfig, ThreadHandle, WaitFreeQueue
from .records import ThreadRecord
from .ring import Ring, build_remap, cycle_of

__all__ = [
    "AtomicPair",
    "AtomicWord",
    "QueueConfig",
    "Ring",
    "ThreadHandle",
    "ThreadRecord",
    "WaitFreeQueue",
    "build_remap",
    "cycle_of",
]

__version__ = "0.1.0"
