"""Deterministic replay of thread interleavings at labeled protocol steps.

The ring publishes a ``probe`` hook that fires at named seams of the
protocol (see LABELS below).  :class:`ScheduleController` plugs into that
hook and serializes the instrumented threads: a worker may only pass a
probe while it holds the controller's floor, and the script hands the floor
around as a list of ``(worker, label)`` steps meaning "let this worker run
until it reaches this label, then park it there".

Workers run real code between labels; because only one worker is ever past
its gate, each scripted step is an atomic chunk of one thread's execution
and the interleaving is exactly reproducible.

Probe labels fired by the queue:

==================  =====================================================
``enq:faa``         fast enqueue claimed a tail position (info = position)
``enq:cas``         fast enqueue about to publish the entry
``deq:faa``         fast dequeue claimed a head position (info = position)
``deq:mark``        fast dequeue about to stamp a slot
``deq:enq0``        consumer saw a not-yet-finalized entry, will finalize
``slow:publish``    help request published, slow path about to start
``slow:insert``     slow enqueue about to insert an entry
``faa:phase1``      shared-counter phase 1 won (info = agreed counter)
``faa:install``     about to install counter+1 into the global pair
``faa:install_fail``the install CAS lost (fast-path interference)
``faa:installed``   the install CAS won
``faa:agree``       slow_faa returns with the round's value (info = value)
``faa:fin``         slow_faa observed FIN and stops
``help:dispatch``   helper picked up a pending request (info = helpee tid)
==================  =====================================================
"""

from __future__ import annotations

import threading

__all__ = ["ScriptError", "ScheduleController", "replay_schedule", "ProbeLog", "LABELS"]

LABELS = (
    "enq:faa",
    "enq:cas",
    "deq:faa",
    "deq:mark",
    "deq:enq0",
    "slow:publish",
    "slow:insert",
    "faa:phase1",
    "faa:install",
    "faa:install_fail",
    "faa:installed",
    "faa:agree",
    "faa:fin",
    "help:dispatch",
)


class ScriptError(Exception):
    """A replay script could not be driven to completion."""


class ProbeLog:
    """Thread-safe append-only log of probe events, usable as a probe hook."""

    def __init__(self) -> None:
        self.events: list[tuple] = []
        self._lock = threading.Lock()

    def __call__(self, label: str, tid: int, info) -> None:
        with self._lock:
            self.events.append((label, tid, info))

    def of(self, label: str) -> list[tuple]:
        with self._lock:
            return [e for e in self.events if e[0] == label]

    def count(self, label: str) -> int:
        return len(self.of(label))


class ScheduleController:
    """Serializes instrumented worker threads through probe labels."""

    def __init__(self, timeout: float = 10.0) -> None:
        self._cond = threading.Condition()
        self._active: str | None = None  # worker currently holding the floor
        self._stop_label: str | None = None
        self._parked: dict[str, str] = {}  # worker -> label it is parked at
        self._finished: set[str] = set()
        self._names: dict[int, str] = {}  # thread ident -> worker name
        self._released = False
        self.timeout = timeout
        self.log = ProbeLog()

    # -- wiring ---------------------------------------------------------

    def register_current_thread(self, name: str) -> None:
        with self._cond:
            self._names[threading.get_ident()] = name

    def probe(self, label: str, tid: int, info) -> None:
        """Ring probe hook: gate the calling worker at this label."""
        self.log(label, tid, info)
        ident = threading.get_ident()
        with self._cond:
            name = self._names.get(ident)
            if name is None or self._released:
                return  # unmanaged thread (e.g. the driver) passes freely
            if name == self._active and label == self._stop_label:
                # reached the scripted stop: park and hand the floor back
                self._active = None
                self._stop_label = None
                self._parked[name] = label
                self._cond.notify_all()
            while not self._released and self._active != name:
                if not self._cond.wait(self.timeout):
                    raise ScriptError(f"worker {name!r} starved at {label!r}")
            self._parked.pop(name, None)

    def _worker_done(self, name: str) -> None:
        with self._cond:
            self._finished.add(name)
            if self._active == name:
                self._active = None
                self._stop_label = None
            self._cond.notify_all()

    # -- driving --------------------------------------------------------

    def run_until(self, name: str, label: str) -> None:
        """Let ``name`` run until it parks at ``label``; error on timeout."""
        with self._cond:
            if name in self._finished:
                raise ScriptError(f"worker {name!r} already finished")
            self._active = name
            self._stop_label = label
            self._cond.notify_all()
            deadline = self.timeout
            while self._active == name:
                if name in self._finished:
                    raise ScriptError(
                        f"worker {name!r} finished before reaching {label!r}"
                    )
                if not self._cond.wait(deadline):
                    raise ScriptError(
                        f"deadlock: worker {name!r} never reached {label!r}"
                    )

    def run_to_end(self, name: str) -> None:
        """Let ``name`` run to completion with no further gating."""
        with self._cond:
            self._active = name
            self._stop_label = None
            self._cond.notify_all()
            while name not in self._finished:
                if not self._cond.wait(self.timeout):
                    raise ScriptError(f"worker {name!r} did not finish")
            if self._active == name:
                self._active = None

    def release_all(self) -> None:
        """Drop all gates (end of scripted section)."""
        with self._cond:
            self._released = True
            self._cond.notify_all()


def replay_schedule(
    ring,
    bodies: dict,
    script: list,
    snapshot=None,
    timeout: float = 10.0,
):
    """Drive ``bodies`` through ``script`` on an instrumented ring.

    ``bodies`` maps worker names to zero-argument callables; each runs in
    its own thread, gated at every probe.  ``script`` is a list of
    ``(worker, label)`` steps, or ``(worker, None)`` to run that worker to
    completion.  ``snapshot`` (optional) is called after every step; its
    results are returned alongside the probe log and the workers' return
    values.

    Raises :class:`ScriptError` if a step cannot complete (a worker parked
    forever, finished early, or never reached the requested label).
    """
    ctl = ScheduleController(timeout=timeout)
    old_probe = ring.probe
    ring.probe = ctl.probe
    results: dict = {}
    errors: dict = {}

    def wrap(name, fn):
        def runner():
            ctl.register_current_thread(name)
            # entry gate: park immediately so the script controls the start
            ctl.probe("start", -1, None)
            try:
                results[name] = fn()
            except Exception as exc:  # surfaced after join
                errors[name] = exc
            finally:
                ctl._worker_done(name)

        return threading.Thread(target=runner, name=f"replay-{name}")

    threads = [wrap(name, fn) for name, fn in bodies.items()]
    snapshots = []
    try:
        for t in threads:
            t.start()
        for name, label in script:
            if label is None:
                ctl.run_to_end(name)
            else:
                ctl.run_until(name, label)
            if snapshot is not None:
                snapshots.append(snapshot())
    finally:
        ctl.release_all()
        for t in threads:
            t.join(timeout=timeout)
        ring.probe = old_probe
    alive = [t.name for t in threads if t.is_alive()]
    if alive:
        raise ScriptError(f"workers never terminated: {alive}")
    if errors:
        name, exc = next(iter(errors.items()))
        raise ScriptError(f"worker {name!r} raised {exc!r}") from exc
    return {"log": ctl.log, "results": results, "snapshots": snapshots}
