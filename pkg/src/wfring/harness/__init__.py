"""Verification harness: stress oracles, linearizability, scripted replays."""

from .linearize import EMPTY, HistoryEvent, HistoryRecorder, check_linearizable
from .schedule import LABELS, ProbeLog, ScheduleController, ScriptError, replay_schedule
from .stress import StressReport, StressSpec, run_stress

__all__ = [
    "EMPTY",
    "HistoryEvent",
    "HistoryRecorder",
    "check_linearizable",
    "LABELS",
    "ProbeLog",
    "ScheduleController",
    "ScriptError",
    "replay_schedule",
    "StressReport",
    "StressSpec",
    "run_stress",
]
