"""Lifetime observations with a right-censoring flag."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class Observation:
    """``time = min(t, c)`` and ``event`` (True when ``t`` was observed)."""

    time: float
    event: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.time) and self.time > 0):
            raise DomainError(f"observation time must be > 0, got {self.time}")


def as_arrays(data) -> Tuple[np.ndarray, np.ndarray]:
    """Split ``data`` into ``(times, events)`` arrays.

    ``data`` may be a sequence of :class:`Observation`, a ``(times, events)``
    pair of arrays, or a plain array of times (all taken as events).
    """
    if isinstance(data, tuple) and len(data) == 2 and np.ndim(data[0]) == 1:
        t = np.asarray(data[0], dtype=float)
        ev = np.asarray(data[1], dtype=bool)
    else:
        seq = list(data) if not isinstance(data, np.ndarray) else data
        if len(seq) and isinstance(seq[0], Observation):
            t = np.array([o.time for o in seq], dtype=float)
            ev = np.array([o.event for o in seq], dtype=bool)
        else:
            t = np.asarray(seq, dtype=float)
            ev = np.ones(t.shape, dtype=bool)
    if t.ndim != 1 or t.size == 0:
        raise DomainError("data must be a nonempty 1-D collection")
    if t.shape != ev.shape:
        raise DomainError("times and events differ in length")
    if np.any(~np.isfinite(t)) or np.any(t <= 0):
        raise DomainError("all times must be finite and > 0")
    return t, ev


def to_observations(times: Iterable[float], events: Iterable[bool] = None):
    """Build a list of :class:`Observation` from parallel sequences."""
    times = list(times)
    if events is None:
        events = [True] * len(times)
    return [Observation(float(t), bool(e)) for t, e in zip(times, events)]
