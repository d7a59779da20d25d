"""Reading lifetime data files and the Kaplan-Meier estimator.

Files are CSV or TSV with a header row.  The time column must hold positive
numbers; an optional event column holds 1 (event observed) or 0 (right
censored).  Every data row is either accepted or reported with a reason.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from .errors import DomainError, IngestionError
from .observations import Observation, as_arrays

ENTOMOLOGY_ENV = "BBS_ENTOMOLOGY_PATH"


@dataclass
class Dataset:
    name: str
    observations: List[Observation]
    source_path: str
    rejected: List[Tuple[int, str]] = field(default_factory=list)

    def __post_init__(self):
        if not self.observations:
            raise IngestionError(f"dataset {self.name!r} has no observations", self.rejected)

    @property
    def times(self) -> np.ndarray:
        return np.array([o.time for o in self.observations])

    @property
    def events(self) -> np.ndarray:
        return np.array([o.event for o in self.observations], dtype=bool)

    @property
    def n(self) -> int:
        return len(self.observations)

    def arrays(self):
        return self.times, self.events


def _column_index(header, spec, what):
    if spec is None:
        return None
    if isinstance(spec, int):
        if not 0 <= spec < len(header):
            raise IngestionError(f"{what} index {spec} out of range for {len(header)} columns")
        return spec
    names = [h.strip().lower() for h in header]
    key = str(spec).strip().lower()
    if key in names:
        return names.index(key)
    if key.isdigit() and int(key) < len(header):
        return int(key)
    raise IngestionError(f"{what} {spec!r} not found in header {header}")


def parse_dataset(text: str, fmt: str = "csv", time_column: Union[str, int, None] = None,
                  event_column: Union[str, int, None] = None, name: str = "data",
                  source_path: str = "") -> Dataset:
    """Parse delimited text into a :class:`Dataset`.

    ``time_column`` defaults to the first column.  Without ``event_column``
    every row is an event.  Row numbers in ``rejected`` count data rows
    from 1.
    """
    if fmt not in ("csv", "tsv"):
        raise IngestionError(f"unknown format {fmt!r}")
    rows = [r for r in csv.reader(io.StringIO(text), delimiter="," if fmt == "csv" else "\t")]
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise IngestionError("empty file")
    header, body = rows[0], rows[1:]
    if not body:
        raise IngestionError("file has a header but no data rows")
    ti = _column_index(header, 0 if time_column is None else time_column, "time column")
    ei = _column_index(header, event_column, "event column")
    obs, rejected = [], []
    for i, row in enumerate(body, start=1):
        try:
            raw = row[ti].strip()
        except IndexError:
            rejected.append((i, "missing time field"))
            continue
        try:
            t = float(raw)
        except ValueError:
            rejected.append((i, f"unparseable time {raw!r}"))
            continue
        if not (math.isfinite(t) and t > 0):
            rejected.append((i, f"time must be > 0, got {raw!r}"))
            continue
        ev = True
        if ei is not None:
            try:
                flag = row[ei].strip()
            except IndexError:
                rejected.append((i, "missing event field"))
                continue
            if flag not in ("0", "1"):
                rejected.append((i, f"event flag must be 0 or 1, got {flag!r}"))
                continue
            ev = flag == "1"
        obs.append(Observation(t, ev))
    if not obs:
        raise IngestionError("no valid rows", rejected)
    return Dataset(name, obs, source_path, rejected)


def load_dataset(path, fmt: Optional[str] = None, time_column=None, event_column=None) -> Dataset:
    """Read a CSV/TSV file; the format follows the extension unless given."""
    p = Path(path)
    if fmt is None:
        fmt = "tsv" if p.suffix.lower() in (".tsv", ".tab") else "csv"
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot read {p}: {exc}") from exc
    return parse_dataset(text, fmt, time_column, event_column, name=p.stem, source_path=str(p))


_BUNDLED = {
    "old_faithful": ("old_faithful.csv", "waiting", None),
    "kevlar": ("kevlar.csv", "stress_hours", None),
    "entomology": ("entomology.csv", "time", "event"),
}


def bundled_path(name: str) -> Optional[Path]:
    """Location of a bundled data file, or ``None`` if it is not available.

    The entomology file can also be supplied through the environment
    variable ``BBS_ENTOMOLOGY_PATH``.
    """
    if name not in _BUNDLED:
        raise DomainError(f"unknown bundled dataset {name!r}; choose from {sorted(_BUNDLED)}")
    if name == "entomology" and os.environ.get(ENTOMOLOGY_ENV):
        p = Path(os.environ[ENTOMOLOGY_ENV])
        return p if p.is_file() else None
    p = Path(str(resources.files("bimodal_bs") / "data" / _BUNDLED[name][0]))
    return p if p.is_file() else None


def load_bundled(name: str) -> Dataset:
    """Load one of ``old_faithful``, ``kevlar`` or ``entomology``."""
    p = bundled_path(name)
    if p is None:
        raise IngestionError(f"bundled dataset {name!r} is not available")
    _, tcol, ecol = _BUNDLED[name]
    ds = load_dataset(p, time_column=tcol, event_column=ecol)
    ds.name = name
    return ds


# ---------------------------------------------------------------------------
# Kaplan-Meier
# ---------------------------------------------------------------------------


@dataclass
class KmCurve:
    """Product-limit survival steps at the distinct event times."""

    times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray

    def __call__(self, t):
        """Right-continuous step function evaluated at ``t``."""
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right")
        s = np.concatenate([[1.0], self.survival])
        return s[idx]


def km_estimate(data) -> KmCurve:
    """Kaplan-Meier estimate; censored times tied with events stay at risk."""
    t, ev = as_arrays(data.observations if isinstance(data, Dataset) else data)
    uniq = np.unique(t[ev])
    if uniq.size == 0:
        empty = np.array([], dtype=float)
        return KmCurve(empty, empty, np.array([], dtype=int), np.array([], dtype=int))
    at_risk = np.array([np.count_nonzero(t >= u) for u in uniq])
    d = np.array([np.count_nonzero((t == u) & ev) for u in uniq])
    surv = np.cumprod(1.0 - d / at_risk)
    return KmCurve(uniq, surv, at_risk, d)
