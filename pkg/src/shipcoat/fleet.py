"""Interval-censored inspection records for a fleet of ships.

A compartment's history is the sequence of inspection times (months since
launch) and the number of new defects found at each; the first interval
starts at launch.  Zero-count inspections are records too.

CSV layout (UTF-8, header required, ``#`` lines ignored)::

    ship_id,compartment_id,inspection_time_months,defect_count
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

HEADER = ("ship_id", "compartment_id", "inspection_time_months", "defect_count")

Key = tuple  # (ship_id, compartment_id)


class DataError(ValueError):
    """Malformed or inconsistent inspection data."""


@dataclass(frozen=True)
class InspectionRecord:
    ship_id: str
    compartment_id: str
    inspection_time: float
    defect_count: int

    def __post_init__(self):
        if not self.ship_id or not self.compartment_id:
            raise DataError("ship_id and compartment_id must be non-empty")
        if not (self.inspection_time >= 0) or not math.isfinite(self.inspection_time):
            raise DataError(f"inspection time must be finite and >= 0, got {self.inspection_time}")
        if self.defect_count < 0:
            raise DataError(f"defect count must be >= 0, got {self.defect_count}")


@dataclass(frozen=True, eq=False)
class CompartmentHistory:
    """Inspection history of one compartment.

    ``times[k]`` closes the interval ``(times[k-1], times[k]]`` with
    ``times[-1]`` taken as ``start`` (launch, unless the history was cut from
    a longer one).
    """

    ship_id: str
    compartment_id: str
    times: np.ndarray
    counts: np.ndarray
    start: float = 0.0
    group: str | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        counts = np.asarray(self.counts).reshape(-1)
        if times.shape != counts.shape:
            raise DataError(f"{self.key}: times and counts differ in length")
        if counts.size and (np.any(counts < 0) or np.any(counts != np.round(counts))):
            raise DataError(f"{self.key}: defect counts must be nonnegative integers")
        edges = np.concatenate([[self.start], times])
        if np.any(np.diff(edges) <= 0):
            raise DataError(
                f"compartment {self.compartment_id!r} of ship {self.ship_id!r}: inspection "
                f"times must be strictly increasing after {self.start}")
        times.setflags(write=False)
        counts = counts.astype(np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "start", float(self.start))

    @property
    def key(self) -> Key:
        return (self.ship_id, self.compartment_id)

    @property
    def starts(self) -> np.ndarray:
        """Left end of each inspection interval."""
        return np.concatenate([[self.start], self.times[:-1]])

    @property
    def n_intervals(self) -> int:
        return self.times.size

    @property
    def total_defects(self) -> int:
        return int(self.counts.sum())

    @property
    def last_time(self) -> float:
        return float(self.times[-1]) if self.times.size else self.start

    def records(self) -> Iterator[InspectionRecord]:
        for t, n in zip(self.times, self.counts):
            yield InspectionRecord(self.ship_id, self.compartment_id, float(t), int(n))

    def __eq__(self, other):
        if not isinstance(other, CompartmentHistory):
            return NotImplemented
        return (self.key == other.key and self.start == other.start and self.group == other.group
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.counts, other.counts))

    def __repr__(self):
        pairs = ", ".join(f"({t:g}, {n})" for t, n in zip(self.times, self.counts))
        return f"CompartmentHistory({self.ship_id!r}, {self.compartment_id!r}, [{pairs}])"


@dataclass(frozen=True)
class FleetDataset:
    """Histories keyed by ``(ship_id, compartment_id)``, in sorted key order."""

    histories: tuple = field(default_factory=tuple)

    def __post_init__(self):
        hs = tuple(sorted(self.histories, key=lambda h: h.key))
        keys = [h.key for h in hs]
        dupes = [k for k, c in Counter(keys).items() if c > 1]
        if dupes:
            raise DataError(f"duplicate compartments: {dupes}")
        object.__setattr__(self, "histories", hs)
        object.__setattr__(self, "_index", {h.key: h for h in hs})

    def __len__(self):
        return len(self.histories)

    def __iter__(self):
        return iter(self.histories)

    def __getitem__(self, key) -> CompartmentHistory:
        return self._index[tuple(key)]

    def __contains__(self, key):
        return tuple(key) in self._index

    @property
    def keys(self) -> list:
        return [h.key for h in self.histories]

    @property
    def ships(self) -> list:
        return sorted({h.ship_id for h in self.histories})

    @property
    def n_records(self) -> int:
        return sum(h.n_intervals for h in self.histories)

    def records(self) -> Iterator[InspectionRecord]:
        for h in self.histories:
            yield from h.records()

    def groups(self) -> dict:
        """Group label -> keys, for compartments that carry one."""
        out: dict = {}
        for h in self.histories:
            if h.group is not None:
                out.setdefault(h.group, []).append(h.key)
        return out

    @classmethod
    def from_records(cls, records: Iterable[InspectionRecord], groups: dict | None = None):
        """Build a dataset; records of one compartment must come in time order."""
        by_key: dict = {}
        for r in records:
            by_key.setdefault((r.ship_id, r.compartment_id), []).append(r)
        groups = groups or {}
        hs = []
        for key, rs in by_key.items():
            times = [r.inspection_time for r in rs]
            if len(set(times)) != len(times):
                raise DataError(f"duplicate inspection time for compartment {key[1]!r} of ship {key[0]!r}")
            hs.append(CompartmentHistory(key[0], key[1], times, [r.defect_count for r in rs],
                                         group=groups.get(key)))
        return cls(tuple(hs))


def _parse_rows(lines: Iterable[str]) -> list:
    records = []
    header_seen = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = next(csv.reader([line]))
        fields = [f.strip() for f in fields]
        if not header_seen:
            if tuple(fields) != HEADER:
                raise DataError(f"line {lineno}: expected header {','.join(HEADER)!r}, got {line!r}")
            header_seen = True
            continue
        if len(fields) != 4:
            raise DataError(f"line {lineno}: expected 4 fields, got {len(fields)}")
        ship, comp, t_raw, n_raw = fields
        try:
            t = float(t_raw)
        except ValueError:
            raise DataError(f"line {lineno}: inspection time {t_raw!r} is not a number") from None
        try:
            n = int(n_raw)
        except ValueError:
            raise DataError(f"line {lineno}: defect count {n_raw!r} is not an integer") from None
        try:
            records.append(InspectionRecord(ship, comp, t, n))
        except DataError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
    if not header_seen:
        raise DataError("missing header line")
    return records


def parse_inspection_csv(source) -> FleetDataset:
    """Read a fleet CSV from a path, text/binary stream, or bytes."""
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8")
        lines = text.splitlines()
    elif isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            lines = fh.read().splitlines()
    else:
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        lines = data.splitlines()
    return FleetDataset.from_records(_parse_rows(lines))


def format_time(t: float) -> str:
    t = float(t)
    return str(int(t)) if t.is_integer() else repr(t)


def write_inspection_csv(dataset: FleetDataset, target=None, comments: Iterable[str] = ()) -> str:
    """Serialize to the fleet CSV format; returns the text and writes it if ``target`` is given."""
    buf = io.StringIO()
    for c in comments:
        for line in str(c).splitlines():
            buf.write(f"# {line}\n")
    buf.write(",".join(HEADER) + "\n")
    for r in dataset.records():
        buf.write(f"{r.ship_id},{r.compartment_id},{format_time(r.inspection_time)},{r.defect_count}\n")
    text = buf.getvalue()
    if target is not None:
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def split_by_time(dataset: FleetDataset, cutoff: float):
    """Split into training (inspections at or before ``cutoff``) and test sets.

    A test history starts at the compartment's last training inspection.
    """
    train, test = [], []
    for h in dataset:
        mask = h.times <= cutoff
        if np.any(mask):
            train.append(CompartmentHistory(h.ship_id, h.compartment_id, h.times[mask],
                                            h.counts[mask], h.start, h.group))
        if np.any(~mask):
            start = float(h.times[mask][-1]) if np.any(mask) else h.start
            test.append(CompartmentHistory(h.ship_id, h.compartment_id, h.times[~mask],
                                           h.counts[~mask], start, h.group))
    return FleetDataset(tuple(train)), FleetDataset(tuple(test))


def defect_report_histogram(dataset: FleetDataset) -> dict:
    """Number of compartments by total reported defects."""
    return dict(sorted(Counter(h.total_defects for h in dataset).items()))


def observed_interval(history: CompartmentHistory) -> float | None:
    """Most common spacing between consecutive inspections (months)."""
    if history.n_intervals == 0:
        return None
    gaps = np.round(np.diff(np.concatenate([[history.start], history.times])), 6)
    values, counts = np.unique(gaps, return_counts=True)
    return float(values[np.argmax(counts)])
