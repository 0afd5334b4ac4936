"""Before/after exposure feature matrices.

For every exposed patient the index date is the first prescription of the
target drug.  The *before* window covers days ``[index - days, index - 1]``
and the *after* window ``[index, index + days - 1]``; the index day itself
is counted after exposure.  A cell is 1 when the patient has at least one
event with that key inside the window.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import EmptyCohort, UnknownPatient
from .ingest import RecordStore
from .readcode import EventKey, Mode, event_key

DEFAULT_WINDOW_DAYS = 60


class Side(str, enum.Enum):
    BEFORE = "before"
    AFTER = "after"


@dataclass(frozen=True)
class WindowSpec:
    days: int = DEFAULT_WINDOW_DAYS

    def __post_init__(self):
        if int(self.days) != self.days or self.days < 1:
            raise ValueError(f"window days must be a positive integer, got {self.days!r}")

    def side_of(self, index_date: date, when: date) -> Side | None:
        offset = (when - index_date).days
        if -self.days <= offset < 0:
            return Side.BEFORE
        if 0 <= offset < self.days:
            return Side.AFTER
        return None

    def bounds(self, index_date: date, side: Side) -> tuple[date, date]:
        """Inclusive first and last day of a window."""
        if Side(side) is Side.BEFORE:
            return index_date - timedelta(days=self.days), index_date - timedelta(days=1)
        return index_date, index_date + timedelta(days=self.days - 1)


@dataclass(frozen=True)
class FeatureMatrix:
    """Sparse binary patients x events occurrence matrix for one window."""

    patient_ids: tuple[str, ...]
    event_keys: tuple[EventKey, ...]
    cells: sparse.csr_matrix
    side: Side

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def key_strings(self) -> list[str]:
        return [k.key for k in self.event_keys]

    def has(self, patient_id: str, key: str) -> bool:
        i = self.patient_ids.index(patient_id)
        j = self.key_strings.index(key)
        return bool(self.cells[i, j])


def build_matrices(
    store: RecordStore,
    cohort,
    window: WindowSpec = WindowSpec(),
    mode: Mode | str = Mode.FULL,
) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Build the before (A) and after (B) matrices on a shared axis.

    The event axis is the union of keys seen in either window, sorted by key
    string; events outside both windows are ignored.
    """
    mode = Mode(mode)
    cohort = sorted(cohort)
    if not cohort:
        raise EmptyCohort("cohort is empty")
    pids = [pid for pid, _ in cohort]
    if len(set(pids)) != len(pids):
        raise ValueError("cohort lists a patient more than once")

    # (row, key) pairs per side; sets give the binary occurrence rule.
    hits: dict[Side, set[tuple[int, str]]] = {Side.BEFORE: set(), Side.AFTER: set()}
    for row, (pid, index_date) in enumerate(cohort):
        if pid not in store.patients:
            raise UnknownPatient(f"cohort patient {pid!r} is not in the record store")
        for ev in store.events_for(pid):
            side = window.side_of(index_date, ev.date)
            if side is not None:
                hits[side].add((row, event_key(ev.code, mode).key))

    keys = sorted({k for side in hits.values() for _, k in side})
    column = {k: j for j, k in enumerate(keys)}
    event_keys = tuple(EventKey(k, mode) for k in keys)

    def to_matrix(side: Side) -> FeatureMatrix:
        pairs = sorted(hits[side])
        rows = np.fromiter((r for r, _ in pairs), dtype=np.int64, count=len(pairs))
        cols = np.fromiter((column[k] for _, k in pairs), dtype=np.int64, count=len(pairs))
        cells = sparse.csr_matrix(
            (np.ones(len(pairs), dtype=np.int8), (rows, cols)),
            shape=(len(cohort), len(keys)),
        )
        return FeatureMatrix(tuple(pids), event_keys, cells, side)

    return to_matrix(Side.BEFORE), to_matrix(Side.AFTER)


def column_patient_counts(matrix: FeatureMatrix) -> np.ndarray:
    """Number of patients with a 1-cell in each event column."""
    return np.asarray(matrix.cells.sum(axis=0, dtype=np.int64)).ravel()


def write_triplets(before: FeatureMatrix, after: FeatureMatrix, path) -> None:
    """Debug dump of both matrices as ``patient_id,event_key,side`` rows."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["patient_id", "event_key", "side"])
        for m in (before, after):
            coo = m.cells.tocoo()
            for i, j in sorted(zip(coo.row.tolist(), coo.col.tolist())):
                w.writerow([m.patient_ids[i], m.event_keys[j].key, m.side.value])
