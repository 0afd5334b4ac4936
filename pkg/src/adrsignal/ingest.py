"""Loading of the three longitudinal input tables.

``patients.csv``  -- ``patient_id``
``therapy.csv``   -- ``patient_id,drug_code,date``
``medical.csv``   -- ``patient_id,readcode,date``
"""

from __future__ import annotations

import csv
import enum
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

from .errors import EmptyCohort, FileUnreadable, MalformedCode, MalformedRow
from .readcode import ReadCode, parse_readcode

log = logging.getLogger(__name__)

PATIENTS_HEADER = ("patient_id",)
THERAPY_HEADER = ("patient_id", "drug_code", "date")
MEDICAL_HEADER = ("patient_id", "readcode", "date")


class Strictness(str, enum.Enum):
    STRICT = "strict"
    SKIP_BAD = "skip"


@dataclass(frozen=True, order=True)
class Prescription:
    patient_id: str
    date: date
    drug_code: str


@dataclass(frozen=True, order=True)
class MedicalEvent:
    patient_id: str
    date: date
    code: ReadCode


@dataclass(frozen=True)
class Reject:
    path: str
    row: int
    reason: str


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_accepted: int = 0
    rows_rejected: int = 0
    distinct_patients: int = 0
    distinct_event_codes: int = 0
    rejects: list[Reject] = field(default_factory=list)

    def as_dict(self) -> dict[str, int]:
        return {
            "rows_read": self.rows_read,
            "rows_accepted": self.rows_accepted,
            "rows_rejected": self.rows_rejected,
            "distinct_patients": self.distinct_patients,
            "distinct_event_codes": self.distinct_event_codes,
        }


@dataclass(frozen=True)
class RecordStore:
    """Immutable, per-patient indexed view of the input tables.

    Per-patient tuples are sorted by (date, code) so that the store does not
    depend on input row order.
    """

    patients: frozenset[str]
    prescriptions: Mapping[str, tuple[Prescription, ...]]
    events: Mapping[str, tuple[MedicalEvent, ...]]

    @classmethod
    def build(
        cls,
        patients: Iterable[str],
        prescriptions: Iterable[Prescription],
        events: Iterable[MedicalEvent],
    ) -> "RecordStore":
        pset = frozenset(patients)
        rx: dict[str, list[Prescription]] = defaultdict(list)
        for p in prescriptions:
            rx[p.patient_id].append(p)
        ev: dict[str, list[MedicalEvent]] = defaultdict(list)
        for e in events:
            ev[e.patient_id].append(e)
        missing = (set(rx) | set(ev)) - pset
        if missing:
            raise ValueError(f"records reference unknown patients: {sorted(missing)[:5]}")
        return cls(
            patients=pset,
            prescriptions=MappingProxyType({k: tuple(sorted(v)) for k, v in sorted(rx.items())}),
            events=MappingProxyType({k: tuple(sorted(v)) for k, v in sorted(ev.items())}),
        )

    def events_for(self, patient_id: str) -> tuple[MedicalEvent, ...]:
        return self.events.get(patient_id, ())

    def prescriptions_for(self, patient_id: str) -> tuple[Prescription, ...]:
        return self.prescriptions.get(patient_id, ())

    def __eq__(self, other):
        if not isinstance(other, RecordStore):
            return NotImplemented
        return (
            self.patients == other.patients
            and dict(self.prescriptions) == dict(other.prescriptions)
            and dict(self.events) == dict(other.events)
        )

    __hash__ = None


def _rows(path: Path, header: tuple[str, ...]) -> Iterator[tuple[int, list[str]]]:
    """Yield (row_number, fields); row 1 is the header."""
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise FileUnreadable(f"{path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            first = next(reader, None)
        except (csv.Error, UnicodeDecodeError) as exc:
            raise FileUnreadable(f"{path}: {exc}") from exc
        if first is None or tuple(c.strip() for c in first) != header:
            raise MalformedRow(path, 1, f"expected header {','.join(header)!r}, got {first!r}")
        try:
            for fields in reader:
                yield reader.line_num, fields
        except (csv.Error, UnicodeDecodeError) as exc:
            raise FileUnreadable(f"{path}: {exc}") from exc


def _parse_date(text: str) -> date:
    # fromisoformat accepts more than YYYY-MM-DD on newer Pythons.
    if len(text) != 10 or text[4] != "-" or text[7] != "-":
        raise ValueError(f"bad date {text!r}")
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise ValueError(f"bad date {text!r}") from None


def load_store(
    patients_path,
    therapy_path,
    medical_path,
    strictness: Strictness | str = Strictness.STRICT,
) -> tuple[RecordStore, IngestReport]:
    """Load and validate the three input CSVs.

    In strict mode the first bad row raises :class:`MalformedRow`; otherwise
    bad rows are collected in the report and skipped.  Blank lines are
    ignored and not counted.
    """
    strict = Strictness(strictness) is Strictness.STRICT
    report = IngestReport()

    def reject(path, row, reason):
        if strict:
            raise MalformedRow(path, row, reason)
        report.rows_rejected += 1
        report.rejects.append(Reject(str(path), row, reason))

    patients: set[str] = set()
    ppath = Path(patients_path)
    for row, fields in _rows(ppath, PATIENTS_HEADER):
        if not fields:
            continue
        report.rows_read += 1
        if len(fields) != 1 or not fields[0].strip():
            reject(ppath, row, f"expected one non-empty patient_id, got {fields!r}")
            continue
        patients.add(fields[0].strip())
        report.rows_accepted += 1

    prescriptions: list[Prescription] = []
    tpath = Path(therapy_path)
    for row, fields in _rows(tpath, THERAPY_HEADER):
        if not fields:
            continue
        report.rows_read += 1
        if len(fields) != 3:
            reject(tpath, row, f"expected 3 fields, got {len(fields)}")
            continue
        pid, drug, when = (f.strip() for f in fields)
        if pid not in patients:
            reject(tpath, row, f"unknown patient {pid!r}")
            continue
        if not drug:
            reject(tpath, row, "empty drug_code")
            continue
        try:
            day = _parse_date(when)
        except ValueError as exc:
            reject(tpath, row, str(exc))
            continue
        prescriptions.append(Prescription(pid, day, drug))
        report.rows_accepted += 1

    events: list[MedicalEvent] = []
    mpath = Path(medical_path)
    for row, fields in _rows(mpath, MEDICAL_HEADER):
        if not fields:
            continue
        report.rows_read += 1
        if len(fields) != 3:
            reject(mpath, row, f"expected 3 fields, got {len(fields)}")
            continue
        pid, raw, when = fields[0].strip(), fields[1], fields[2].strip()
        if pid not in patients:
            reject(mpath, row, f"unknown patient {pid!r}")
            continue
        try:
            code = parse_readcode(raw)
            day = _parse_date(when)
        except (MalformedCode, ValueError) as exc:
            reject(mpath, row, str(exc))
            continue
        events.append(MedicalEvent(pid, day, code))
        report.rows_accepted += 1

    store = RecordStore.build(patients, prescriptions, events)
    report.distinct_patients = len(store.patients)
    report.distinct_event_codes = len({e.code for e in events})
    log.info(
        "ingested %d rows (%d rejected), %d patients",
        report.rows_read, report.rows_rejected, report.distinct_patients,
    )
    return store, report


def cohort_for_drug(store: RecordStore, drug_codes) -> list[tuple[str, date]]:
    """Exposed patients with the date of their first matching prescription."""
    codes = frozenset(drug_codes)
    if not codes:
        raise ValueError("drug_codes must be non-empty")
    cohort = []
    for pid in sorted(store.prescriptions):
        first = next((p.date for p in store.prescriptions[pid] if p.drug_code in codes), None)
        if first is not None:
            cohort.append((pid, first))
    if not cohort:
        raise EmptyCohort(f"no patient has a prescription for drug codes {sorted(codes)}")
    return cohort
