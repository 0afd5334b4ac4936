import sys
from datetime import date
from pathlib import Path

import pytest

from adrsignal.ingest import MedicalEvent, Prescription, RecordStore
from adrsignal.readcode import parse_readcode

DATA = Path(__file__).parent / "data"
sys.path.insert(0, str(Path(__file__).parent / "oracles"))


def make_store(patients, prescriptions=(), events=()):
    """Build a store from plain tuples.

    prescriptions: (patient_id, drug_code, 'YYYY-MM-DD')
    events:        (patient_id, readcode, 'YYYY-MM-DD')
    """
    return RecordStore.build(
        patients,
        [Prescription(p, date.fromisoformat(d), c) for p, c, d in prescriptions],
        [MedicalEvent(p, date.fromisoformat(d), parse_readcode(c)) for p, c, d in events],
    )


def store_from_population(pop):
    return RecordStore.build(
        pop.patients,
        [Prescription(p, d, c) for p, c, d in pop.therapy],
        [MedicalEvent(p, d, parse_readcode(c)) for p, c, d in pop.medical],
    )


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(v) for v in r) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)


@pytest.fixture
def data_dir():
    return DATA


# -- acceptance reporting ----------------------------------------------------

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion outcome for the terminal summary."""

    def record(name, passed, detail=""):
        _ACCEPTANCE[name] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
