"""End-to-end detection: ingest -> cohort -> grouped t-tests -> ranked signals."""

from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from .cohort import WindowSpec, build_matrices, column_patient_counts
from .errors import EmptyCohort, InvalidConfig
from .ingest import RecordStore, Strictness, cohort_for_drug, load_store
from .readcode import Mode, load_dictionary
from .signals import (
    DEFAULT_P_MAX,
    Direction,
    EventStatistic,
    Order,
    ReportFormat,
    SignalQuery,
    SignalRecord,
    event_statistics,
    is_significant,
    report_filename,
    select_signals,
    write_report,
    write_statistics,
)
from .stats import DEFAULT_GROUP_SIZE, Remainder, TTestVariant, group_patients

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    patients: str | None = None
    therapy: str | None = None
    medical: str | None = None
    drug_codes: tuple[str, ...] = ()
    window_days: int = 60
    mode: Mode = Mode.FULL
    group_size: int = DEFAULT_GROUP_SIZE
    remainder: Remainder = Remainder.DROP
    p_max: float = DEFAULT_P_MAX
    order: Order = Order.ASCENDING_P
    direction: Direction = Direction.INCREASE_ONLY
    chapter: str | None = None
    top_k: int | None = None
    test: TTestVariant = TTestVariant.POOLED
    strictness: Strictness = Strictness.STRICT
    dictionary: str | None = None
    format: ReportFormat = ReportFormat.TSV
    out: str = "out"
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    seed: int | None = None

    _ENUMS = {
        "mode": Mode, "remainder": Remainder, "order": Order, "direction": Direction,
        "test": TTestVariant, "strictness": Strictness, "format": ReportFormat,
    }

    def __post_init__(self):
        for name, enum_type in self._ENUMS.items():
            try:
                setattr(self, name, enum_type(getattr(self, name)))
            except ValueError as exc:
                raise InvalidConfig(f"{name}: {exc}") from None
        if isinstance(self.drug_codes, str):
            self.drug_codes = tuple(c.strip() for c in self.drug_codes.split(",") if c.strip())
        self.drug_codes = tuple(self.drug_codes)
        if self.window_days < 1:
            raise InvalidConfig("window_days must be at least 1")
        if self.group_size < 2:
            raise InvalidConfig("group_size must be at least 2")
        if not 0 < self.p_max <= 1:
            raise InvalidConfig("p_max must be in (0, 1]")
        if self.threads < 1:
            raise InvalidConfig("threads must be at least 1")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    def query(self) -> SignalQuery:
        return SignalQuery(self.order, self.p_max, self.direction, self.chapter, self.top_k)

    def echo(self) -> dict[str, str]:
        out = {}
        for name in self.field_names():
            value = getattr(self, name)
            if hasattr(value, "value"):
                value = value.value
            elif isinstance(value, tuple):
                value = ",".join(value)
            out[name] = "" if value is None else str(value)
        return out


@dataclass
class DetectResult:
    cohort_size: int
    group_count: int
    retained_patients: int
    event_axis: dict[Mode, int]
    statistics: list[EventStatistic]
    signals: list[SignalRecord]
    ingest: dict[str, int]

    @property
    def significant_events(self) -> int:
        return sum(1 for s in self.statistics if is_significant(s.p))

    def significant_increases(self) -> int:
        return sum(1 for s in self.statistics if is_significant(s.p) and s.n_after > s.n_before)


def detect(config: RunConfig, store: RecordStore | None = None, ingest_report=None) -> DetectResult:
    """Run detection in memory.  ``store`` skips ingestion when given."""
    if not config.drug_codes:
        raise InvalidConfig("no drug codes given")
    if store is None:
        missing = [n for n in ("patients", "therapy", "medical") if not getattr(config, n)]
        if missing:
            raise InvalidConfig(f"missing input paths: {', '.join(missing)}")
        store, ingest_report = load_store(config.patients, config.therapy, config.medical,
                                          config.strictness)
    cohort = cohort_for_drug(store, config.drug_codes)
    window = WindowSpec(config.window_days)

    axis = {}
    matrices = {}
    for mode in (Mode.FULL, Mode.LEVEL3):
        matrices[mode] = build_matrices(store, cohort, window, mode)
        axis[mode] = len(matrices[mode][0].event_keys)
    A, B = matrices[config.mode]
    if not A.event_keys:
        raise EmptyCohort("cohort has no medical events in either observation window")

    X = group_patients(A, config.group_size, config.remainder)
    Y = group_patients(B, config.group_size, config.remainder)
    stats = event_statistics(X, Y, column_patient_counts(A), column_patient_counts(B), len(cohort),
                             variant=config.test, workers=config.threads)
    dictionary = load_dictionary(config.dictionary) if config.dictionary else None
    signals = select_signals(stats, config.query(), dictionary)
    log.info("cohort %d, %d groups, %d events, %d signals",
             len(cohort), X.group_count, axis[config.mode], len(signals))
    return DetectResult(
        cohort_size=len(cohort),
        group_count=X.group_count,
        retained_patients=X.retained_patients,
        event_axis=axis,
        statistics=stats,
        signals=signals,
        ingest=ingest_report.as_dict() if ingest_report is not None else {},
    )


def summary_lines(config: RunConfig, result: DetectResult) -> list[str]:
    lines = [
        f"cohort_size={result.cohort_size}",
        f"group_count={result.group_count}",
        f"retained_patients={result.retained_patients}",
        f"events_full={result.event_axis[Mode.FULL]}",
        f"events_level3={result.event_axis[Mode.LEVEL3]}",
        f"events_tested={len(result.statistics)}",
        f"significant_events={result.significant_events}",
        f"significant_increases={result.significant_increases()}",
        f"signals_reported={len(result.signals)}",
    ]
    lines += [f"ingest.{k}={v}" for k, v in result.ingest.items()]
    lines += [f"config.{k}={v}" for k, v in config.echo().items()]
    return lines


def write_outputs(config: RunConfig, result: DetectResult, dictionary=None) -> dict[str, Path]:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "statistics": out / f"statistics_{config.mode.value}.tsv",
        "report": out / report_filename(config.order, config.mode, config.format),
        "summary": out / "summary.txt",
    }
    write_statistics(result.statistics, paths["statistics"])
    write_report(result.signals, dictionary, config.format, paths["report"])
    paths["summary"].write_text("\n".join(summary_lines(config, result)) + "\n", encoding="utf-8")
    return paths
