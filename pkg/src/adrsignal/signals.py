"""Ranked adverse-reaction signal tables."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AxisMismatch, ReportIOError
from .readcode import Mode
from .stats import GroupedMatrix, TTestVariant, p_values, ratio_stats, t_statistics

DEFAULT_P_MAX = 0.05

REPORT_HEADER = ("rank", "readcode", "description", "NB", "NA", "R1", "R2", "t", "p")
STATISTICS_HEADER = ("readcode", "NB", "NA", "R1", "R2", "t", "p")


class Order(str, enum.Enum):
    ASCENDING_P = "p"
    DESCENDING_R1 = "r1"


class Direction(str, enum.Enum):
    INCREASE_ONLY = "increase"
    BOTH = "both"


class ReportFormat(str, enum.Enum):
    TSV = "tsv"
    CSV = "csv"


@dataclass(frozen=True)
class EventStatistic:
    event_key: str
    n_before: int
    n_after: int
    r1: float
    r2_percent: float
    t: float
    p: float


@dataclass(frozen=True)
class SignalRecord:
    event_key: str
    n_before: int
    n_after: int
    r1: float
    r2_percent: float
    t: float
    p: float
    rank: int
    description: str = ""


@dataclass(frozen=True)
class SignalQuery:
    order: Order = Order.ASCENDING_P
    p_max: float = DEFAULT_P_MAX
    direction: Direction = Direction.INCREASE_ONLY
    chapter_prefix: str | None = None
    top_k: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "order", Order(self.order))
        object.__setattr__(self, "direction", Direction(self.direction))
        if not 0 < self.p_max <= 1:
            raise ValueError(f"p_max must be in (0, 1], got {self.p_max}")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError(f"top_k must be at least 1, got {self.top_k}")
        if self.chapter_prefix == "":
            object.__setattr__(self, "chapter_prefix", None)

    def accepts(self, stat) -> bool:
        if not stat.p < self.p_max:
            return False
        if self.direction is Direction.INCREASE_ONLY and not stat.n_after > stat.n_before:
            return False
        if self.chapter_prefix is not None and not stat.event_key.startswith(self.chapter_prefix):
            return False
        return True


def _p_order(rec):
    return (rec.p, -rec.r1, rec.event_key)


def _r1_order(rec):
    return (-rec.r1, rec.p, rec.event_key)


def event_statistics(
    X: GroupedMatrix,
    Y: GroupedMatrix,
    counts_before: Sequence[int],
    counts_after: Sequence[int],
    n_population: int,
    *,
    variant: TTestVariant | str = TTestVariant.POOLED,
    workers: int = 1,
) -> list[EventStatistic]:
    """t-test and ratio statistics for every event on the shared axis.

    ``X``/``Y`` are the grouped before/after matrices; the count vectors are
    the ungrouped per-event patient counts over the whole cohort.
    """
    keys = [k.key for k in X.event_keys]
    if [k.key for k in Y.event_keys] != keys or X.group_sizes != Y.group_sizes:
        raise AxisMismatch("before and after grouped matrices do not share axes")
    counts_before = np.asarray(counts_before, dtype=np.int64)
    counts_after = np.asarray(counts_after, dtype=np.int64)
    if counts_before.shape != (len(keys),) or counts_after.shape != (len(keys),):
        raise AxisMismatch("count vectors do not align with the event axis")
    t, df = t_statistics(X.counts, Y.counts, variant)
    p = p_values(t, df, workers=workers)
    out = []
    for j, key in enumerate(keys):
        ratios = ratio_stats(int(counts_before[j]), int(counts_after[j]), n_population)
        out.append(
            EventStatistic(key, ratios.n_before, ratios.n_after, ratios.r1, ratios.r2_percent,
                           float(t[j]), float(p[j]))
        )
    return out


def _ranked(records, key) -> list[SignalRecord]:
    return [replace(r, rank=i) for i, r in enumerate(sorted(records, key=key), start=1)]


def select_signals(
    stats: Iterable[EventStatistic],
    query: SignalQuery = SignalQuery(),
    dictionary: Mapping[str, str] | None = None,
) -> list[SignalRecord]:
    """Filter per-event statistics by ``query`` and rank the survivors."""
    dictionary = dictionary or {}
    kept = [
        SignalRecord(s.event_key, s.n_before, s.n_after, s.r1, s.r2_percent, s.t, s.p,
                     rank=0, description=dictionary.get(s.event_key, ""))
        for s in stats
        if query.accepts(s)
    ]
    order = _p_order if query.order is Order.ASCENDING_P else _r1_order
    ranked = _ranked(kept, order)
    if query.top_k is not None:
        ranked = ranked[: query.top_k]
    return ranked


def detect_signals(
    X: GroupedMatrix,
    Y: GroupedMatrix,
    counts_before,
    counts_after,
    n_population: int,
    query: SignalQuery = SignalQuery(),
    dictionary: Mapping[str, str] | None = None,
    *,
    variant: TTestVariant | str = TTestVariant.POOLED,
    workers: int = 1,
) -> list[SignalRecord]:
    stats = event_statistics(X, Y, counts_before, counts_after, n_population,
                             variant=variant, workers=workers)
    return select_signals(stats, query, dictionary)


def rank_by_r1(records: Iterable[SignalRecord]) -> list[SignalRecord]:
    return _ranked(records, _r1_order)


def rank_by_p(records: Iterable[SignalRecord]) -> list[SignalRecord]:
    return _ranked(records, _p_order)


def format_ratio(value: float) -> str:
    """Two decimals, halves rounded away from zero."""
    return str(Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def format_p(p: float) -> str:
    return f"{p:.3e}"


def format_t(t: float) -> str:
    return f"{t:.4f}"


def report_filename(order: Order | str, mode: Mode | str, fmt: ReportFormat | str = ReportFormat.TSV) -> str:
    return f"signals_{Order(order).value}_{Mode(mode).value}.{ReportFormat(fmt).value}"


def render_report(records: Iterable[SignalRecord], dictionary: Mapping[str, str] | None = None,
                  fmt: ReportFormat | str = ReportFormat.TSV) -> str:
    dictionary = dictionary or {}
    buf = io.StringIO()
    delim = "\t" if ReportFormat(fmt) is ReportFormat.TSV else ","
    w = csv.writer(buf, delimiter=delim, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for r in records:
        w.writerow([
            r.rank, r.event_key, r.description or dictionary.get(r.event_key, ""),
            r.n_before, r.n_after, format_ratio(r.r1), format_ratio(r.r2_percent),
            format_t(r.t), format_p(r.p),
        ])
    return buf.getvalue()


def write_report(records, dictionary=None, fmt: ReportFormat | str = ReportFormat.TSV, out_path=None) -> None:
    text = render_report(records, dictionary, fmt)
    try:
        Path(out_path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportIOError(f"cannot write report {out_path}: {exc}") from exc


def write_statistics(stats: Iterable[EventStatistic], out_path) -> None:
    """Full-precision per-event table consumed by the ``report`` command."""
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(STATISTICS_HEADER)
    for s in stats:
        w.writerow([s.event_key, s.n_before, s.n_after, repr(s.r1), repr(s.r2_percent),
                    repr(s.t), repr(s.p)])
    try:
        Path(out_path).write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise ReportIOError(f"cannot write statistics {out_path}: {exc}") from exc


def read_statistics(path) -> list[EventStatistic]:
    try:
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh, delimiter="\t")
            header = next(reader, None)
            if header is None or tuple(header) != STATISTICS_HEADER:
                raise ReportIOError(f"{path}: not a statistics table")
            return [
                EventStatistic(row[0], int(row[1]), int(row[2]), float(row[3]), float(row[4]),
                               float(row[5]), float(row[6]))
                for row in reader if row
            ]
    except OSError as exc:
        raise ReportIOError(f"cannot read statistics {path}: {exc}") from exc


def is_significant(p: float, p_max: float = DEFAULT_P_MAX) -> bool:
    return not math.isnan(p) and p < p_max
