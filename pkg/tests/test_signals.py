import hashlib
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from adrsignal import synth
from adrsignal.cohort import build_matrices, column_patient_counts
from adrsignal.errors import AxisMismatch
from adrsignal.ingest import cohort_for_drug
from adrsignal.readcode import EventKey
from adrsignal.signals import (
    REPORT_HEADER,
    Direction,
    EventStatistic,
    Order,
    SignalQuery,
    SignalRecord,
    detect_signals,
    event_statistics,
    format_ratio,
    rank_by_p,
    rank_by_r1,
    read_statistics,
    render_report,
    report_filename,
    select_signals,
    write_report,
    write_statistics,
)
from adrsignal.stats import GroupedMatrix, group_patients

from conftest import store_from_population


def grouped(counts, keys):
    counts = np.asarray(counts)
    return GroupedMatrix(100, (100,) * counts.shape[0], tuple(EventKey(k) for k in keys), counts)


def test_identical_matrices_give_nothing():
    rng = np.random.default_rng(0)
    counts = rng.integers(0, 5, size=(10, 6))
    X = grouped(counts, [f"A{j}...00" for j in range(6)])
    n = counts.sum(axis=0)
    out = detect_signals(X, X, n, n, 1000, SignalQuery(direction=Direction.BOTH, p_max=1.0))
    assert out == []


def test_axis_mismatch():
    X = grouped(np.zeros((3, 2)), ["A0...00", "A1...00"])
    Y = grouped(np.zeros((3, 2)), ["A0...00", "A2...00"])
    with pytest.raises(AxisMismatch):
        event_statistics(X, Y, [0, 0], [0, 0], 10)
    with pytest.raises(AxisMismatch):
        event_statistics(X, X, [0], [0, 0], 10)


def run_synthetic(multiplier, seed=11):
    vocab = synth.make_vocabulary(120)
    target = vocab[37][0]
    cfg = synth.SynthConfig(seed=seed, n_exposed=3000, vocabulary=vocab,
                            injections=(synth.Injection(target, multiplier),))
    store = store_from_population(synth.simulate(cfg))
    cohort = cohort_for_drug(store, {cfg.drug_code})
    A, B = build_matrices(store, cohort)
    X, Y = group_patients(A), group_patients(B)
    recs = detect_signals(X, Y, column_patient_counts(A), column_patient_counts(B), len(cohort))
    return target, recs


def test_injected_event_ranks_first():
    target, recs = run_synthetic(5.0)
    assert recs[0].event_key == target
    # oracle: the same population without the lift does not flag it
    target, null = run_synthetic(1.0)
    assert target not in {r.event_key for r in null}


def stat(key, nb, na, p, t=-3.0, n=9093):
    r1 = na / nb if nb else float(na)
    return EventStatistic(key, nb, na, r1, 100 * na / n, t, p)


STATS = [
    stat("B49..00", 1, 11, 0.001),
    stat("B22..00", 1, 18, 0.01),
    stat("N24..00", 445, 1675, 1e-9),
    stat("I71..00", 419, 1501, 1e-12),
    stat("H06..00", 308, 100, 1e-6, t=4.0),  # decrease
    stat("C10..00", 4, 61, 0.2),  # not significant
]


def test_default_query_filters_and_orders():
    out = select_signals(STATS)
    assert [r.event_key for r in out] == ["I71..00", "N24..00", "B49..00", "B22..00"]
    assert [r.rank for r in out] == [1, 2, 3, 4]
    both = select_signals(STATS, SignalQuery(direction="both"))
    assert "H06..00" in {r.event_key for r in both}


def test_chapter_filter():
    out = select_signals(STATS, SignalQuery(chapter_prefix="B"))
    assert [r.event_key for r in out] == ["B49..00", "B22..00"]
    assert all(r.event_key.startswith("B") for r in out)


def test_top_k_and_r1_order():
    out = select_signals(STATS, SignalQuery(order=Order.DESCENDING_R1, top_k=2))
    assert [r.event_key for r in out] == ["B22..00", "B49..00"]
    with pytest.raises(ValueError):
        SignalQuery(top_k=0)
    with pytest.raises(ValueError):
        SignalQuery(p_max=0)


def rec(key, r1, p, nb=1, na=2):
    return SignalRecord(key, nb, na, r1, 0.1, -2.5, p, rank=0)


def test_rank_by_r1():
    out = rank_by_r1([rec("J15..00", 29.0, 0.01), rec("16J..00", 43.0, 0.02), rec("1C84.00", 35.0, 0.03)])
    assert [(r.event_key, r.rank) for r in out] == [("16J..00", 1), ("1C84.00", 2), ("J15..00", 3)]
    tie = rank_by_r1([rec("A", 16.0, 0.04), rec("B", 16.0, 0.01), rec("C", 16.0, 0.01)])
    assert [r.event_key for r in tie] == ["B", "C", "A"]
    assert [r.rank for r in rank_by_r1([rec("A", 1.0, 0.5)])] == [1]


def test_p_ties_prefer_larger_r1_then_key():
    out = rank_by_p([rec("Z", 2.0, 0.01), rec("Y", 3.0, 0.01), rec("X", 2.0, 0.01)])
    assert [r.event_key for r in out] == ["Y", "X", "Z"]


def test_report_row_layout(tmp_path):
    r = SignalRecord("IZ12.00", 133, 623, 623 / 133, 100 * 623 / 9093, -12.3456789, 1.234567e-20, rank=1)
    path = tmp_path / report_filename("p", "full")
    write_report([r], {"IZ12.00": "Chronic kidney disease stage 3"}, "tsv", path)
    lines = path.read_text().splitlines()
    assert lines[0] == "\t".join(REPORT_HEADER)
    assert lines[1] == "1\tIZ12.00\tChronic kidney disease stage 3\t133\t623\t4.68\t6.85\t-12.3457\t1.235e-20"
    assert path.name == "signals_p_full.tsv"


def test_report_csv_and_missing_description():
    r = SignalRecord("N24..00", 445, 1675, 1675 / 445, 100 * 1675 / 9093, -9.0, 0.0, rank=1)
    text = render_report([r], {}, "csv")
    assert text.splitlines()[1] == "1,N24..00,,445,1675,3.76,18.42,-9.0000,0.000e+00"


def test_empty_report_is_header_only(tmp_path):
    path = tmp_path / "signals_r1_level3.tsv"
    write_report([], None, "tsv", path)
    assert path.read_text() == "\t".join(REPORT_HEADER) + "\n"


def test_report_is_deterministic(tmp_path):
    digests = set()
    for i in range(3):
        path = tmp_path / f"r{i}.tsv"
        write_report(select_signals(STATS), None, "tsv", path)
        digests.add(hashlib.sha256(path.read_bytes()).hexdigest())
    assert len(digests) == 1


def test_statistics_roundtrip(tmp_path):
    path = tmp_path / "statistics_full.tsv"
    stats = STATS + [stat("X00..00", 0, 0, 1.0, t=0.0), stat("Y00..00", 0, 3, 0.0, t=float("-inf"))]
    write_statistics(stats, path)
    assert read_statistics(path) == stats


@pytest.mark.parametrize("value, text", [(4.685, "4.69"), (0.125, "0.13"), (43.0, "43.00"), (2.0 / 3, "0.67")])
def test_format_ratio_half_up(value, text):
    assert format_ratio(value) == text


keys = st.text(alphabet="ABN0123", min_size=7, max_size=7)
stats_lists = st.lists(
    st.builds(
        lambda k, nb, na, p: stat(k, nb, na, p),
        keys, st.integers(0, 50), st.integers(0, 50), st.floats(0, 1),
    ),
    max_size=40,
    unique_by=lambda s: s.event_key,
)


@given(stats_lists, st.sampled_from(list(Direction)), st.floats(0.001, 1.0))
def test_filter_properties(stats, direction, p_max):
    q = SignalQuery(p_max=p_max, direction=direction)
    by_p = select_signals(stats, q)
    by_r1 = select_signals(stats, replace(q, order=Order.DESCENDING_R1))
    assert all(r.p < p_max for r in by_p)
    if direction is Direction.INCREASE_ONLY:
        assert all(r.n_after > r.n_before for r in by_p)
    strip = lambda rs: Counter(replace(r, rank=0) for r in rs)
    assert strip(by_p) == strip(by_r1)
    assert [r.rank for r in by_p] == list(range(1, len(by_p) + 1))
    chapter = select_signals(stats, replace(q, chapter_prefix="B"))
    expected = {r.event_key for r in by_p if r.event_key.startswith("B")}
    assert {r.event_key for r in chapter} == expected
