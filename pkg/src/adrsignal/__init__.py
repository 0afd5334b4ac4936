"""Adverse drug reaction signal detection from before/after exposure windows.

Exposed patients' coded medical events are collected in fixed windows before
and after their first prescription, summed over blocks of patients, and
compared event by event with a two-sample Student t-test.  Significant
events are ranked by p value or by the after/before patient-count ratio.
"""

from .cohort import FeatureMatrix, Side, WindowSpec, build_matrices, column_patient_counts
from .ingest import MedicalEvent, Prescription, RecordStore, Strictness, cohort_for_drug, load_store
from .readcode import EventKey, Mode, ReadCode, chapter_of, parse_readcode, to_level3_key
from .signals import (
    Direction,
    Order,
    SignalQuery,
    SignalRecord,
    detect_signals,
    rank_by_r1,
    write_report,
)
from .stats import GroupedMatrix, RatioStats, Remainder, TTestResult, group_patients, ratio_stats, t_test_pooled
from .tdist import t_cdf_complement

__version__ = "0.1.0"
