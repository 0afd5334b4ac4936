"""Grouped count matrices, per-event t-tests and before/after ratios."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .cohort import FeatureMatrix
from .errors import AxisMismatch, BadPopulation, DegenerateInput, LengthMismatch, TooFewPatients
from .readcode import EventKey
from .tdist import two_sided_p

DEFAULT_GROUP_SIZE = 100
# Below this many events a process pool costs more than it saves.
_PARALLEL_MIN_EVENTS = 4000


class Remainder(str, enum.Enum):
    DROP = "drop"
    PARTIAL = "partial"


class TTestVariant(str, enum.Enum):
    POOLED = "pooled"
    PAIRED = "paired"


@dataclass(frozen=True)
class GroupedMatrix:
    group_size: int
    group_sizes: tuple[int, ...]
    event_keys: tuple[EventKey, ...]
    counts: np.ndarray

    @property
    def group_count(self) -> int:
        return len(self.group_sizes)

    @property
    def retained_patients(self) -> int:
        return sum(self.group_sizes)


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p: float


@dataclass(frozen=True)
class RatioStats:
    n_before: int
    n_after: int
    r1: float
    r2_percent: float


def group_patients(
    matrix: FeatureMatrix,
    group_size: int = DEFAULT_GROUP_SIZE,
    remainder: Remainder | str = Remainder.DROP,
) -> GroupedMatrix:
    """Sum consecutive blocks of ``group_size`` patients per event column.

    With ``Remainder.DROP`` a trailing partial block is discarded; with
    ``Remainder.PARTIAL`` it is kept as a smaller final group.
    """
    if group_size < 2:
        raise ValueError(f"group_size must be at least 2, got {group_size}")
    remainder = Remainder(remainder)
    n = len(matrix.patient_ids)
    full, rest = divmod(n, group_size)
    sizes = [group_size] * full
    if remainder is Remainder.PARTIAL and rest:
        sizes.append(rest)
    if len(sizes) < 2:
        raise TooFewPatients(
            f"{n} patients give {len(sizes)} group(s) of {group_size}; at least 2 are needed"
        )
    retained = sum(sizes)
    rows = np.arange(retained)
    block = sparse.csr_matrix(
        (np.ones(retained, dtype=np.int64), (rows // group_size, rows)),
        shape=(len(sizes), n),
    )
    counts = np.asarray((block @ matrix.cells.astype(np.int64)).todense(), dtype=np.int64)
    return GroupedMatrix(group_size, tuple(sizes), matrix.event_keys, counts)


def _degenerate(diff: float) -> tuple[float, float]:
    if diff == 0:
        return 0.0, 1.0
    return math.copysign(math.inf, diff), 0.0


def t_test_pooled(x, y) -> TTestResult:
    """Unpaired two-sample Student t-test with pooled variance, two-sided.

    ``t`` is positive when ``x`` has the larger mean.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"samples must be 1-D and equal length, got {x.shape} and {y.shape}")
    g = x.size
    if g < 2:
        raise DegenerateInput("need at least 2 observations per sample")
    df = 2 * g - 2
    if x.min() == x.max() and y.min() == y.max():
        t, p = _degenerate(x[0] - y[0])
        return TTestResult(t, float(df), p)
    diff = x.mean() - y.mean()
    pooled = (((x - x.mean()) ** 2).sum() + ((y - y.mean()) ** 2).sum()) / df
    t = diff / math.sqrt(pooled * 2.0 / g)
    return TTestResult(float(t), float(df), two_sided_p(t, df))


def t_test_paired(x, y) -> TTestResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"samples must be 1-D and equal length, got {x.shape} and {y.shape}")
    g = x.size
    if g < 2:
        raise DegenerateInput("need at least 2 pairs")
    d = x - y
    df = g - 1
    if d.min() == d.max():
        t, p = _degenerate(d[0])
        return TTestResult(t, float(df), p)
    var = ((d - d.mean()) ** 2).sum() / df
    t = d.mean() / math.sqrt(var / g)
    return TTestResult(float(t), float(df), two_sided_p(t, df))


def t_statistics(X: np.ndarray, Y: np.ndarray, kind: TTestVariant | str = TTestVariant.POOLED):
    """Column-wise t statistics for g x E count matrices.

    Returns ``(t, df)`` with ``t`` as a float array; columns with zero
    variance get 0 or +/-inf following the single-test degenerate rules.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != Y.shape:
        raise AxisMismatch(f"grouped matrices differ in shape: {X.shape} vs {Y.shape}")
    g = X.shape[0]
    if g < 2:
        raise DegenerateInput("need at least 2 groups")
    if TTestVariant(kind) is TTestVariant.PAIRED:
        D = X - Y
        df = g - 1
        flat = D.min(axis=0) == D.max(axis=0)
        flat_diff = D[0]
        diff = D.mean(axis=0)
        scale = ((D - diff) ** 2).sum(axis=0) / df / g
    else:
        df = 2 * g - 2
        flat = (X.min(axis=0) == X.max(axis=0)) & (Y.min(axis=0) == Y.max(axis=0))
        flat_diff = X[0] - Y[0]
        diff = X.mean(axis=0) - Y.mean(axis=0)
        var = (((X - X.mean(axis=0)) ** 2).sum(axis=0) + ((Y - Y.mean(axis=0)) ** 2).sum(axis=0)) / df
        scale = var * 2.0 / g
    t = np.empty_like(diff)
    t[~flat] = diff[~flat] / np.sqrt(scale[~flat])
    t[flat] = np.where(flat_diff[flat] == 0, 0.0, np.copysign(np.inf, flat_diff[flat]))
    return t, float(df)


def _p_values_chunk(args) -> list[float]:
    ts, df = args
    return [two_sided_p(t, df) for t in ts]


def p_values(t: np.ndarray, df: float, workers: int = 1) -> np.ndarray:
    """Two-sided p for each t, optionally spread over a process pool."""
    ts = [float(v) for v in t]
    if workers <= 1 or len(ts) < _PARALLEL_MIN_EVENTS:
        return np.array(_p_values_chunk((ts, df)), dtype=float)
    step = math.ceil(len(ts) / workers)
    chunks = [(ts[i:i + step], df) for i in range(0, len(ts), step)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_p_values_chunk, chunks))
    return np.array([p for part in parts for p in part], dtype=float)


def ratio_stats(n_before: int, n_after: int, n_population: int) -> RatioStats:
    """R1 = N_A / N_B (or N_A when N_B is 0); R2 = N_A / N in percent."""
    if n_population <= 0 or min(n_before, n_after) < 0 or max(n_before, n_after) > n_population:
        raise BadPopulation(
            f"need 0 <= n_before, n_after <= n_population and n_population > 0; "
            f"got {n_before}, {n_after}, {n_population}"
        )
    r1 = n_after / n_before if n_before else float(n_after)
    return RatioStats(int(n_before), int(n_after), r1, 100.0 * n_after / n_population)
