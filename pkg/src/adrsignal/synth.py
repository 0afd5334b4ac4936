"""Seeded synthetic exposed cohorts with known injected reactions.

Random numbers
--------------
Every patient draws from its own PCG64 (XSL-RR 128/64) stream.  The stream
for patient ``i`` (0-based, exposed patients first) is seeded from four
SplitMix64 outputs ``w[4i] .. w[4i+3]`` of the master seed::

    state = (w[4i] << 64) | w[4i+1]
    inc   = ((w[4i+2] << 64) | w[4i+3]) | 1

Doubles are ``(next_u64 >> 11) * 2**-53``.  Per patient the draws are
consumed in this order:

1. one double for the index date, ``start + floor(u * span_days)``;
2. window events, simulated as independent daily Bernoulli trials by
   geometric skipping.  Slots are (before-window codes in vocabulary order,
   then after-window codes).  In each round every still-active slot draws
   one double, in slot order, and advances
   ``pos += 1 + floor(log1p(-u) / log1p(-p))``; a slot emits an event on day
   ``pos`` while ``pos < days`` and retires otherwise;
3. a Poisson(``noise_events_per_patient``) count by Knuth's product method,
   then two doubles per noise event (code, day).  Noise events fall outside
   both observation windows, within ``noise_span_days`` of the index date.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .errors import InvalidConfig, MalformedCode
from .readcode import parse_readcode

MASK64 = (1 << 64) - 1
SPLITMIX_GAMMA = 0x9E3779B97F4A7C15

# Characters for generated vocabulary codes; letters double as chapters.
_CHAPTERS = "ABCDEFGHJKLMNPRS"
_ALNUM = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"


def splitmix64(seed: int, index: int) -> int:
    """Output number ``index`` (0-based) of SplitMix64 started at ``seed``."""
    z = (seed + (index + 1) * SPLITMIX_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def patient_stream_state(seed: int, patient_index: int) -> tuple[int, int]:
    w = [splitmix64(seed & MASK64, 4 * patient_index + k) for k in range(4)]
    return (w[0] << 64) | w[1], ((w[2] << 64) | w[3]) | 1


def patient_generator(seed: int, patient_index: int, bitgen: np.random.PCG64 | None = None) -> np.random.Generator:
    bitgen = bitgen or np.random.PCG64(0)
    state, inc = patient_stream_state(seed, patient_index)
    bitgen.state = {
        "bit_generator": "PCG64",
        "state": {"state": state, "inc": inc},
        "has_uint32": 0,
        "uinteger": 0,
    }
    return np.random.Generator(bitgen)


@dataclass(frozen=True)
class Injection:
    code: str
    multiplier: float
    after_only: bool = True


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 1
    n_exposed: int = 2000
    n_unexposed: int = 0
    noise_events_per_patient: float = 2.0
    # (code, baseline daily probability)
    vocabulary: tuple[tuple[str, float], ...] = ()
    injections: tuple[Injection, ...] = ()
    index_start: date = date(2005, 1, 1)
    index_end: date = date(2010, 12, 31)
    drug_code: str = "DRUG0001"
    other_drug_code: str = "DRUG0002"
    window_days: int = 60
    noise_span_days: int = 365

    def validate(self) -> None:
        if not 0 <= self.seed <= MASK64:
            raise InvalidConfig("seed must be an unsigned 64-bit integer")
        if self.n_exposed < 1 or self.n_unexposed < 0:
            raise InvalidConfig("need n_exposed >= 1 and n_unexposed >= 0")
        if self.noise_events_per_patient < 0 or self.noise_events_per_patient > 50:
            raise InvalidConfig("noise_events_per_patient must be in [0, 50]")
        if not self.vocabulary:
            raise InvalidConfig("vocabulary is empty")
        seen = set()
        for code, p in self.vocabulary:
            try:
                parse_readcode(code)
            except MalformedCode as exc:
                raise InvalidConfig(f"vocabulary: {exc}") from exc
            if code in seen:
                raise InvalidConfig(f"vocabulary lists {code!r} twice")
            seen.add(code)
            if not 0 < p < 1:
                raise InvalidConfig(f"baseline probability for {code!r} must be in (0, 1)")
        rates = dict(self.vocabulary)
        for inj in self.injections:
            if inj.code not in rates:
                raise InvalidConfig(f"injected code {inj.code!r} is not in the vocabulary")
            if not inj.multiplier > 0:
                raise InvalidConfig(f"multiplier for {inj.code!r} must be positive")
            if not rates[inj.code] * inj.multiplier < 1:
                raise InvalidConfig(f"injected daily probability for {inj.code!r} reaches 1")
        if len({inj.code for inj in self.injections}) != len(self.injections):
            raise InvalidConfig("a code is injected more than once")
        if self.index_end < self.index_start:
            raise InvalidConfig("index_end precedes index_start")
        if self.window_days < 1 or self.noise_span_days <= self.window_days:
            raise InvalidConfig("need 1 <= window_days < noise_span_days")
        if not self.drug_code or self.drug_code == self.other_drug_code:
            raise InvalidConfig("drug_code must be non-empty and differ from other_drug_code")


def daily_probability(window_rate: float, days: int) -> float:
    """Daily Bernoulli probability giving ``window_rate`` chance of >= 1 event."""
    return -math.expm1(math.log1p(-window_rate) / days)


def make_vocabulary(n_codes: int, window_rate: float = 0.01, days: int = 60,
                    spread: float = 0.5) -> tuple[tuple[str, float], ...]:
    """Deterministic vocabulary of valid codes, four per level-3 stem.

    Window rates vary around ``window_rate`` by +/- ``spread``/2 relative.
    Each stem contributes its level-3 code, a level-4 child, a level-5
    grandchild and a level-4 synonym, so level-3 truncation merges codes.
    """
    if n_codes < 1:
        raise InvalidConfig("n_codes must be positive")
    golden = (math.sqrt(5) - 1) / 2
    out = []
    for i in range(n_codes):
        s, j = divmod(i, 4)
        stem = (_CHAPTERS[s % len(_CHAPTERS)]
                + _ALNUM[(s // len(_CHAPTERS)) % 36]
                + _ALNUM[(s // (len(_CHAPTERS) * 36)) % 36])
        code = (stem + "..00", stem + "1.00", stem + "1100", stem + "2.11")[j]
        rate = window_rate * (1 - spread / 2 + spread * ((i * golden) % 1.0))
        out.append((code, daily_probability(rate, days)))
    return tuple(out)


def spread_injections(vocabulary, n: int, multiplier: float) -> tuple[Injection, ...]:
    """Inject ``n`` codes spaced evenly through the vocabulary."""
    if n == 0:
        return ()
    if n > len(vocabulary):
        raise InvalidConfig("more injections than vocabulary codes")
    step = len(vocabulary) // n
    return tuple(Injection(vocabulary[k * step][0], multiplier) for k in range(n))


def default_config(**overrides) -> SynthConfig:
    vocab = make_vocabulary(overrides.pop("n_codes", 200), overrides.pop("window_rate", 0.01),
                            overrides.get("window_days", 60))
    n_inj = overrides.pop("n_injected", 10)
    mult = overrides.pop("multiplier", 4.0)
    overrides.setdefault("injections", spread_injections(vocab, n_inj, mult))
    return SynthConfig(vocabulary=vocab, **overrides)


@dataclass
class Population:
    patients: list[str]
    therapy: list[tuple[str, str, date]]
    medical: list[tuple[str, str, date]]
    truth: list[tuple[str, float]]
    index_dates: dict[str, date] = field(default_factory=dict)


def _window_events(rng, before_p, after_p, days):
    """Yield (slot, day) for every simulated occurrence; see module docs."""
    probs = np.concatenate([before_p, after_p])
    log_q = np.log1p(-probs)
    slots = np.arange(probs.size)
    pos = np.full(probs.size, -1.0)
    hits_slot, hits_day = [], []
    while slots.size:
        u = rng.random(slots.size)
        pos = pos + 1.0 + np.floor(np.log1p(-u) / log_q[slots])
        alive = pos < days
        slots, pos = slots[alive], pos[alive]
        hits_slot.append(slots)
        hits_day.append(pos.astype(np.int64))
    if not hits_slot:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(hits_slot), np.concatenate(hits_day)


def _poisson_knuth(rng, lam: float) -> int:
    if lam <= 0:
        return 0
    limit = math.exp(-lam)
    k = 0
    prod = rng.random()
    while prod > limit:
        k += 1
        prod *= rng.random()
    return k


def simulate(config: SynthConfig) -> Population:
    """Simulate the population in memory; see the module docstring."""
    config.validate()
    days = config.window_days
    codes = [c for c, _ in config.vocabulary]
    base = np.array([p for _, p in config.vocabulary])
    mult_before = np.ones_like(base)
    mult_after = np.ones_like(base)
    index_of = {c: i for i, c in enumerate(codes)}
    for inj in config.injections:
        mult_after[index_of[inj.code]] = inj.multiplier
        if not inj.after_only:
            mult_before[index_of[inj.code]] = inj.multiplier
    before_p, after_p = base * mult_before, base * mult_after
    control_p = base

    total = config.n_exposed + config.n_unexposed
    width = max(6, len(str(total)))
    span = (config.index_end - config.index_start).days + 1
    outside = config.noise_span_days - days  # noise days per side
    n_codes = len(codes)

    pop = Population([], [], [], [(inj.code, inj.multiplier) for inj in config.injections])
    bitgen = np.random.PCG64(0)
    for i in range(total):
        pid = f"P{i + 1:0{width}d}"
        exposed = i < config.n_exposed
        rng = patient_generator(config.seed, i, bitgen)
        index = config.index_start + timedelta(days=int(rng.random() * span))
        pop.patients.append(pid)
        pop.therapy.append((pid, config.drug_code if exposed else config.other_drug_code, index))
        pop.index_dates[pid] = index

        slot, day = _window_events(rng, before_p if exposed else control_p,
                                   after_p if exposed else control_p, days)
        rows = []
        for s, d in zip(slot.tolist(), day.tolist()):
            offset = d - days if s < n_codes else d
            rows.append((index + timedelta(days=offset), codes[s % n_codes]))
        for _ in range(_poisson_knuth(rng, config.noise_events_per_patient)):
            code = codes[int(rng.random() * n_codes)]
            k = int(rng.random() * 2 * outside)
            offset = -config.noise_span_days + k if k < outside else days + (k - outside)
            rows.append((index + timedelta(days=offset), code))
        rows.sort()
        pop.medical.extend((pid, code, when) for when, code in rows)
    return pop


def write_population(pop: Population, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {name: out_dir / f"{name}.csv" for name in ("patients", "therapy", "medical", "truth")}

    def dump(path, header, rows):
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    dump(paths["patients"], ["patient_id"], ([p] for p in pop.patients))
    dump(paths["therapy"], ["patient_id", "drug_code", "date"],
         ((p, drug, d.isoformat()) for p, drug, d in pop.therapy))
    dump(paths["medical"], ["patient_id", "readcode", "date"],
         ((p, code, d.isoformat()) for p, code, d in pop.medical))
    dump(paths["truth"], ["readcode", "multiplier"], ((c, repr(float(m))) for c, m in pop.truth))
    return paths


def generate(config: SynthConfig, out_dir) -> dict[str, Path]:
    """Write patients/therapy/medical CSVs and the ``truth.csv`` manifest."""
    return write_population(simulate(config), out_dir)


def read_truth(path) -> dict[str, float]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return {row["readcode"]: float(row["multiplier"]) for row in csv.DictReader(fh)}
