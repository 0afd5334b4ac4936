"""Read code parsing and hierarchy helpers.

A Read code is 7 characters: a 5-character hierarchical core, right-padded
with dots, followed by a 2-character term (synonym) suffix.  The level of a
code is the number of non-dot characters in its core, so ``N24..00`` is a
level-3 code and ``N245111`` is level 5.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from .errors import FileUnreadable, MalformedCode

CODE_LENGTH = 7
CORE_LENGTH = 5

_ALNUM = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789")


class Mode(str, enum.Enum):
    """Event identity used for the event axis."""

    FULL = "full"
    LEVEL3 = "level3"


@dataclass(frozen=True, order=True)
class ReadCode:
    raw: str

    @property
    def core(self) -> str:
        return self.raw[:CORE_LENGTH]

    @property
    def term(self) -> str:
        return self.raw[CORE_LENGTH:]

    @property
    def level(self) -> int:
        return len(self.core.rstrip("."))

    @property
    def chapter(self) -> str:
        return self.raw[0]

    def __str__(self) -> str:
        return self.raw


@dataclass(frozen=True, order=True)
class EventKey:
    key: str
    mode: Mode = Mode.FULL

    def __str__(self) -> str:
        return self.key


def parse_readcode(raw: str) -> ReadCode:
    """Validate ``raw`` and return it as a :class:`ReadCode`.

    Raises :class:`MalformedCode` for anything that is not a 7-character
    string with a dot-padded alphanumeric core and an alphanumeric term.
    """
    if not isinstance(raw, str):
        raise MalformedCode(f"Read code must be a string, got {type(raw).__name__}")
    return _parse(raw)


@lru_cache(maxsize=1 << 16)
def _parse(raw: str) -> ReadCode:
    if len(raw) != CODE_LENGTH:
        raise MalformedCode(f"Read code {raw!r} must have {CODE_LENGTH} characters")
    core, term = raw[:CORE_LENGTH], raw[CORE_LENGTH:]
    stem = core.rstrip(".")
    if not stem:
        raise MalformedCode(f"Read code {raw!r} has an empty core")
    if any(ch not in _ALNUM for ch in stem):
        if "." in stem:
            raise MalformedCode(f"Read code {raw!r} has a non-trailing dot in its core")
        raise MalformedCode(f"Read code {raw!r} has a non-alphanumeric core character")
    if any(ch not in _ALNUM for ch in term):
        raise MalformedCode(f"Read code {raw!r} has an invalid term suffix {term!r}")
    return ReadCode(raw)


def full_key(code: ReadCode) -> EventKey:
    return EventKey(code.raw, Mode.FULL)


def to_level3_key(code: ReadCode) -> EventKey:
    # Level 1-2 codes keep their padding dots in positions 2-3.
    return EventKey(code.core[:3] + ".." + "00", Mode.LEVEL3)


def event_key(code: ReadCode, mode: Mode | str) -> EventKey:
    if Mode(mode) is Mode.LEVEL3:
        return to_level3_key(code)
    return full_key(code)


def chapter_of(code: ReadCode) -> str:
    return code.raw[0]


def load_dictionary(path) -> dict[str, str]:
    """Read a ``code,description`` CSV into a mapping.

    Codes are not validated here; the dictionary only decorates reports.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"code", "description"} <= set(reader.fieldnames):
                raise FileUnreadable(f"{path}: expected header 'code,description'")
            return {row["code"]: row["description"] for row in reader}
    except OSError as exc:
        raise FileUnreadable(f"{path}: {exc}") from exc
