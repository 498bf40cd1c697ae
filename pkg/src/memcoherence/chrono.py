"""Lenient parsing and repair of HTTP datetime headers found in archives.

Archived responses carry whatever the original server sent, so besides the
three standard HTTP-date shapes (RFC 1123, RFC 850, asctime) the parser
recovers the common corruptions: Y2K-damaged years, local time zones,
French month/weekday names and sloppy zero padding. Every repair applied is
recorded on the result so callers can audit it.
"""

from __future__ import annotations

import calendar
import enum
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

__all__ = [
    "Repair",
    "UndefinedReason",
    "Ordering",
    "ArchivalDatetime",
    "DatetimeField",
    "DatetimeTables",
    "DEFAULT_TABLES",
    "DEFAULT_EPSILON_SECONDS",
    "load_tables",
    "parse_http_datetime",
    "validate_last_modified",
    "check_header_ordering",
    "format_http_datetime",
    "parse_user_datetime",
]

DEFAULT_EPSILON_SECONDS = 2

MIN_YEAR = 1900
MAX_YEAR = 2099


class Repair(str, enum.Enum):
    TWO_DIGIT_YEAR = "TwoDigitYear"
    ONE_DIGIT_YEAR = "OneDigitYear"
    THREE_DIGIT_YEAR = "ThreeDigitYear"
    TIMEZONE_CONVERTED = "TimezoneConverted"
    # covers weekday names as well as month names
    TRANSLATED_MONTH_NAME = "TranslatedMonthName"
    MISSING_LEADING_ZEROS = "MissingLeadingZeros"
    EXTRA_LEADING_ZEROS = "ExtraLeadingZeros"


class UndefinedReason(str, enum.Enum):
    ABSENT = "Absent"
    UNPARSEABLE = "Unparseable"
    CLEARLY_INCORRECT = "ClearlyIncorrect"


class Ordering(str, enum.Enum):
    STATIC = "StaticOrdering"
    DYNAMIC_SUSPECT = "DynamicSuspect"
    INCONSISTENT = "Inconsistent"
    INDETERMINATE = "Indeterminate"


_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
_WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
_MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun",
           "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")


def format_http_datetime(epoch_seconds: int) -> str:
    """Render epoch seconds as an RFC 1123 GMT date (locale independent)."""
    dt = _to_datetime(epoch_seconds)
    return "%s, %02d %s %04d %02d:%02d:%02d GMT" % (
        _WEEKDAYS[dt.weekday()], dt.day, _MONTHS[dt.month - 1], dt.year,
        dt.hour, dt.minute, dt.second)


def _to_datetime(epoch_seconds: int) -> datetime:
    return _EPOCH + timedelta(seconds=epoch_seconds)


@dataclass(frozen=True, order=True)
class ArchivalDatetime:
    """A one-second resolution GMT instant plus the repairs that produced it.

    Ordering and equality only look at ``epoch_seconds``.
    """

    epoch_seconds: int
    repairs: frozenset = field(default=frozenset(), compare=False)
    original_text: str = field(default="", compare=False)

    @classmethod
    def from_datetime(cls, dt: datetime, original_text: str = "") -> "ArchivalDatetime":
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return cls(calendar.timegm(dt.utctimetuple()), frozenset(), original_text)

    @classmethod
    def from_iso(cls, text: str) -> "ArchivalDatetime":
        return parse_user_datetime(text)

    @property
    def datetime(self) -> datetime:
        return _to_datetime(self.epoch_seconds)

    def http(self) -> str:
        return format_http_datetime(self.epoch_seconds)

    def iso(self) -> str:
        return self.datetime.strftime("%Y-%m-%d %H:%M:%SZ")

    def stamp(self) -> str:
        """14-digit wayback style timestamp."""
        return self.datetime.strftime("%Y%m%d%H%M%S")

    def __sub__(self, other: "ArchivalDatetime") -> int:
        return self.epoch_seconds - other.epoch_seconds

    def __repr__(self) -> str:
        extra = f", repairs={sorted(r.value for r in self.repairs)}" if self.repairs else ""
        return f"ArchivalDatetime({self.iso()!r}{extra})"


@dataclass(frozen=True)
class DatetimeField:
    """Either a defined datetime or an undefined one with a reason."""

    value: ArchivalDatetime | None = None
    reason: UndefinedReason | None = None

    def __post_init__(self):
        if self.value is None and self.reason is None:
            raise ValueError("undefined DatetimeField needs a reason")
        if self.value is not None and self.reason is not None:
            raise ValueError("defined DatetimeField cannot carry a reason")

    @classmethod
    def defined(cls, value: ArchivalDatetime) -> "DatetimeField":
        return cls(value=value)

    @classmethod
    def undefined(cls, reason: UndefinedReason) -> "DatetimeField":
        return cls(reason=reason)

    @classmethod
    def absent(cls) -> "DatetimeField":
        return cls(reason=UndefinedReason.ABSENT)

    @property
    def is_defined(self) -> bool:
        return self.value is not None

    def __repr__(self) -> str:
        if self.value is not None:
            return f"Defined({self.value!r})"
        return f"Undefined({self.reason.value})"


# -- translation / zone tables ------------------------------------------------


@dataclass(frozen=True)
class DatetimeTables:
    """Name lookups used by the parser.

    ``months`` and ``weekdays`` map lower-case, accent-free foreign tokens to
    the English abbreviation. ``zones`` maps upper-case zone names to offsets
    from GMT in seconds.
    """

    months: dict
    weekdays: dict
    zones: dict


_ENGLISH_MONTHS = {m.lower(): i + 1 for i, m in enumerate(_MONTHS)}
_ENGLISH_MONTHS.update({
    "january": 1, "february": 2, "march": 3, "april": 4, "june": 6,
    "july": 7, "august": 8, "september": 9, "october": 10, "november": 11,
    "december": 12,
})
_ENGLISH_WEEKDAYS = {d.lower() for d in _WEEKDAYS} | {
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"}

_FRENCH_MONTHS = {
    "janvier": "Jan", "janv": "Jan",
    "fevrier": "Feb", "fevr": "Feb", "fev": "Feb",
    "mars": "Mar",
    "avril": "Apr", "avr": "Apr",
    "mai": "May",
    "juin": "Jun",
    "juillet": "Jul", "juil": "Jul",
    "aout": "Aug",
    "septembre": "Sep", "sept": "Sep",
    "octobre": "Oct",
    "novembre": "Nov",
    "decembre": "Dec",
    # abbreviations shared with English; only reached when written with an
    # accent or a trailing dot
    "dec": "Dec", "oct": "Oct", "nov": "Nov",
}

_FRENCH_WEEKDAYS = {
    "lundi": "Mon", "lun": "Mon",
    "mardi": "Tue",
    "mercredi": "Wed", "mer": "Wed",
    "jeudi": "Thu", "jeu": "Thu",
    "vendredi": "Fri", "ven": "Fri",
    "samedi": "Sat", "sam": "Sat",
    "dimanche": "Sun", "dim": "Sun",
}
# "mar" (mardi) collides with the English month; weekday position decides

_ZONES = {
    "GMT": 0, "UT": 0, "UTC": 0, "Z": 0,
    "EST": -5 * 3600, "EDT": -4 * 3600,
    "CST": -6 * 3600, "CDT": -5 * 3600,
    "MST": -7 * 3600, "MDT": -6 * 3600,
    "PST": -8 * 3600, "PDT": -7 * 3600,
}

DEFAULT_TABLES = DatetimeTables(
    months=dict(_FRENCH_MONTHS), weekdays=dict(_FRENCH_WEEKDAYS), zones=dict(_ZONES))


def load_tables(path, base: DatetimeTables = DEFAULT_TABLES) -> DatetimeTables:
    """Extend ``base`` with entries from a ``key=value`` text file.

    Keys are prefixed with their table::

        month.januar = Jan
        weekday.donnerstag = Thu
        zone.CET = +0100

    Blank lines and ``#`` comments are ignored.
    """
    months, weekdays, zones = dict(base.months), dict(base.weekdays), dict(base.zones)
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line or "." not in line.split("=", 1)[0]:
            raise ValueError(f"{path}:{lineno}: expected <table>.<name> = <value>")
        key, value = (s.strip() for s in line.split("=", 1))
        table, name = key.split(".", 1)
        if table == "month":
            months[_fold(name)] = _english_month_abbr(value, path, lineno)
        elif table == "weekday":
            weekdays[_fold(name)] = value.strip().title()[:3]
        elif table == "zone":
            offset = _parse_offset(value)
            if offset is None:
                raise ValueError(f"{path}:{lineno}: bad zone offset {value!r}")
            zones[name.upper()] = offset
        else:
            raise ValueError(f"{path}:{lineno}: unknown table {table!r}")
    return DatetimeTables(months, weekdays, zones)


def _english_month_abbr(value, path, lineno):
    v = value.strip().lower()
    if v not in _ENGLISH_MONTHS:
        raise ValueError(f"{path}:{lineno}: {value!r} is not an English month")
    return _MONTHS[_ENGLISH_MONTHS[v] - 1]


def _fold(token: str) -> str:
    """Lower-case and strip accents and trailing dots."""
    decomposed = unicodedata.normalize("NFKD", token)
    return "".join(c for c in decomposed if not unicodedata.combining(c)).lower().rstrip(".")


# -- parser ---------------------------------------------------------------------

_OFFSET_RE = re.compile(r"^([+-])(\d{2}):?(\d{2})$")
_TIME_RE = re.compile(r"^(\d+):(\d+):(\d+)$")
_RFC850_DATE_RE = re.compile(r"^(\d+)-([^\W\d_]+\.?)-(\d+)$", re.UNICODE)


def _parse_offset(text: str) -> int | None:
    m = _OFFSET_RE.match(text.strip())
    if not m:
        return None
    sign = -1 if m.group(1) == "-" else 1
    hours, minutes = int(m.group(2)), int(m.group(3))
    if hours > 23 or minutes > 59:
        return None
    return sign * (hours * 3600 + minutes * 60)


class _Unparseable(Exception):
    pass


def _decode(raw) -> str:
    if isinstance(raw, (bytes, bytearray)):
        try:
            return bytes(raw).decode("utf-8")
        except UnicodeDecodeError:
            return bytes(raw).decode("latin-1")
    return raw


def _tokens(text: str) -> list[str]:
    out = []
    for tok in re.split(r"[\s,]+", text.strip()):
        if not tok:
            continue
        m = _RFC850_DATE_RE.match(tok)
        if m:
            out.extend(m.groups())
        else:
            out.append(tok)
    return out


def _field_number(tok: str, width: int, repairs: set) -> int:
    """Parse a fixed-width numeric field, noting padding repairs."""
    if not tok.isdigit():
        raise _Unparseable(tok)
    if len(tok) < width:
        repairs.add(Repair.MISSING_LEADING_ZEROS)
    elif len(tok) > width:
        if tok[: len(tok) - width].strip("0"):
            raise _Unparseable(tok)
        repairs.add(Repair.EXTRA_LEADING_ZEROS)
    return int(tok)


def _year(tok: str, repairs: set) -> int:
    if not tok.isdigit():
        raise _Unparseable(tok)
    if len(tok) > 4 or (len(tok) == 4 and tok.startswith("0")):
        stripped = tok.lstrip("0") or "0"
        repairs.add(Repair.EXTRA_LEADING_ZEROS)
        tok = stripped
    n = int(tok)
    if len(tok) == 1:
        repairs.add(Repair.ONE_DIGIT_YEAR)
        return n + 2000
    if len(tok) in (2, 3):
        repairs.add(Repair.TWO_DIGIT_YEAR if len(tok) == 2 else Repair.THREE_DIGIT_YEAR)
        return n + 1900
    return n


def _month(tok: str, tables: DatetimeTables, repairs: set) -> int:
    if tok.lower() in _ENGLISH_MONTHS:
        return _ENGLISH_MONTHS[tok.lower()]
    folded = _fold(tok)
    if folded in tables.months:
        repairs.add(Repair.TRANSLATED_MONTH_NAME)
        return _ENGLISH_MONTHS[tables.months[folded].lower()]
    if folded in _ENGLISH_MONTHS:
        return _ENGLISH_MONTHS[folded]
    raise _Unparseable(tok)


def _is_weekday(tok: str, tables: DatetimeTables, repairs: set) -> bool:
    if tok.lower() in _ENGLISH_WEEKDAYS:
        return True
    folded = _fold(tok)
    if folded in tables.weekdays or folded == "mar":
        repairs.add(Repair.TRANSLATED_MONTH_NAME)
        return True
    return False


def _time(tok: str, repairs: set) -> tuple[int, int, int]:
    m = _TIME_RE.match(tok)
    if not m:
        raise _Unparseable(tok)
    return tuple(_field_number(g, 2, repairs) for g in m.groups())


def _zone(tok: str, tables: DatetimeTables, repairs: set) -> int:
    if tok == "GMT":
        return 0
    offset = _parse_offset(tok)
    if offset is None:
        offset = tables.zones.get(tok.upper())
    if offset is None:
        raise _Unparseable(tok)
    repairs.add(Repair.TIMEZONE_CONVERTED)
    return offset


def _parse(text: str, tables: DatetimeTables) -> ArchivalDatetime:
    toks = _tokens(text)
    if not toks:
        raise _Unparseable(text)
    repairs: set = set()
    if not toks[0][:1].isdigit() and _is_weekday(toks[0], tables, repairs):
        try:
            return _parse_fields(text, toks[1:], tables, repairs)
        except _Unparseable:
            # "mar" is also an English month (asctime without weekday)
            if _fold(toks[0]) != "mar":
                raise
    return _parse_fields(text, toks, tables, set())


def _parse_fields(text, toks, tables, repairs) -> ArchivalDatetime:
    if len(toks) < 4:
        raise _Unparseable(text)
    if toks[0].isdigit():
        # RFC 1123 / RFC 850: day month year time zone
        if len(toks) != 5:
            raise _Unparseable(text)
        day = _field_number(toks[0], 2, repairs)
        month = _month(toks[1], tables, repairs)
        year = _year(toks[2], repairs)
        hh, mm, ss = _time(toks[3], repairs)
        offset = _zone(toks[4], tables, repairs)
    else:
        # asctime: month day time year [zone]; day is space padded by design
        if len(toks) not in (4, 5):
            raise _Unparseable(text)
        month = _month(toks[0], tables, repairs)
        if not toks[1].isdigit():
            raise _Unparseable(text)
        if len(toks[1]) > 2:
            _field_number(toks[1], 2, repairs)
        day = int(toks[1])
        hh, mm, ss = _time(toks[2], repairs)
        year = _year(toks[3], repairs)
        offset = _zone(toks[4], tables, repairs) if len(toks) == 5 else 0

    if not (MIN_YEAR <= year <= MAX_YEAR):
        raise _Unparseable(text)
    if not (1 <= day <= calendar.monthrange(year, month)[1]):
        raise _Unparseable(text)
    if hh > 23 or mm > 59 or ss > 59:
        raise _Unparseable(text)
    epoch = calendar.timegm((year, month, day, hh, mm, ss, 0, 0, 0)) - offset
    return ArchivalDatetime(epoch, frozenset(repairs), text)


def parse_http_datetime(raw, tables: DatetimeTables = DEFAULT_TABLES) -> DatetimeField:
    """Parse an HTTP datetime header value, repairing what can be repaired.

    ``None`` or a blank value is ``Undefined(Absent)``; anything that cannot
    be decoded is ``Undefined(Unparseable)``. Nothing is raised.

    >>> parse_http_datetime("Thu, 09 Dec 2004 19:29:26 GMT").value.iso()
    '2004-12-09 19:29:26Z'
    """
    if raw is None:
        return DatetimeField.absent()
    text = _decode(raw).strip()
    if not text:
        return DatetimeField.absent()
    try:
        return DatetimeField.defined(_parse(text, tables))
    except (_Unparseable, ValueError, KeyError, OverflowError):
        return DatetimeField.undefined(UndefinedReason.UNPARSEABLE)


def validate_last_modified(lm: DatetimeField, memento_datetime: ArchivalDatetime) -> DatetimeField:
    """A Last-Modified later than the capture itself cannot be right."""
    if lm.is_defined and lm.value > memento_datetime:
        return DatetimeField.undefined(UndefinedReason.CLEARLY_INCORRECT)
    return lm


def check_header_ordering(lm: DatetimeField, md: ArchivalDatetime,
                          date: DatetimeField | None = None,
                          epsilon_seconds: int = DEFAULT_EPSILON_SECONDS) -> Ordering:
    """Compare a raw (unvalidated) Last-Modified with Memento-Datetime.

    A well-behaved static resource has Last-Modified strictly before the
    capture. A missing Last-Modified, or one within ``epsilon_seconds`` of
    the capture or of the original response ``date``, suggests the server
    generated the representation on demand.
    """
    if epsilon_seconds < 0:
        raise ValueError("epsilon_seconds must be >= 0")
    if not lm.is_defined:
        if lm.reason is UndefinedReason.ABSENT:
            return Ordering.DYNAMIC_SUSPECT
        return Ordering.INDETERMINATE
    delta = lm.value - md
    if abs(delta) <= epsilon_seconds:
        return Ordering.DYNAMIC_SUSPECT
    if date is not None and date.is_defined and abs(lm.value - date.value) <= epsilon_seconds:
        return Ordering.DYNAMIC_SUSPECT
    if delta > epsilon_seconds:
        return Ordering.INCONSISTENT
    return Ordering.STATIC


_STAMP_RE = re.compile(r"^\d{4,14}$")
_ISO_RE = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})(?:[T ](\d{2}):(\d{2})(?::(\d{2}))?)?\s*(Z|[+-]\d{2}:?\d{2})?$")


def parse_user_datetime(text: str) -> ArchivalDatetime:
    """Parse a user supplied target datetime.

    Accepts ISO 8601 (``2004-12-09T19:29:26Z``; no zone means UTC), a
    wayback timestamp of 4 to 14 digits (``20041209192926``; missing
    trailing fields default to their minimum) or an HTTP date.
    """
    s = text.strip()
    if _STAMP_RE.match(s):
        padded = s + "0101000000"[len(s) - 4:] if len(s) < 14 else s
        try:
            dt = datetime.strptime(padded, "%Y%m%d%H%M%S")
        except ValueError:
            raise ValueError(f"invalid timestamp {text!r}") from None
        return ArchivalDatetime.from_datetime(dt, text)
    m = _ISO_RE.match(s)
    if m:
        y, mo, d, hh, mi, ss, zone = m.groups()
        try:
            dt = datetime(int(y), int(mo), int(d), int(hh or 0), int(mi or 0), int(ss or 0),
                          tzinfo=timezone.utc)
        except ValueError:
            raise ValueError(f"invalid datetime {text!r}") from None
        offset = 0 if zone in (None, "Z") else _parse_offset(zone)
        if offset is None:
            raise ValueError(f"invalid zone in {text!r}")
        return ArchivalDatetime(calendar.timegm(dt.utctimetuple()) - offset, frozenset(), text)
    parsed = parse_http_datetime(s)
    if parsed.is_defined:
        return parsed.value
    raise ValueError(f"unrecognised datetime {text!r}")
