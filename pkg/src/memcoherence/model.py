"""Memento vocabulary: original resources, mementos, timemaps, composites."""

from __future__ import annotations

import bisect
import enum
import hashlib
import logging
from dataclasses import dataclass, field, replace
from urllib.parse import urlsplit

from .chrono import ArchivalDatetime, DatetimeField

log = logging.getLogger(__name__)


class MementoFlag(str, enum.Enum):
    LIVE_WEB_REDIRECT = "LiveWebRedirect"
    UNRETRIEVABLE = "Unretrievable"
    DYNAMIC_SUSPECT = "DynamicSuspect"


class Resolution(str, enum.Enum):
    RESOLVED = "Resolved"
    NOT_ARCHIVED = "NotArchived"
    MISSING_MEMENTO = "MissingMemento"


def is_absolute_uri(uri: str) -> bool:
    parts = urlsplit(uri)
    return bool(parts.scheme and parts.netloc)


@dataclass(frozen=True, order=True)
class OriginalResourceRef:
    uri_r: str

    def __post_init__(self):
        if not is_absolute_uri(self.uri_r):
            raise ValueError(f"URI-R must be absolute: {self.uri_r!r}")

    def __str__(self) -> str:
        return self.uri_r


def digest(body: bytes) -> str:
    return "sha256:" + hashlib.sha256(body).hexdigest()


@dataclass(frozen=True)
class MementoRecord:
    """One archived capture.

    ``memento_datetime`` is mandatory; ``last_modified`` should already have
    been through :func:`~memcoherence.chrono.validate_last_modified`.
    """

    uri_m: str
    memento_datetime: ArchivalDatetime
    last_modified: DatetimeField = field(default_factory=DatetimeField.absent)
    response_date: DatetimeField = field(default_factory=DatetimeField.absent)
    body: bytes | None = field(default=None, repr=False)
    body_digest: str | None = None
    media_type: str | None = None
    flags: frozenset = frozenset()

    def __post_init__(self):
        if not isinstance(self.memento_datetime, ArchivalDatetime):
            raise TypeError("memento_datetime must be an ArchivalDatetime")
        if self.body is not None:
            d = digest(self.body)
            if self.body_digest is None:
                object.__setattr__(self, "body_digest", d)
            elif self.body_digest != d:
                raise ValueError(f"body_digest does not match body for {self.uri_m}")
        elif self.body_digest is not None:
            raise ValueError("body_digest without body")

    @property
    def retrievable(self) -> bool:
        return MementoFlag.UNRETRIEVABLE not in self.flags

    @property
    def live_web(self) -> bool:
        return MementoFlag.LIVE_WEB_REDIRECT in self.flags

    def with_flags(self, *flags: MementoFlag) -> "MementoRecord":
        return replace(self, flags=self.flags | frozenset(flags))

    def without_body(self) -> "MementoRecord":
        return replace(self, body=None, body_digest=None)


@dataclass(frozen=True)
class TimeMapRecord:
    """All known mementos of one URI-R, ascending by Memento-Datetime.

    The constructor sorts; ties keep their source order.
    """

    resource: OriginalResourceRef
    mementos: tuple = ()
    original: str | None = None
    timemap_uri: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "mementos",
                           tuple(sorted(self.mementos, key=lambda m: m.memento_datetime)))

    def __len__(self) -> int:
        return len(self.mementos)

    def __iter__(self):
        return iter(self.mementos)

    def __bool__(self) -> bool:
        return bool(self.mementos)

    def _epochs(self) -> list[int]:
        return [m.memento_datetime.epoch_seconds for m in self.mementos]

    def neighbors(self, pivot: ArchivalDatetime):
        """Return ``(left, right, equal)`` around ``pivot``.

        ``left`` is the latest memento strictly before the pivot, ``right`` the
        earliest strictly after, ``equal`` the first one exactly at it.
        """
        epochs = self._epochs()
        lo = bisect.bisect_left(epochs, pivot.epoch_seconds)
        hi = bisect.bisect_right(epochs, pivot.epoch_seconds)
        left = self.mementos[lo - 1] if lo > 0 else None
        right = self.mementos[hi] if hi < len(epochs) else None
        equal = self.mementos[lo] if hi > lo else None
        return left, right, equal

    def at(self, dt: ArchivalDatetime) -> tuple:
        """Every memento captured exactly at ``dt`` (collisions included)."""
        epochs = self._epochs()
        lo = bisect.bisect_left(epochs, dt.epoch_seconds)
        hi = bisect.bisect_right(epochs, dt.epoch_seconds)
        return self.mementos[lo:hi]

    def replacing(self, updated: dict) -> "TimeMapRecord":
        """Copy with mementos swapped for fetched versions, keyed by URI-M."""
        return replace(self, mementos=tuple(updated.get(m.uri_m, m) for m in self.mementos))


def neighbors(tm: TimeMapRecord, pivot: ArchivalDatetime):
    return tm.neighbors(pivot)


@dataclass(frozen=True)
class ResolutionEntry:
    resource: OriginalResourceRef
    resolution: Resolution
    discovery_depth: int
    discovered_from: str
    selected: MementoRecord | None = None
    left_neighbor: MementoRecord | None = None
    right_neighbor: MementoRecord | None = None
    timemap: TimeMapRecord | None = None
    note: str | None = None

    def __post_init__(self):
        if self.discovery_depth < 1:
            raise ValueError("discovery_depth must be >= 1")
        if self.resolution is Resolution.RESOLVED and self.selected is None:
            raise ValueError("resolved entry needs a selected memento")
        left, right = self.left_neighbor, self.right_neighbor
        if left is not None and right is not None and not (
                left.memento_datetime < right.memento_datetime):
            raise ValueError("left neighbor must precede right neighbor")


@dataclass(frozen=True)
class TruncatedResource:
    resource: OriginalResourceRef
    reason: str  # "max_resources" or "max_depth"
    discovered_from: str


@dataclass(frozen=True)
class CompositeMemento:
    root: MementoRecord
    root_resource: OriginalResourceRef
    target_datetime: ArchivalDatetime
    entries: tuple = ()
    heuristic_name: str = "nearest"
    root_timemap: TimeMapRecord | None = None
    truncated: tuple = ()

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.resource in seen:
                raise ValueError(f"duplicate URI-R in composite: {e.resource}")
            seen.add(e.resource)
