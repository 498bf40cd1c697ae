"""Access to Memento archives: timemaps, memento headers and bodies.

Two sources share one interface. :class:`LiveArchive` talks HTTP to a
Memento-compliant archive; :class:`FixtureArchive` replays a directory tree
(see :mod:`memcoherence.fixtures`) so everything can run offline.
"""

from __future__ import annotations

import enum
import logging
import re
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass
from urllib.parse import urljoin, urlsplit

import requests

from .chrono import (
    Ordering,
    check_header_ordering,
    parse_http_datetime,
    validate_last_modified,
)
from .linkformat import LinkFormatError, parse_links
from .model import MementoFlag, MementoRecord, OriginalResourceRef, TimeMapRecord, is_absolute_uri

log = logging.getLogger(__name__)

MAX_REDIRECTS = 5


class ArchiveError(Exception):
    """Retryable failure talking to an archive."""


class TimeMapNotFound(ArchiveError):
    """The archive explicitly has no timemap for the URI-R."""


class MalformedTimeMap(ArchiveError):
    pass


class NonRewrittenUri(ValueError):
    pass


# -- header profiles ----------------------------------------------------------


@dataclass(frozen=True)
class HeaderProfile:
    """Which response headers carry the original server's datetimes."""

    name: str
    last_modified: tuple
    original_date: tuple


HEADER_PROFILES = {
    "wayback": HeaderProfile(
        "wayback",
        ("X-Archive-Orig-Last-Modified", "X-Archive-Original-Last-Modified"),
        ("X-Archive-Orig-Date", "X-Archive-Original-Date"),
    ),
    "plain": HeaderProfile("plain", ("Last-Modified",), ("Date",)),
}


# -- URI de-rewriting ---------------------------------------------------------

_WAYBACK_RE = re.compile(
    r"^[a-zA-Z][\w+.-]*://[^/]+(?:/[^?#]*?)?/web/(\d{14})([a-z]{2}_)?/(.+)$")
_COLLAPSED_SCHEME_RE = re.compile(r"^(https?):/(?!/)", re.IGNORECASE)
_SCHEME_RE = re.compile(r"^[a-zA-Z][\w+.-]*://")

REWRITE_PROFILES = ("wayback", "identity")


def derive_uri_r(uri_m: str, rewrite_profile: str = "wayback") -> OriginalResourceRef:
    """Recover the original URI from a replay URI.

    The ``wayback`` profile strips ``<host>/web/<14 digits>[xx_]/``, where
    ``xx_`` is a replay mode such as ``im_``, ``js_`` or ``id_``; anything
    else raises :class:`NonRewrittenUri`. ``identity`` returns the input.
    """
    if rewrite_profile == "identity":
        return OriginalResourceRef(uri_m)
    if rewrite_profile != "wayback":
        raise ValueError(f"unknown rewrite profile {rewrite_profile!r}")
    m = _WAYBACK_RE.match(uri_m)
    if not m:
        raise NonRewrittenUri(uri_m)
    rest = m.group(3)
    if _COLLAPSED_SCHEME_RE.match(rest):
        rest = _COLLAPSED_SCHEME_RE.sub(lambda s: s.group(1) + "://", rest, count=1)
    elif not _SCHEME_RE.match(rest):
        rest = "http://" + rest
    if not is_absolute_uri(rest):
        raise NonRewrittenUri(uri_m)
    return OriginalResourceRef(rest)


# -- fetch results ------------------------------------------------------------


class FetchStatus(str, enum.Enum):
    OK = "Ok"
    REDIRECTED = "Redirected"
    FAILED = "Failed"


@dataclass(frozen=True)
class FetchOutcome:
    status: FetchStatus
    record: MementoRecord | None = None
    to_uri: str | None = None
    live_web: bool = False
    reason: str | None = None

    @classmethod
    def ok(cls, record):
        return cls(FetchStatus.OK, record=record)

    @classmethod
    def redirected(cls, to_uri, live_web=True):
        return cls(FetchStatus.REDIRECTED, to_uri=to_uri, live_web=live_web)

    @classmethod
    def failed(cls, reason):
        return cls(FetchStatus.FAILED, reason=reason)


@dataclass
class RawResponse:
    status: int | None  # None: nothing retrievable at this URI
    headers: dict
    body: bytes | None = None
    reason: str | None = None


def _header(headers: dict, names) -> str | None:
    lowered = {k.lower(): v for k, v in headers.items()}
    for name in names:
        if name.lower() in lowered:
            return lowered[name.lower()]
    return None


def record_from_response(uri_m: str, headers: dict, body: bytes | None, want_body: bool,
                         profile: HeaderProfile) -> FetchOutcome:
    """Build a MementoRecord from a final (non-redirect) response."""
    md = parse_http_datetime(_header(headers, ("Memento-Datetime",)))
    if not md.is_defined:
        return FetchOutcome.failed(f"no usable Memento-Datetime for {uri_m}")
    raw_lm = parse_http_datetime(_header(headers, profile.last_modified))
    orig_date = parse_http_datetime(_header(headers, profile.original_date))
    flags = set()
    if check_header_ordering(raw_lm, md.value, orig_date) is Ordering.DYNAMIC_SUSPECT:
        flags.add(MementoFlag.DYNAMIC_SUSPECT)
    record = MementoRecord(
        uri_m=uri_m,
        memento_datetime=md.value,
        last_modified=validate_last_modified(raw_lm, md.value),
        response_date=orig_date,
        body=body if want_body else None,
        media_type=_header(headers, ("Content-Type",)),
        flags=frozenset(flags),
    )
    return FetchOutcome.ok(record)


# -- politeness ---------------------------------------------------------------


class PolitenessLimiter:
    """Per-host concurrency cap plus minimum spacing between request starts."""

    def __init__(self, delay_ms: int = 0, max_parallel: int = 1,
                 clock=time.monotonic, sleep=time.sleep):
        if delay_ms < 0 or max_parallel < 1:
            raise ValueError("delay_ms >= 0 and max_parallel >= 1 required")
        self.delay = delay_ms / 1000.0
        self.max_parallel = max_parallel
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._sems: dict = {}
        self._next: dict = {}

    @contextmanager
    def slot(self, host: str):
        with self._lock:
            sem = self._sems.setdefault(host, threading.BoundedSemaphore(self.max_parallel))
        sem.acquire()
        try:
            with self._lock:
                now = self._clock()
                start = max(now, self._next.get(host, now))
                self._next[host] = start + self.delay
            if start > now:
                self._sleep(start - now)
            yield
        finally:
            sem.release()


# -- sources ------------------------------------------------------------------


class ArchiveSource:
    """Common behaviour; subclasses provide ``_get`` and ``fetch_timemap``."""

    def __init__(self, politeness_delay_ms: int = 0, max_parallel_fetches: int = 1,
                 request_timeout_ms: int = 30000, header_profile: str = "wayback",
                 rewrite_profile: str = "wayback"):
        if header_profile not in HEADER_PROFILES:
            raise ValueError(f"unknown header profile {header_profile!r}")
        if rewrite_profile not in REWRITE_PROFILES:
            raise ValueError(f"unknown rewrite profile {rewrite_profile!r}")
        self.politeness_delay_ms = politeness_delay_ms
        self.max_parallel_fetches = max_parallel_fetches
        self.request_timeout_ms = request_timeout_ms
        self.header_profile = HEADER_PROFILES[header_profile]
        self.rewrite_profile = rewrite_profile
        self.limiter = PolitenessLimiter(politeness_delay_ms, max_parallel_fetches)

    def archive_host(self, uri_m: str) -> str:
        raise NotImplementedError

    def _get(self, uri: str) -> RawResponse:
        raise NotImplementedError

    def fetch_timemap(self, r: OriginalResourceRef) -> TimeMapRecord:
        raise NotImplementedError

    def fetch_memento(self, uri_m: str, want_body: bool = False) -> FetchOutcome:
        """Dereference ``uri_m``, following redirects inside the archive.

        A redirect leaving the archive's host is reported as a live-web
        redirect and never becomes a MementoRecord.
        """
        host = self.archive_host(uri_m)
        seen = set()
        current = uri_m
        for _ in range(MAX_REDIRECTS + 1):
            if current in seen:
                return FetchOutcome.failed(f"redirect loop at {current}")
            seen.add(current)
            try:
                resp = self._get(current)
            except ArchiveError as exc:
                return FetchOutcome.failed(str(exc))
            if resp.status is None:
                return FetchOutcome.failed(resp.reason or f"unretrievable: {current}")
            if 300 <= resp.status < 400:
                location = _header(resp.headers, ("Location",))
                if not location:
                    return FetchOutcome.failed(f"{resp.status} without Location at {current}")
                target = urljoin(current, location)
                if urlsplit(target).hostname != host:
                    return FetchOutcome.redirected(target, live_web=True)
                current = target
                continue
            if resp.status != 200:
                return FetchOutcome.failed(f"HTTP {resp.status} for {current}")
            return record_from_response(current, resp.headers, resp.body, want_body,
                                        self.header_profile)
        return FetchOutcome.failed(f"more than {MAX_REDIRECTS} redirects from {uri_m}")


def timemap_from_links(r: OriginalResourceRef, text: str) -> TimeMapRecord:
    """Build a TimeMapRecord from a link-format timemap body."""
    try:
        links = parse_links(text)
    except LinkFormatError as exc:
        raise MalformedTimeMap(str(exc)) from exc
    mementos, original, tm_uri = [], None, None
    for link in links:
        rels = link.rels
        if "original" in rels:
            original = link.uri
        if "timemap" in rels or "self" in rels:
            tm_uri = tm_uri or link.uri
        if "memento" in rels:
            md = parse_http_datetime(link.get("datetime"))
            if not md.is_defined:
                log.warning("dropping memento without usable datetime: %s", link.uri)
                continue
            mementos.append(MementoRecord(link.uri, md.value))
    return TimeMapRecord(r, tuple(mementos), original=original, timemap_uri=tm_uri)


class LiveArchive(ArchiveSource):
    """A Memento-compliant archive over HTTP.

    ``timemap_template`` contains one ``{uri_r}`` placeholder, e.g.
    ``http://web.archive.org/web/timemap/link/{uri_r}``.
    """

    def __init__(self, timemap_template: str, session=None, **kwargs):
        super().__init__(**kwargs)
        if timemap_template.count("{uri_r}") != 1:
            raise ValueError("timemap template needs exactly one {uri_r} placeholder")
        self.timemap_template = timemap_template
        self._host = urlsplit(timemap_template.replace("{uri_r}", "")).hostname
        if session is None:
            session = requests.Session()
            session.headers["User-Agent"] = "memcoherence/0.1"
        self.session = session

    def archive_host(self, uri_m: str) -> str:
        return self._host

    def _get(self, uri: str) -> RawResponse:
        with self.limiter.slot(urlsplit(uri).hostname or ""):
            try:
                resp = self.session.get(uri, allow_redirects=False,
                                        timeout=self.request_timeout_ms / 1000.0)
            except requests.RequestException as exc:
                raise ArchiveError(f"{uri}: {exc}") from exc
        return RawResponse(resp.status_code, dict(resp.headers), resp.content)

    def fetch_timemap(self, r: OriginalResourceRef) -> TimeMapRecord:
        url = self.timemap_template.replace("{uri_r}", r.uri_r)
        resp = self._get(url)
        if resp.status == 404:
            raise TimeMapNotFound(r.uri_r)
        if resp.status != 200:
            raise ArchiveError(f"HTTP {resp.status} fetching timemap {url}")
        body = (resp.body or b"").decode("utf-8", errors="replace")
        return timemap_from_links(r, body)


def fetch_timemap(source: ArchiveSource, r: OriginalResourceRef) -> TimeMapRecord:
    return source.fetch_timemap(r)


def fetch_memento(source: ArchiveSource, uri_m: str, want_body: bool = False) -> FetchOutcome:
    return source.fetch_memento(uri_m, want_body)


def open_source(spec: str, **kwargs) -> ArchiveSource:
    """``live:<timemap-template>`` or ``fixture:<path>``."""
    kind, _, value = spec.partition(":")
    if kind == "live" and value:
        return LiveArchive(value, **kwargs)
    if kind == "fixture" and value:
        from .fixtures import FixtureArchive
        return FixtureArchive(value, **kwargs)
    raise ValueError(f"bad source {spec!r}; expected live:<template> or fixture:<path>")
