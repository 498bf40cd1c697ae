"""Rebuild a composite memento from its root URI-R and a target datetime.

Breadth-first: select and fetch the root memento, extract the resources it
embeds, resolve each one against the archive, and descend into frames and
stylesheets. Every URI-R is resolved at most once, so cyclic embedding
terminates.
"""

from __future__ import annotations

import enum
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from html.parser import HTMLParser
from urllib.parse import urljoin, urldefrag

from .archive import (
    ArchiveError,
    ArchiveSource,
    FetchStatus,
    NonRewrittenUri,
    TimeMapNotFound,
    derive_uri_r,
)
from .chrono import ArchivalDatetime
from .model import (
    CompositeMemento,
    MementoFlag,
    MementoRecord,
    OriginalResourceRef,
    Resolution,
    ResolutionEntry,
    TimeMapRecord,
    TruncatedResource,
    is_absolute_uri,
)

log = logging.getLogger(__name__)

DEFAULT_MAX_DEPTH = 3
DEFAULT_MAX_RESOURCES = 512
# extra mementos tried per side when a deciding memento cannot be fetched
FALLBACK_FETCHES = 2


class RootNotArchived(Exception):
    pass


class RecompositionError(Exception):
    pass


class ConfigurationError(ValueError):
    pass


# -- extraction ---------------------------------------------------------------


class SourceKind(str, enum.Enum):
    HTML = "Html"
    CSS = "Css"
    OPAQUE = "Opaque"


@dataclass(frozen=True)
class ExtractionResult:
    embedded: tuple = ()       # OriginalResourceRef, first-seen order
    recursable: frozenset = frozenset()
    source_kind: SourceKind = SourceKind.OPAQUE


HTML_TYPES = ("text/html", "application/xhtml+xml")
CSS_TYPES = ("text/css",)

_CSS_URL_RE = re.compile(r"""url\(\s*(?:"([^"]*)"|'([^']*)'|([^)'"\s]*))\s*\)""", re.IGNORECASE)
_CSS_IMPORT_RE = re.compile(
    r"""@import\s+(?:url\(\s*)?(?:"([^"]*)"|'([^']*)'|([^)'"\s;]+))""", re.IGNORECASE)
_IGNORED_SCHEMES = ("data:", "javascript:", "mailto:", "about:", "blob:", "tel:")


def _media(media_type: str | None) -> str:
    return (media_type or "").split(";", 1)[0].strip().lower()


def _css_refs(css: str):
    """Yield ``(uri, is_import)`` in source order.

    ``@import url(x)`` matches both patterns; the caller's de-duplication
    keeps one entry and the import marks it recursable.
    """
    hits = [(m.start(), m.group(1) or m.group(2) or m.group(3), True)
            for m in _CSS_IMPORT_RE.finditer(css)]
    hits += [(m.start(), next(g for g in m.groups() if g is not None), False)
             for m in _CSS_URL_RE.finditer(css)]
    for _, uri, is_import in sorted(hits, key=lambda h: h[0]):
        yield uri, is_import


class _EmbedParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.refs = []  # (uri, recursable)
        self.base = None
        self._in_style = False

    def handle_starttag(self, tag, attrs):
        a = {k.lower(): (v or "") for k, v in attrs}
        add = self.refs.append
        if tag == "base" and a.get("href") and self.base is None:
            self.base = a["href"]
        elif tag in ("img", "script", "embed") and a.get("src"):
            add((a["src"], False))
        elif tag in ("frame", "iframe") and a.get("src"):
            add((a["src"], True))
        elif tag == "link" and "stylesheet" in a.get("rel", "").lower().split() and a.get("href"):
            add((a["href"], True))
        elif tag == "object" and a.get("data"):
            add((a["data"], False))
        elif tag == "input" and a.get("type", "").lower() == "image" and a.get("src"):
            add((a["src"], False))
        elif tag == "body" and a.get("background"):
            add((a["background"], False))
        elif tag == "style":
            self._in_style = True
        if a.get("style"):
            for uri, is_import in _css_refs(a["style"]):
                add((uri, is_import))

    def handle_startendtag(self, tag, attrs):
        self.handle_starttag(tag, attrs)
        if tag == "style":
            self._in_style = False

    def handle_endtag(self, tag):
        if tag == "style":
            self._in_style = False

    def handle_data(self, data):
        if self._in_style:
            for uri, is_import in _css_refs(data):
                self.refs.append((uri, is_import))


def _decode_body(body: bytes, media_type: str | None) -> str:
    m = re.search(r"charset=([\w.-]+)", media_type or "", re.IGNORECASE)
    if m:
        try:
            return body.decode(m.group(1), errors="replace")
        except LookupError:
            pass
    try:
        return body.decode("utf-8")
    except UnicodeDecodeError:
        return body.decode("latin-1")


def to_uri_r(ref: str, base_uri: str, rewrite_profile: str = "wayback") -> OriginalResourceRef | None:
    """Resolve a reference found in a memento to the URI-R it denotes.

    Returns ``None`` for references that are not archivable resources.
    """
    ref = ref.strip()
    if not ref or ref.startswith("#") or ref.lower().startswith(_IGNORED_SCHEMES):
        return None
    absolute, _ = urldefrag(urljoin(base_uri, ref))
    if not absolute.lower().startswith(("http://", "https://")) or not is_absolute_uri(absolute):
        return None
    try:
        return derive_uri_r(absolute, rewrite_profile)
    except NonRewrittenUri:
        return OriginalResourceRef(absolute)


def extract_embedded(body: bytes, media_type: str | None, base_uri: str,
                     rewrite_profile: str = "wayback") -> ExtractionResult:
    """Find the resources a memento embeds.

    HTML: images, scripts, stylesheets, frames, embeds, objects, image
    inputs, body backgrounds and CSS ``url()`` in style blocks/attributes.
    CSS: ``url()`` and ``@import``. Frames, stylesheets and imports are
    marked recursable. Everything else is opaque.
    """
    mt = _media(media_type)
    text = _decode_body(body, media_type) if mt in HTML_TYPES + CSS_TYPES else ""
    if mt in HTML_TYPES:
        parser = _EmbedParser()
        try:
            parser.feed(text)
            parser.close()
        except Exception:  # tolerant: keep whatever was collected
            log.debug("HTML parse stopped early for %s", base_uri, exc_info=True)
        base = urljoin(base_uri, parser.base) if parser.base else base_uri
        refs, kind = parser.refs, SourceKind.HTML
    elif mt in CSS_TYPES:
        base, refs, kind = base_uri, list(_css_refs(text)), SourceKind.CSS
    else:
        return ExtractionResult()

    embedded, recursable, seen = [], set(), set()
    for ref, is_recursable in refs:
        r = to_uri_r(ref, base, rewrite_profile)
        if r is None:
            continue
        if r not in seen:
            seen.add(r)
            embedded.append(r)
        if is_recursable:
            recursable.add(r)
    return ExtractionResult(tuple(embedded), frozenset(recursable), kind)


# -- selection ----------------------------------------------------------------


def _nearest(tm: TimeMapRecord, t: ArchivalDatetime, **_params) -> MementoRecord | None:
    best, best_dist = None, None
    for m in tm.mementos:
        d = abs(m.memento_datetime - t)
        # strict < keeps the earlier memento on ties (list is ascending)
        if best is None or d < best_dist:
            best, best_dist = m, d
    return best


HEURISTICS = {"nearest": _nearest}


@dataclass(frozen=True)
class SelectionHeuristic:
    name: str = "nearest"
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in HEURISTICS:
            raise ConfigurationError(
                f"unknown heuristic {self.name!r}; known: {', '.join(sorted(HEURISTICS))}")


def select_memento(tm: TimeMapRecord, t: ArchivalDatetime,
                   h: SelectionHeuristic = SelectionHeuristic()) -> MementoRecord | None:
    """Pick the best memento for ``t`` under heuristic ``h``.

    ``nearest`` minimises ``|datetime - t|``, preferring the earlier memento
    when two are equidistant. Live-web redirects are never selected.
    """
    usable = TimeMapRecord(tm.resource, tuple(m for m in tm.mementos if not m.live_web))
    return HEURISTICS[h.name](usable, t, **h.parameters)


# -- per-entry resolution -----------------------------------------------------


@dataclass(frozen=True)
class Limits:
    max_depth: int = DEFAULT_MAX_DEPTH
    max_resources: int = DEFAULT_MAX_RESOURCES

    def __post_init__(self):
        if self.max_depth < 1 or self.max_resources < 1:
            raise ConfigurationError("limits must be positive")


class _Fetcher:
    """Memoises memento fetches so a URI-M is dereferenced once per run."""

    def __init__(self, source: ArchiveSource):
        self.source = source
        self._cache = {}

    def get(self, uri_m: str, want_body: bool):
        key = (uri_m, want_body)
        if key not in self._cache:
            if (uri_m, True) in self._cache:
                return self._cache[(uri_m, True)]
            self._cache[key] = self.source.fetch_memento(uri_m, want_body)
        return self._cache[key]


def _fetch_into(fetcher, m: MementoRecord, want_body: bool, updated: dict):
    """Fetch ``m`` and store the enriched (or flagged) record in ``updated``."""
    outcome = fetcher.get(m.uri_m, want_body)
    if outcome.status is FetchStatus.OK:
        rec = outcome.record
        # keep the timemap's identity; internal redirects may land elsewhere
        if rec.uri_m != m.uri_m or rec.memento_datetime != m.memento_datetime:
            log.info("memento %s resolved to %s", m.uri_m, rec.uri_m)
        updated[m.uri_m] = rec if rec.uri_m == m.uri_m else _rebase(rec, m)
    elif outcome.status is FetchStatus.REDIRECTED and outcome.live_web:
        updated[m.uri_m] = m.with_flags(MementoFlag.LIVE_WEB_REDIRECT)
    else:
        updated[m.uri_m] = m.with_flags(MementoFlag.UNRETRIEVABLE)
    return updated[m.uri_m]


def _rebase(rec: MementoRecord, original: MementoRecord) -> MementoRecord:
    return replace(rec, uri_m=original.uri_m)


def _fetch_side(fetcher, group_iter, want_body, updated):
    """Fetch the deciding group on one side; on failure also fetch the next group."""
    extra = 0
    for group in group_iter:
        results = [_fetch_into(fetcher, m, want_body, updated) for m in group]
        if any(r.retrievable and not r.live_web for r in results) or extra >= FALLBACK_FETCHES:
            return
        extra += 1


def _groups(mementos):
    """Consecutive runs of equal Memento-Datetime."""
    run = []
    for m in mementos:
        if run and m.memento_datetime != run[0].memento_datetime:
            yield run
            run = []
        run.append(m)
    if run:
        yield run


def resolve_entry(source: ArchiveSource, r: OriginalResourceRef, pivot: ArchivalDatetime,
                  h: SelectionHeuristic = SelectionHeuristic(), *, depth: int = 1,
                  discovered_from: str = "", want_body: bool = False,
                  with_content: bool = False, fetcher=None) -> ResolutionEntry:
    """Resolve one embedded URI-R relative to the root's datetime ``pivot``.

    Fetches the selected memento plus the mementos that decide its coherence
    pattern (nearest on each side of ``pivot`` and any exactly at it). The
    returned entry's ``timemap`` carries the fetched records.
    """
    fetcher = fetcher or _Fetcher(source)
    base = dict(resource=r, discovery_depth=depth, discovered_from=discovered_from)
    tm = None
    for attempt in (1, 2):
        try:
            tm = source.fetch_timemap(r)
            break
        except TimeMapNotFound:
            return ResolutionEntry(resolution=Resolution.NOT_ARCHIVED, note="no timemap", **base)
        except ArchiveError as exc:
            log.warning("timemap fetch failed for %s (attempt %d): %s", r, attempt, exc)
            note = f"timemap unavailable: {exc}"
    if tm is None:
        return ResolutionEntry(resolution=Resolution.NOT_ARCHIVED, note=note, **base)
    if not tm:
        return ResolutionEntry(resolution=Resolution.NOT_ARCHIVED, timemap=tm,
                               note="empty timemap", **base)

    updated = {}
    content_body = with_content
    left, right, _ = tm.neighbors(pivot)
    equal = tm.at(pivot)
    for m in equal:
        _fetch_into(fetcher, m, want_body, updated)
    if not equal:
        before = [m for m in tm.mementos if m.memento_datetime < pivot]
        after = [m for m in tm.mementos if m.memento_datetime > pivot]
        _fetch_side(fetcher, reversed(list(_groups(before))), content_body, updated)
        _fetch_side(fetcher, _groups(after), content_body, updated)

    selected = select_memento(tm, pivot, h)
    sel = _fetch_into(fetcher, selected, want_body, updated)
    resolved_tm = tm.replacing(updated)
    left = updated.get(left.uri_m, left) if left else None
    right = updated.get(right.uri_m, right) if right else None

    if sel.live_web:
        return ResolutionEntry(resolution=Resolution.NOT_ARCHIVED, timemap=resolved_tm,
                               left_neighbor=left, right_neighbor=right,
                               note="live-web redirect", **base)
    if not sel.retrievable:
        return ResolutionEntry(resolution=Resolution.MISSING_MEMENTO, timemap=resolved_tm,
                               left_neighbor=left, right_neighbor=right,
                               note=f"selected memento unretrievable: {selected.uri_m}", **base)
    return ResolutionEntry(resolution=Resolution.RESOLVED, selected=sel, timemap=resolved_tm,
                           left_neighbor=left, right_neighbor=right, **base)


# -- recomposition ------------------------------------------------------------


def recompose(root_r: OriginalResourceRef, t: ArchivalDatetime,
              h: SelectionHeuristic = SelectionHeuristic(), source: ArchiveSource = None,
              limits: Limits = Limits(), *, with_content: bool = False,
              use_root_datetime: bool = True) -> CompositeMemento:
    """Recompose the composite memento for ``root_r`` at ``t``.

    Embedded resources are selected against the root's Memento-Datetime
    unless ``use_root_datetime`` is false, in which case ``t`` is used.
    Resources beyond ``limits`` are listed in ``truncated``.
    """
    if source is None:
        raise ConfigurationError("an archive source is required")
    try:
        root_tm = source.fetch_timemap(root_r)
    except TimeMapNotFound:
        raise RootNotArchived(root_r.uri_r) from None
    except ArchiveError as exc:
        raise RecompositionError(f"root timemap: {exc}") from exc
    if not root_tm:
        raise RootNotArchived(root_r.uri_r)

    chosen = select_memento(root_tm, t, h)
    outcome = source.fetch_memento(chosen.uri_m, want_body=True)
    if outcome.status is not FetchStatus.OK:
        if outcome.status is FetchStatus.REDIRECTED and outcome.live_web:
            raise RootNotArchived(f"{root_r.uri_r}: root memento redirects to the live web")
        raise RecompositionError(f"root memento {chosen.uri_m}: {outcome.reason}")
    root = outcome.record
    pivot = root.memento_datetime if use_root_datetime else t

    fetcher = _Fetcher(source)
    entries, truncated = [], []
    visited = {root_r}
    frontier = []  # (uri_r, depth, discovered_from, recursable)

    def discover(record: MementoRecord, depth: int):
        if record.body is None:
            return
        ex = extract_embedded(record.body, record.media_type, record.uri_m, source.rewrite_profile)
        for r in ex.embedded:
            if r in visited:
                continue
            visited.add(r)
            if len(entries) + len(frontier) >= limits.max_resources:
                truncated.append(TruncatedResource(r, "max_resources", record.uri_m))
                continue
            frontier.append((r, depth, record.uri_m, r in ex.recursable))

    discover(root, 1)
    with ThreadPoolExecutor(max_workers=max(1, source.max_parallel_fetches)) as pool:
        while frontier:
            level, frontier = frontier, []

            def work(item):
                r, depth, parent, recursable = item
                return resolve_entry(
                    source, r, pivot, h, depth=depth, discovered_from=parent,
                    want_body=recursable and depth < limits.max_depth or with_content,
                    with_content=with_content, fetcher=fetcher)

            # map() yields in submission order regardless of completion order
            resolved = list(pool.map(work, level))
            entries.extend(resolved)
            for (r, depth, parent, recursable), entry in zip(level, resolved):
                if not recursable or entry.resolution is not Resolution.RESOLVED:
                    continue
                if depth >= limits.max_depth:
                    truncated.append(TruncatedResource(r, "max_depth", parent))
                    continue
                discover(entry.selected, depth + 1)

    return CompositeMemento(
        root=root,
        root_resource=root_r,
        target_datetime=t,
        entries=tuple(entries),
        heuristic_name=h.name,
        root_timemap=root_tm,
        truncated=tuple(truncated),
    )
