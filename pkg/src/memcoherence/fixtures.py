"""Offline fixture store.

Layout::

    <root>/
      store.json                      optional {"archive_host": "..."}
      <percent-encoded URI-R>/
        timemap.json                  {"original": URI-R, "mementos": [...]}
        <stem>.headers                verbatim response header block
        <stem>.body                   optional entity body

Each entry of ``mementos`` is ``{"uri_m": ..., "datetime": <HTTP date>}``
with an optional ``"file"`` stem (default: the 14-digit timestamp, which is
ambiguous when two mementos collide on one datetime). A memento without a
``.headers`` file cannot be retrieved. A ``.headers`` file starts with a
status line (``HTTP/1.1 200 OK``); 3xx responses carry ``Location``.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from urllib.parse import quote, unquote, urlsplit

from .archive import ArchiveSource, RawResponse, TimeMapNotFound, MalformedTimeMap
from .chrono import ArchivalDatetime, format_http_datetime, parse_http_datetime
from .model import MementoRecord, OriginalResourceRef, TimeMapRecord

log = logging.getLogger(__name__)

TIMEMAP_FILE = "timemap.json"
STORE_FILE = "store.json"


def resource_dirname(uri_r: str) -> str:
    return quote(uri_r, safe="")


def parse_header_block(text: str) -> tuple[int, dict]:
    lines = text.replace("\r\n", "\n").split("\n")
    status_line = lines[0].strip()
    parts = status_line.split()
    if len(parts) < 2 or not parts[0].upper().startswith("HTTP/") or not parts[1].isdigit():
        raise ValueError(f"bad status line {status_line!r}")
    headers = {}
    for line in lines[1:]:
        if not line.strip():
            break
        if ":" not in line:
            raise ValueError(f"bad header line {line!r}")
        name, value = line.split(":", 1)
        headers[name.strip()] = value.strip()
    return int(parts[1]), headers


class FixtureArchive(ArchiveSource):
    def __init__(self, root, **kwargs):
        super().__init__(**kwargs)
        self.root = Path(root)
        if not self.root.is_dir():
            raise FileNotFoundError(f"fixture store not found: {self.root}")
        store = self.root / STORE_FILE
        meta = json.loads(store.read_text(encoding="utf-8")) if store.exists() else {}
        self._archive_host = meta.get("archive_host")
        self._index = {}
        for tm_file in sorted(self.root.glob(f"*/{TIMEMAP_FILE}")):
            for entry in self._load_timemap_json(tm_file).get("mementos", []):
                stem = entry.get("file") or _stamp(entry["datetime"])
                self._index.setdefault(entry["uri_m"], tm_file.parent / stem)

    @staticmethod
    def _load_timemap_json(path: Path) -> dict:
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MalformedTimeMap(f"{path}: {exc}") from exc

    def archive_host(self, uri_m: str) -> str:
        return self._archive_host or urlsplit(uri_m).hostname

    def fetch_timemap(self, r: OriginalResourceRef) -> TimeMapRecord:
        path = self.root / resource_dirname(r.uri_r) / TIMEMAP_FILE
        if not path.exists():
            raise TimeMapNotFound(r.uri_r)
        data = self._load_timemap_json(path)
        mementos = []
        for entry in data.get("mementos", []):
            md = parse_http_datetime(entry.get("datetime"))
            if not md.is_defined:
                log.warning("dropping memento without usable datetime: %s", entry.get("uri_m"))
                continue
            mementos.append(MementoRecord(entry["uri_m"], md.value))
        return TimeMapRecord(r, tuple(mementos), original=data.get("original"))

    def _get(self, uri: str) -> RawResponse:
        stem = self._index.get(uri)
        if stem is None:
            return RawResponse(404, {})
        headers_path = stem.with_name(stem.name + ".headers")
        if not headers_path.exists():
            return RawResponse(None, {}, reason=f"no headers stored for {uri}")
        status, headers = parse_header_block(headers_path.read_text(encoding="utf-8"))
        body_path = stem.with_name(stem.name + ".body")
        body = body_path.read_bytes() if body_path.exists() else None
        return RawResponse(status, headers, body)


def _stamp(http_date: str) -> str:
    parsed = parse_http_datetime(http_date)
    if not parsed.is_defined:
        raise MalformedTimeMap(f"unparseable datetime {http_date!r}")
    return parsed.value.stamp()


class FixtureWriter:
    """Build a fixture store programmatically (tests, demos)."""

    def __init__(self, root, archive_host: str = "web.archive.org"):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.archive_host = archive_host
        (self.root / STORE_FILE).write_text(
            json.dumps({"archive_host": archive_host}, indent=2) + "\n", encoding="utf-8")

    def uri_m(self, uri_r: str, when: ArchivalDatetime, mode: str = "") -> str:
        return f"http://{self.archive_host}/web/{when.stamp()}{mode}/{uri_r}"

    def _dir(self, uri_r: str) -> Path:
        d = self.root / resource_dirname(uri_r)
        d.mkdir(parents=True, exist_ok=True)
        return d

    def _timemap(self, uri_r: str) -> dict:
        path = self._dir(uri_r) / TIMEMAP_FILE
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))
        return {"original": uri_r, "mementos": []}

    def _save_timemap(self, uri_r: str, data: dict) -> None:
        path = self._dir(uri_r) / TIMEMAP_FILE
        path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")

    def add_resource(self, uri_r: str) -> None:
        """Register a URI-R with an (initially) empty timemap."""
        self._save_timemap(uri_r, self._timemap(uri_r))

    def add_memento(self, uri_r: str, when: ArchivalDatetime, *, body: bytes | None = None,
                    media_type: str | None = None, last_modified: str | None = None,
                    original_date: str | None = None, retrievable: bool = True,
                    status: int = 200, location: str | None = None,
                    uri_m: str | None = None, file: str | None = None,
                    extra_headers: dict | None = None) -> str:
        """Add one memento; returns its URI-M.

        ``last_modified``/``original_date`` are raw header strings, so
        corrupted values can be stored verbatim.
        """
        uri_m = uri_m or self.uri_m(uri_r, when)
        data = self._timemap(uri_r)
        entry = {"uri_m": uri_m, "datetime": format_http_datetime(when.epoch_seconds)}
        if file:
            entry["file"] = file
        data["mementos"].append(entry)
        self._save_timemap(uri_r, data)
        stem = self._dir(uri_r) / (file or when.stamp())
        if retrievable:
            reason = {200: "OK", 301: "Moved Permanently", 302: "Found"}.get(status, "Status")
            lines = [f"HTTP/1.1 {status} {reason}"]
            if status == 200:
                lines.append(f"Memento-Datetime: {format_http_datetime(when.epoch_seconds)}")
                if media_type:
                    lines.append(f"Content-Type: {media_type}")
                if last_modified:
                    lines.append(f"X-Archive-Orig-Last-Modified: {last_modified}")
                if original_date:
                    lines.append(f"X-Archive-Orig-Date: {original_date}")
            if location:
                lines.append(f"Location: {location}")
            for k, v in (extra_headers or {}).items():
                lines.append(f"{k}: {v}")
            stem.with_name(stem.name + ".headers").write_text(
                "\n".join(lines) + "\n", encoding="utf-8")
            if body is not None:
                stem.with_name(stem.name + ".body").write_bytes(body)
        return uri_m


def validate_store(root) -> list[str]:
    """Check a fixture store's layout; returns a list of problems (empty if valid)."""
    root = Path(root)
    problems = []
    if not root.is_dir():
        return [f"{root}: not a directory"]
    store = root / STORE_FILE
    if store.exists():
        try:
            json.loads(store.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            problems.append(f"{store}: invalid JSON ({exc})")
    dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not dirs:
        problems.append(f"{root}: no resource directories")
    for d in dirs:
        tm_path = d / TIMEMAP_FILE
        if not tm_path.exists():
            problems.append(f"{d.name}: missing {TIMEMAP_FILE}")
            continue
        try:
            data = json.loads(tm_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            problems.append(f"{tm_path}: invalid JSON ({exc})")
            continue
        uri_r = unquote(d.name)
        if data.get("original") not in (None, uri_r):
            problems.append(f"{d.name}: original {data.get('original')!r} != {uri_r!r}")
        try:
            OriginalResourceRef(uri_r)
        except ValueError:
            problems.append(f"{d.name}: directory does not decode to an absolute URI-R")
        stems = set()
        for i, entry in enumerate(data.get("mementos", [])):
            where = f"{d.name}/{TIMEMAP_FILE}[{i}]"
            if "uri_m" not in entry or "datetime" not in entry:
                problems.append(f"{where}: needs uri_m and datetime")
                continue
            md = parse_http_datetime(entry["datetime"])
            if not md.is_defined:
                problems.append(f"{where}: unparseable datetime {entry['datetime']!r}")
                continue
            stem = entry.get("file") or md.value.stamp()
            if stem in stems:
                problems.append(f"{where}: file stem {stem!r} used twice; add a 'file' key")
            stems.add(stem)
            headers_path = d / f"{stem}.headers"
            if not headers_path.exists():
                continue  # deliberately unretrievable
            try:
                status, headers = parse_header_block(headers_path.read_text(encoding="utf-8"))
            except ValueError as exc:
                problems.append(f"{headers_path.name}: {exc}")
                continue
            if status == 200:
                lowered = {k.lower(): v for k, v in headers.items()}
                hdr = parse_http_datetime(lowered.get("memento-datetime"))
                if not hdr.is_defined:
                    problems.append(f"{d.name}/{headers_path.name}: missing Memento-Datetime")
                elif hdr.value != md.value:
                    problems.append(f"{d.name}/{headers_path.name}: Memento-Datetime "
                                    f"{hdr.value.iso()} != timemap {md.value.iso()}")
            elif 300 <= status < 400:
                if "location" not in {k.lower() for k in headers}:
                    problems.append(f"{d.name}/{headers_path.name}: redirect without Location")
    return problems
