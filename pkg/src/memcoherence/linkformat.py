"""application/link-format parsing and serialisation (RFC 6690 / RFC 7089).

Timemaps look like::

    <http://example.com/>; rel="original",
    <http://arc/web/timemap/link/http://example.com/>; rel="self"; type="application/link-format",
    <http://arc/web/20041209192926/http://example.com/>; rel="first memento";
        datetime="Thu, 09 Dec 2004 19:29:26 GMT"

Datetime values contain commas, so a link list cannot be split naively.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["Link", "LinkFormatError", "parse_links", "serialize_links"]


class LinkFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Link:
    uri: str
    params: tuple = ()  # ((name, value), ...) in source order; names lower-cased

    def get(self, name: str, default=None):
        name = name.lower()
        for k, v in self.params:
            if k == name:
                return v
        return default

    @property
    def rels(self) -> tuple:
        return tuple((self.get("rel") or "").split())


_WS = " \t\r\n"


def parse_links(text: str) -> list[Link]:
    """Parse a link-format document into :class:`Link` objects.

    Raises :class:`LinkFormatError` on structurally broken input. An empty
    or whitespace-only document is an empty list.
    """
    links = []
    i, n = 0, len(text)

    def skip_ws(j):
        while j < n and text[j] in _WS:
            j += 1
        return j

    i = skip_ws(i)
    while i < n:
        if text[i] != "<":
            raise LinkFormatError(f"expected '<' at offset {i}")
        end = text.find(">", i + 1)
        if end < 0:
            raise LinkFormatError(f"unterminated URI at offset {i}")
        uri = text[i + 1:end].strip()
        i = skip_ws(end + 1)
        params = []
        while i < n and text[i] == ";":
            i = skip_ws(i + 1)
            start = i
            while i < n and text[i] not in "=;," + _WS:
                i += 1
            name = text[start:i].lower()
            if not name:
                raise LinkFormatError(f"empty parameter name at offset {start}")
            i = skip_ws(i)
            value = None
            if i < n and text[i] == "=":
                i = skip_ws(i + 1)
                if i < n and text[i] == '"':
                    i += 1
                    buf = []
                    while i < n and text[i] != '"':
                        if text[i] == "\\" and i + 1 < n:
                            i += 1
                        buf.append(text[i])
                        i += 1
                    if i >= n:
                        raise LinkFormatError("unterminated quoted string")
                    value = "".join(buf)
                    i += 1
                else:
                    start = i
                    while i < n and text[i] not in ";," + _WS:
                        i += 1
                    value = text[start:i]
            params.append((name, value if value is not None else ""))
            i = skip_ws(i)
        links.append(Link(uri, tuple(params)))
        if i < n:
            if text[i] != ",":
                raise LinkFormatError(f"expected ',' at offset {i}")
            i = skip_ws(i + 1)
    return links


def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize_links(links) -> str:
    """Render links one per line, every parameter value quoted."""
    rows = []
    for link in links:
        parts = [f"<{link.uri}>"]
        parts.extend(f"{k}={_quote(v)}" for k, v in link.params)
        rows.append("; ".join(parts))
    return ",\n".join(rows) + ("\n" if rows else "")
