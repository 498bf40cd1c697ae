"""Content evaluation between two memento bodies: equal, similar, not similar.

Archives rewrite text resources (toolbars, banners, rewritten links) while
binary resources come back untouched. Text is compared by Jaccard
similarity of token shingles after removing archive-inserted regions;
binary content is only ever "similar" when it is identical.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

__all__ = [
    "ContentRelation",
    "StripProfile",
    "SimilarityPolicy",
    "WAYBACK_PROFILE",
    "NONE_PROFILE",
    "bodies_equal",
    "bodies_similar",
    "compare_bodies",
    "strip_regions",
    "shingles",
    "jaccard",
    "similarity_score",
    "load_strip_profiles",
]


class ContentRelation(str, enum.Enum):
    EQUAL = "Equal"
    SIMILAR = "Similar"
    NOT_SIMILAR = "NotSimilar"


@dataclass(frozen=True)
class StripProfile:
    name: str
    markers: tuple = ()  # ((begin_bytes, end_bytes), ...)


WAYBACK_PROFILE = StripProfile("wayback", (
    (b"<!-- BEGIN WAYBACK TOOLBAR INSERT -->", b"<!-- END WAYBACK TOOLBAR INSERT -->"),
    (b'<script src="//archive.org/includes/analytics.js', b"<!-- End Wayback Rewrite JS Include -->"),
    (b"<!--\n     FILE ARCHIVED ON", b"-->"),
))
NONE_PROFILE = StripProfile("none")

BUILTIN_PROFILES = {p.name: p for p in (WAYBACK_PROFILE, NONE_PROFILE)}

DEFAULT_TEXT_TYPES = (
    "text/",
    "application/javascript",
    "application/x-javascript",
    "application/json",
    "application/xml",
    "application/xhtml+xml",
    "image/svg+xml",
)


@dataclass(frozen=True)
class SimilarityPolicy:
    strip_profiles: tuple = (WAYBACK_PROFILE,)
    shingle_size: int = 4
    threshold: float = 0.9
    text_media_types: tuple = DEFAULT_TEXT_TYPES

    def __post_init__(self):
        if self.shingle_size < 1:
            raise ValueError("shingle_size must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be within [0, 1]")

    def is_text(self, media_type: str | None) -> bool:
        if not media_type:
            return False
        mt = media_type.split(";", 1)[0].strip().lower()
        return any(mt.startswith(prefix) for prefix in self.text_media_types)


def load_strip_profiles(path) -> dict:
    """Read strip profiles from JSON.

    Format::

        {"profiles": {"mine": [{"begin": "<!-- ad -->", "end": "<!-- /ad -->"}]}}

    Returns the built-in profiles updated with the file's contents.
    """
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    profiles = dict(BUILTIN_PROFILES)
    for name, markers in data.get("profiles", {}).items():
        pairs = []
        for m in markers:
            begin, end = m["begin"].encode("utf-8"), m["end"].encode("utf-8")
            if not begin or not end:
                raise ValueError(f"profile {name!r}: empty marker")
            pairs.append((begin, end))
        profiles[name] = StripProfile(name, tuple(pairs))
    return profiles


def bodies_equal(a: bytes, b: bytes) -> bool:
    return a == b


def strip_regions(body: bytes, profiles) -> bytes:
    """Remove every begin..end marker region (markers included).

    An unmatched begin marker is left alone.
    """
    for profile in profiles:
        for begin, end in profile.markers:
            out = []
            pos = 0
            while True:
                start = body.find(begin, pos)
                if start < 0:
                    break
                stop = body.find(end, start + len(begin))
                if stop < 0:
                    break
                out.append(body[pos:start])
                pos = stop + len(end)
            out.append(body[pos:])
            body = b"".join(out)
    return body


def shingles(body: bytes, size: int) -> frozenset:
    """Set of ``size``-token windows; tokens are runs of non-whitespace bytes.

    Bodies shorter than ``size`` tokens give one shingle of all their tokens.
    """
    tokens = body.split()
    if len(tokens) <= size:
        return frozenset([tuple(tokens)]) if tokens else frozenset()
    return frozenset(tuple(tokens[i:i + size]) for i in range(len(tokens) - size + 1))


def jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def similarity_score(a: bytes, b: bytes, policy: SimilarityPolicy = SimilarityPolicy()) -> float:
    a = strip_regions(a, policy.strip_profiles)
    b = strip_regions(b, policy.strip_profiles)
    if a == b:
        return 1.0
    return jaccard(shingles(a, policy.shingle_size), shingles(b, policy.shingle_size))


def bodies_similar(a: bytes, b: bytes, media_type: str | None,
                   policy: SimilarityPolicy = SimilarityPolicy()) -> ContentRelation:
    """Return ``SIMILAR`` or ``NOT_SIMILAR`` (never ``EQUAL``)."""
    if a == b:
        return ContentRelation.SIMILAR
    if not policy.is_text(media_type):
        return ContentRelation.NOT_SIMILAR
    if similarity_score(a, b, policy) >= policy.threshold:
        return ContentRelation.SIMILAR
    return ContentRelation.NOT_SIMILAR


def compare_bodies(a: bytes, b: bytes, media_type: str | None,
                   policy: SimilarityPolicy = SimilarityPolicy()) -> ContentRelation:
    """Equality first, similarity as the fallback."""
    if bodies_equal(a, b):
        return ContentRelation.EQUAL
    return bodies_similar(a, b, media_type, policy)
