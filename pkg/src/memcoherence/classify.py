"""Temporal coherence classification of embedded mementos.

Each embedded resource is placed in exactly one pattern by comparing the
root's Memento-Datetime with the Memento-Datetime, Last-Modified and
(optionally) content of the embedded resource's mementos. The decision
order is: not archived, simultaneous capture, left-only, right-only,
bracketing pair.

Policies that go beyond the pattern definitions:

* collisions (several mementos at the deciding datetime) take the least
  favourable state;
* an unretrievable deciding memento falls back to the next retrievable one,
  or from a pair to the one-memento pattern on the retrievable side, and
  marks the verdict ``degraded``;
* ``Last-Modified`` equal to the root datetime brackets it (``<=``) in both
  the one- and two-memento bracket patterns.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

from .chrono import ArchivalDatetime, DatetimeField, validate_last_modified
from .model import (
    CompositeMemento,
    MementoFlag,
    MementoRecord,
    OriginalResourceRef,
    Resolution,
    ResolutionEntry,
    TimeMapRecord,
)
from .similarity import ContentRelation, SimilarityPolicy, compare_bodies

log = logging.getLogger(__name__)


class ClassificationError(Exception):
    pass


class PatternCode(str, enum.Enum):
    RIGHT_BRACKET = "1RB"
    RIGHT_NEWER = "1RN"
    RIGHT_UNDEFINED = "1RU"
    LEFT_LAST_MODIFIED = "1LL"
    LEFT_UNDEFINED = "1LU"
    SIMULTANEOUS = "1EQ"
    TWO_BRACKET = "2B"
    TWO_NEWER = "2N"
    TWO_UNDEFINED = "2U"
    EQUAL_BRACKET = "2EB"
    EQUAL_NEWER = "2EN"
    EQUAL_UNDEFINED = "2EU"
    SIMILAR_BRACKET = "2SB"
    SIMILAR_NEWER = "2SN"
    SIMILAR_UNDEFINED = "2SU"
    NOT_SIMILAR_BRACKET = "2NB"
    NOT_SIMILAR_NEWER = "2NN"
    NOT_SIMILAR_UNDEFINED = "2NU"
    NO_EMBEDDED = "0NE"
    NOT_ARCHIVED = "0NA"


class CoherenceState(str, enum.Enum):
    COHERENT = "C"
    VIOLATIVE = "V"
    POSSIBLY_COHERENT = "PC"
    PROBABLY_VIOLATIVE = "PV"
    UNDEFINED = "CU"

    @property
    def rank(self) -> int:
        """Favourability; higher is better."""
        return STATE_RANK[self]

    @property
    def label(self) -> str:
        return STATE_LABELS[self]


STATE_RANK = {
    CoherenceState.VIOLATIVE: 0,
    CoherenceState.PROBABLY_VIOLATIVE: 1,
    CoherenceState.UNDEFINED: 2,
    CoherenceState.POSSIBLY_COHERENT: 3,
    CoherenceState.COHERENT: 4,
}

STATE_LABELS = {
    CoherenceState.COHERENT: "Prima Facie Coherent",
    CoherenceState.VIOLATIVE: "Prima Facie Violative",
    CoherenceState.POSSIBLY_COHERENT: "Possibly Coherent",
    CoherenceState.PROBABLY_VIOLATIVE: "Probably Violative",
    CoherenceState.UNDEFINED: "Coherence Undefined",
}

_C, _V, _PC, _PV, _CU = (CoherenceState.COHERENT, CoherenceState.VIOLATIVE,
                         CoherenceState.POSSIBLY_COHERENT,
                         CoherenceState.PROBABLY_VIOLATIVE, CoherenceState.UNDEFINED)
P = PatternCode

PATTERN_STATES = {
    P.RIGHT_BRACKET: _C, P.RIGHT_NEWER: _V, P.RIGHT_UNDEFINED: _PV,
    P.LEFT_LAST_MODIFIED: _PC, P.LEFT_UNDEFINED: _PV, P.SIMULTANEOUS: _C,
    P.TWO_BRACKET: _C, P.TWO_NEWER: _V, P.TWO_UNDEFINED: _PV,
    P.EQUAL_BRACKET: _C, P.EQUAL_NEWER: _C, P.EQUAL_UNDEFINED: _C,
    P.SIMILAR_BRACKET: _C, P.SIMILAR_NEWER: _C, P.SIMILAR_UNDEFINED: _C,
    P.NOT_SIMILAR_BRACKET: _C, P.NOT_SIMILAR_NEWER: _V, P.NOT_SIMILAR_UNDEFINED: _PV,
    P.NO_EMBEDDED: _C, P.NOT_ARCHIVED: _CU,
}

_CONTENT_PATTERNS = {
    (ContentRelation.EQUAL, "B"): P.EQUAL_BRACKET,
    (ContentRelation.EQUAL, "N"): P.EQUAL_NEWER,
    (ContentRelation.EQUAL, "U"): P.EQUAL_UNDEFINED,
    (ContentRelation.SIMILAR, "B"): P.SIMILAR_BRACKET,
    (ContentRelation.SIMILAR, "N"): P.SIMILAR_NEWER,
    (ContentRelation.SIMILAR, "U"): P.SIMILAR_UNDEFINED,
    (ContentRelation.NOT_SIMILAR, "B"): P.NOT_SIMILAR_BRACKET,
    (ContentRelation.NOT_SIMILAR, "N"): P.NOT_SIMILAR_NEWER,
    (ContentRelation.NOT_SIMILAR, "U"): P.NOT_SIMILAR_UNDEFINED,
}
_BASE_PAIR = {"B": P.TWO_BRACKET, "N": P.TWO_NEWER, "U": P.TWO_UNDEFINED}


class Mode(str, enum.Enum):
    HEADERS_ONLY = "headers"
    WITH_CONTENT = "content"


@dataclass(frozen=True)
class Evidence:
    t0: ArchivalDatetime
    t_left: ArchivalDatetime | None = None
    t_right: ArchivalDatetime | None = None
    lm_used: DatetimeField | None = None
    content_relation: ContentRelation | None = None
    deciding_uri_m: str | None = None
    dynamic_suspect: bool = False


@dataclass(frozen=True)
class CoherenceVerdict:
    resource: OriginalResourceRef
    pattern: PatternCode
    state: CoherenceState
    evidence: Evidence
    degraded: bool = False
    collision_resolved: bool = False
    error: str | None = None


# -- single-memento predicates --------------------------------------------------


def _lm(m: MementoRecord) -> DatetimeField:
    return validate_last_modified(m.last_modified, m.memento_datetime)


def _lm_class(lm: DatetimeField, t0: ArchivalDatetime) -> str:
    """B: modified on/before root capture; N: after it; U: undefined."""
    if not lm.is_defined:
        return "U"
    return "B" if lm.value <= t0 else "N"


def right_pattern(m: MementoRecord, t0: ArchivalDatetime) -> PatternCode:
    return {"B": P.RIGHT_BRACKET, "N": P.RIGHT_NEWER, "U": P.RIGHT_UNDEFINED}[_lm_class(_lm(m), t0)]


def left_pattern(m: MementoRecord) -> PatternCode:
    return P.LEFT_LAST_MODIFIED if _lm(m).is_defined else P.LEFT_UNDEFINED


def pair_pattern(right: MementoRecord, t0: ArchivalDatetime,
                 relation: ContentRelation | None = None) -> PatternCode:
    cls = _lm_class(_lm(right), t0)
    if relation is None:
        return _BASE_PAIR[cls]
    return _CONTENT_PATTERNS[(relation, cls)]


def content_relation(left: MementoRecord, right: MementoRecord,
                     sim: SimilarityPolicy) -> ContentRelation | None:
    if left.body is None or right.body is None:
        return None
    return compare_bodies(left.body, right.body, right.media_type or left.media_type, sim)


# -- decision procedure ---------------------------------------------------------


def _groups(mementos):
    run = []
    for m in mementos:
        if run and m.memento_datetime != run[0].memento_datetime:
            yield run
            run = []
        run.append(m)
    if run:
        yield run


@dataclass
class _Candidate:
    pattern: PatternCode
    deciding: MementoRecord
    relation: ContentRelation | None = None


def _first_retrievable(groups):
    """Return (retrievable members of first usable group, fell_back)."""
    for i, group in enumerate(groups):
        ok = [m for m in group if m.retrievable]
        if ok:
            return ok, i > 0
    return [], True


def classify(root: MementoRecord, entry: ResolutionEntry, tm: TimeMapRecord | None = None,
             mode: Mode = Mode.HEADERS_ONLY, sim: SimilarityPolicy = SimilarityPolicy()
             ) -> CoherenceVerdict:
    """Classify one embedded resource against the root memento.

    ``tm`` defaults to the timemap stored on ``entry``; its records should
    carry the headers (and, in content mode, bodies) of the deciding
    mementos.
    """
    t0 = getattr(root, "memento_datetime", None)
    if not isinstance(t0, ArchivalDatetime):
        raise ClassificationError("root memento has no Memento-Datetime")
    tm = tm if tm is not None else entry.timemap
    degraded = entry.resolution is Resolution.MISSING_MEMENTO

    def verdict(cands, t_left=None, t_right=None, fallback=False):
        nonlocal degraded
        degraded = degraded or fallback
        if not cands:
            return CoherenceVerdict(entry.resource, P.NOT_ARCHIVED, _CU,
                                    Evidence(t0, t_left, t_right), degraded=degraded)
        pick = min(cands, key=lambda c: PATTERN_STATES[c.pattern].rank)
        collided = len({c.pattern for c in cands}) > 1
        m = pick.deciding
        ev = Evidence(t0, t_left, t_right, _lm(m), pick.relation, m.uri_m,
                      MementoFlag.DYNAMIC_SUSPECT in m.flags)
        return CoherenceVerdict(entry.resource, pick.pattern, PATTERN_STATES[pick.pattern], ev,
                                degraded=degraded, collision_resolved=collided)

    mementos = [m for m in (tm.mementos if tm is not None else ()) if not m.live_web]
    if entry.resolution is Resolution.NOT_ARCHIVED or not mementos:
        return verdict([])

    equal = [m for m in mementos if m.memento_datetime == t0]
    if equal:
        return verdict([_Candidate(P.SIMULTANEOUS, m) for m in equal], t0, t0)

    left = [m for m in mementos if m.memento_datetime < t0]
    right = [m for m in mementos if m.memento_datetime > t0]
    left_groups = list(_groups(left))[::-1]    # newest first
    right_groups = list(_groups(right))         # oldest first
    t_left = left_groups[0][0].memento_datetime if left_groups else None
    t_right = right_groups[0][0].memento_datetime if right_groups else None

    def left_only(groups, fell_back=False):
        ok, fb = _first_retrievable(groups)
        return verdict([_Candidate(left_pattern(m), m) for m in ok], t_left, t_right,
                       fell_back or (fb and bool(groups)))

    def right_only(groups, fell_back=False):
        ok, fb = _first_retrievable(groups)
        return verdict([_Candidate(right_pattern(m, t0), m) for m in ok], t_left, t_right,
                       fell_back or (fb and bool(groups)))

    if not right:
        return left_only(left_groups)
    if not left:
        return right_only(right_groups)

    # bracketing pair: newest left, oldest right
    r_ok = [m for m in right_groups[0] if m.retrievable]
    if not r_ok:
        v = left_only(left_groups, fell_back=True)
        if v.pattern is not P.NOT_ARCHIVED:
            return v
        return right_only(right_groups[1:], fell_back=True)
    if mode is Mode.HEADERS_ONLY:
        return verdict([_Candidate(pair_pattern(r, t0), r) for r in r_ok], t_left, t_right)
    l_ok = [m for m in left_groups[0] if m.retrievable]
    if not l_ok:
        return verdict([_Candidate(right_pattern(r, t0), r) for r in r_ok], t_left, t_right,
                       fallback=True)
    cands = []
    for r in r_ok:
        for lm in l_ok:
            rel = content_relation(lm, r, sim)
            cands.append(_Candidate(pair_pattern(r, t0, rel), r, rel))
    return verdict(cands, t_left, t_right)


def no_embedded_verdict(cm: CompositeMemento) -> CoherenceVerdict:
    t0 = cm.root.memento_datetime
    return CoherenceVerdict(cm.root_resource, P.NO_EMBEDDED, _C, Evidence(t0))


def classify_composite(cm: CompositeMemento, mode: Mode = Mode.HEADERS_ONLY,
                       sim: SimilarityPolicy = SimilarityPolicy()) -> list[CoherenceVerdict]:
    """One verdict per entry in discovery order; ``[0NE]`` when there are none.

    A failure on one entry yields a ``CU`` verdict carrying the error rather
    than aborting the batch.
    """
    if not cm.entries:
        return [no_embedded_verdict(cm)]
    out = []
    for entry in cm.entries:
        try:
            out.append(classify(cm.root, entry, entry.timemap, mode, sim))
        except Exception as exc:  # keep the batch going
            log.exception("classification failed for %s", entry.resource)
            out.append(CoherenceVerdict(entry.resource, P.NOT_ARCHIVED, _CU,
                                        Evidence(cm.root.memento_datetime),
                                        error=f"{type(exc).__name__}: {exc}"))
    return out
