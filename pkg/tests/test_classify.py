import pytest

from memcoherence.chrono import DatetimeField, UndefinedReason
from memcoherence.classify import (
    PATTERN_STATES,
    ClassificationError,
    CoherenceState,
    Mode,
    PatternCode,
    classify,
    classify_composite,
)
from memcoherence.model import (
    CompositeMemento,
    MementoFlag,
    OriginalResourceRef,
    Resolution,
    ResolutionEntry,
)
from memcoherence.similarity import ContentRelation

import oracles
from helpers import at, memento, timemap

ROOT = memento(0, name="root")
TEXT = b" ".join(b"w%d" % i for i in range(80))
SIMILAR = TEXT + b" appended"
OTHER = b"nothing in common with the other body"


def entry(*mementos, resolution=None, name="r"):
    tm = timemap(*mementos, name=name)
    if resolution is None:
        resolution = Resolution.RESOLVED if tm else Resolution.NOT_ARCHIVED
    selected = tm.mementos[0] if resolution is Resolution.RESOLVED else None
    return ResolutionEntry(tm.resource, resolution, 1, ROOT.uri_m, selected=selected, timemap=tm)


def run(*mementos, mode=Mode.HEADERS_ONLY, resolution=None):
    return classify(ROOT, entry(*mementos, resolution=resolution), mode=mode)


def pair(lm, left_body=None, right_body=None):
    return (memento(-20, body=left_body, media_type="text/html"),
            memento(10, lm, body=right_body, media_type="text/html"))


GOLDEN = {
    "1RB": dict(ms=[memento(10, -5)]),
    "1RN": dict(ms=[memento(10, 5)]),
    "1RU": dict(ms=[memento(10)]),
    "1LL": dict(ms=[memento(-10, -30)]),
    "1LU": dict(ms=[memento(-10)]),
    "1EQ": dict(ms=[memento(0)]),
    "2B": dict(ms=pair(-5)),
    "2N": dict(ms=pair(5)),
    "2U": dict(ms=pair(None)),
    "2EB": dict(ms=pair(-5, TEXT, TEXT), mode=Mode.WITH_CONTENT),
    "2EN": dict(ms=pair(5, TEXT, TEXT), mode=Mode.WITH_CONTENT),
    "2EU": dict(ms=pair(None, TEXT, TEXT), mode=Mode.WITH_CONTENT),
    "2SB": dict(ms=pair(-5, TEXT, SIMILAR), mode=Mode.WITH_CONTENT),
    "2SN": dict(ms=pair(5, TEXT, SIMILAR), mode=Mode.WITH_CONTENT),
    "2SU": dict(ms=pair(None, TEXT, SIMILAR), mode=Mode.WITH_CONTENT),
    "2NB": dict(ms=pair(-5, TEXT, OTHER), mode=Mode.WITH_CONTENT),
    "2NN": dict(ms=pair(5, TEXT, OTHER), mode=Mode.WITH_CONTENT),
    "2NU": dict(ms=pair(None, TEXT, OTHER), mode=Mode.WITH_CONTENT),
    "0NA": dict(ms=[]),
}


def golden_verdict(code):
    if code == "0NE":
        cm = CompositeMemento(ROOT, OriginalResourceRef("http://root.example/"), at(0))
        (v,) = classify_composite(cm)
        return v
    case = GOLDEN[code]
    return run(*case["ms"], mode=case.get("mode", Mode.HEADERS_ONLY))


def test_state_table_matches_reference():
    assert {p.value: s.value for p, s in PATTERN_STATES.items()} == oracles.STATE_TABLE
    assert len(PatternCode) == 20


@pytest.mark.parametrize("code", sorted(oracles.STATE_TABLE))
def test_golden_patterns(code):
    v = golden_verdict(code)
    assert v.pattern.value == code
    assert v.state.value == oracles.STATE_TABLE[code]


def test_state_ranks():
    order = sorted(CoherenceState, key=lambda s: s.rank)
    assert [s.value for s in order] == ["V", "PV", "CU", "PC", "C"]
    assert CoherenceState.COHERENT.label == "Prima Facie Coherent"


def test_lm_equal_to_root_brackets():
    assert run(memento(10, 0)).pattern is PatternCode.RIGHT_BRACKET
    assert run(*pair(0)).pattern is PatternCode.TWO_BRACKET
    assert run(memento(10, 1)).pattern is PatternCode.RIGHT_NEWER


def test_clearly_incorrect_lm_is_undefined():
    # Last-Modified after the memento's own capture is ignored
    m = memento(10, 20)
    v = run(m)
    assert v.pattern is PatternCode.RIGHT_UNDEFINED
    assert v.evidence.lm_used.reason is UndefinedReason.CLEARLY_INCORRECT


def test_evidence():
    v = run(*pair(-5))
    assert v.evidence.t0 == at(0)
    assert v.evidence.t_left == at(-20) and v.evidence.t_right == at(10)
    assert v.evidence.lm_used == DatetimeField.defined(at(-5))
    assert v.evidence.content_relation is None
    assert not v.degraded and not v.collision_resolved


def test_collision_takes_least_favourable():
    a = memento(10, -5, n=1)
    b = memento(10, None, n=2)
    v = run(a, b)
    assert v.pattern is PatternCode.RIGHT_UNDEFINED
    assert v.state is CoherenceState.PROBABLY_VIOLATIVE
    assert v.collision_resolved
    same = run(memento(10, -5, n=1), memento(10, -6, n=2))
    assert not same.collision_resolved and same.state is CoherenceState.COHERENT


def test_collision_rank_is_minimum():
    ms = [memento(10, -5, n=1), memento(10, 5, n=2), memento(10, None, n=3)]
    v = run(*ms)
    assert v.state is CoherenceState.VIOLATIVE
    assert v.state.rank == min(run(m).state.rank for m in ms)


def test_missing_right_falls_back_to_left():
    v = run(memento(-20, -30), memento(10, -5, unretrievable=True))
    assert v.pattern is PatternCode.LEFT_LAST_MODIFIED and v.degraded


def test_missing_right_and_left_advance_inward_out():
    v = run(memento(-20, unretrievable=True), memento(10, unretrievable=True), memento(30, -5))
    assert v.pattern is PatternCode.RIGHT_BRACKET and v.degraded
    v = run(memento(10, unretrievable=True), memento(20, 5))
    assert v.pattern is PatternCode.RIGHT_NEWER and v.degraded
    v = run(memento(-10, unretrievable=True), memento(-20, -30))
    assert v.pattern is PatternCode.LEFT_LAST_MODIFIED and v.degraded


def test_nothing_retrievable_is_undefined():
    v = run(memento(10, unretrievable=True), resolution=Resolution.MISSING_MEMENTO)
    assert v.pattern is PatternCode.NOT_ARCHIVED and v.state is CoherenceState.UNDEFINED
    assert v.degraded


def test_missing_left_body_degrades_content_pair():
    left = memento(-20, unretrievable=True)
    right = memento(10, -5, body=TEXT, media_type="text/html")
    v = run(left, right, mode=Mode.WITH_CONTENT)
    assert v.pattern is PatternCode.RIGHT_BRACKET and v.degraded


def test_live_web_mementos_are_ignored():
    v = run(memento(-1, live=True), memento(10, -5))
    assert v.pattern is PatternCode.RIGHT_BRACKET
    assert run(memento(10, live=True)).pattern is PatternCode.NOT_ARCHIVED


def test_dynamic_suspect_is_reported_not_applied():
    m = memento(10, -5).with_flags(MementoFlag.DYNAMIC_SUSPECT)
    v = run(m)
    assert v.evidence.dynamic_suspect
    assert v.pattern is PatternCode.RIGHT_BRACKET and v.state is CoherenceState.COHERENT


def test_root_without_datetime_is_an_error():
    class Rootless:
        memento_datetime = None
    with pytest.raises(ClassificationError):
        classify(Rootless(), entry(memento(10)))


def test_examples_from_numeric_timeline():
    # t0=100: right-only 110 with lm 90
    v = run(memento(110 - 100, 90 - 100))
    assert (v.pattern.value, v.state.value) == ("1RB", "C")
    v = run(memento(-20), memento(10, 5))
    assert (v.pattern.value, v.state.value) == ("2N", "V")
    v = run(*pair(None, TEXT, TEXT), mode=Mode.WITH_CONTENT)
    assert (v.pattern.value, v.state.value) == ("2EU", "C")
    v = run(*pair(None, TEXT, OTHER), mode=Mode.WITH_CONTENT)
    assert (v.pattern.value, v.state.value) == ("2NU", "PV")


def test_content_refines_without_leaving_family():
    for lm in (-5, 5, None):
        for right_body in (TEXT, SIMILAR, OTHER):
            ms = pair(lm, TEXT, right_body)
            h = run(*ms)
            c = run(*ms, mode=Mode.WITH_CONTENT)
            assert h.pattern.value.startswith("2") and c.pattern.value.startswith("2")
            assert c.pattern.value[-1] == h.pattern.value[-1]
            if c.state is not h.state:
                assert c.state is CoherenceState.COHERENT
                assert c.evidence.content_relation in (ContentRelation.EQUAL, ContentRelation.SIMILAR)
            if c.evidence.content_relation in (ContentRelation.EQUAL, ContentRelation.SIMILAR):
                assert c.state is CoherenceState.COHERENT


def test_composite_order_and_errors():
    good = entry(memento(10, -5, name="a"), name="a")
    na = ResolutionEntry(OriginalResourceRef("http://b.example/"), Resolution.NOT_ARCHIVED, 1, "x")

    class Broken(ResolutionEntry):
        @property
        def timemap(self):
            raise RuntimeError("boom")

        @timemap.setter
        def timemap(self, value):
            pass

    bad = Broken(OriginalResourceRef("http://c.example/"), Resolution.NOT_ARCHIVED, 1, "x")
    cm = CompositeMemento(ROOT, OriginalResourceRef("http://root.example/"), at(0), (good, na, bad))
    vs = classify_composite(cm)
    assert [v.resource.uri_r for v in vs] == ["http://a.example/", "http://b.example/",
                                              "http://c.example/"]
    assert [v.pattern.value for v in vs] == ["1RB", "0NA", "0NA"]
    assert vs[2].state is CoherenceState.UNDEFINED and "boom" in vs[2].error


def test_all_simultaneous_composite_is_coherent():
    es = tuple(entry(memento(0, name=n), name=n) for n in "abc")
    cm = CompositeMemento(ROOT, OriginalResourceRef("http://root.example/"), at(0), es)
    assert {v.state for v in classify_composite(cm)} == {CoherenceState.COHERENT}


def test_partition_sample_against_oracle():
    for cfg in list(oracles.configurations())[::7]:
        fired = oracles.firing(cfg)
        assert len(fired) == 1, (cfg, fired)
        root, e = oracles.build(cfg)
        assert classify(root, e, mode=Mode(cfg["mode"])).pattern.value == fired[0], cfg


def test_content_mode_without_bodies():
    # content mode with bodies never fetched keeps the base pattern
    v = run(memento(-20), memento(10, -5), mode=Mode.WITH_CONTENT)
    assert v.pattern is PatternCode.TWO_BRACKET and v.evidence.content_relation is None
