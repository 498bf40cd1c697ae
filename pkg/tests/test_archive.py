import threading

import pytest

from memcoherence.archive import (
    HEADER_PROFILES,
    FetchStatus,
    LiveArchive,
    NonRewrittenUri,
    PolitenessLimiter,
    TimeMapNotFound,
    derive_uri_r,
    open_source,
    record_from_response,
)
from memcoherence.chrono import ArchivalDatetime, UndefinedReason, parse_user_datetime
from memcoherence.fixtures import FixtureArchive, FixtureWriter, parse_header_block, validate_store
from memcoherence.model import MementoFlag, OriginalResourceRef

T0 = parse_user_datetime("2004-12-09T19:29:26Z")


@pytest.mark.parametrize("uri_m,uri_r", [
    ("http://web.archive.org/web/20041209192926/http://example.com/a.gif", "http://example.com/a.gif"),
    ("http://web.archive.org/web/20041209192926im_/http://example.com/a.gif", "http://example.com/a.gif"),
    ("https://web.archive.org/web/20041209192926js_/https://ex.com/x.js?a=1", "https://ex.com/x.js?a=1"),
    ("http://web.archive.org/web/20041209192926/http:/example.com/", "http://example.com/"),
    ("http://web.archive.org/web/20041209192926id_/example.com/p", "http://example.com/p"),
    ("http://arc.example/wayback/web/20041209192926/http://e.com/", "http://e.com/"),
])
def test_derive_uri_r(uri_m, uri_r):
    assert derive_uri_r(uri_m) == OriginalResourceRef(uri_r)


@pytest.mark.parametrize("uri_m", [
    "http://example.com/a.gif",
    "http://web.archive.org/web/2004/http://example.com/",
    "http://web.archive.org/web/20041209192926/",
])
def test_derive_uri_r_rejects(uri_m):
    with pytest.raises(NonRewrittenUri):
        derive_uri_r(uri_m)


def test_identity_rewrite_profile():
    assert derive_uri_r("http://example.com/a", "identity").uri_r == "http://example.com/a"


def test_record_from_response_headers():
    headers = {
        "Memento-Datetime": "Thu, 09 Dec 2004 19:29:26 GMT",
        "x-archive-orig-last-modified": "Sun, 01 Dec 2002 10:00:00 GMT",
        "X-Archive-Orig-Date": "Thu, 09 Dec 2004 19:29:25 GMT",
        "Content-Type": "image/gif",
    }
    out = record_from_response("http://arc/m", headers, b"GIF", True, HEADER_PROFILES["wayback"])
    rec = out.record
    assert rec.memento_datetime == T0
    assert rec.last_modified.value == parse_user_datetime("2002-12-01T10:00:00Z")
    assert rec.body == b"GIF" and rec.media_type == "image/gif"
    assert MementoFlag.DYNAMIC_SUSPECT not in rec.flags


def test_record_from_response_flags_and_validation():
    headers = {"Memento-Datetime": "Thu, 09 Dec 2004 19:29:26 GMT",
               "X-Archive-Orig-Last-Modified": "Sat, 01 Jan 2005 00:00:00 GMT"}
    rec = record_from_response("http://arc/m", headers, b"x", False, HEADER_PROFILES["wayback"]).record
    assert rec.last_modified.reason is UndefinedReason.CLEARLY_INCORRECT
    assert rec.body is None
    dyn = record_from_response("http://arc/m", {"Memento-Datetime": "Thu, 09 Dec 2004 19:29:26 GMT"},
                               None, False, HEADER_PROFILES["wayback"]).record
    assert MementoFlag.DYNAMIC_SUSPECT in dyn.flags
    missing = record_from_response("http://arc/m", {}, None, False, HEADER_PROFILES["wayback"])
    assert missing.status is FetchStatus.FAILED


def _store(tmp_path):
    w = FixtureWriter(tmp_path / "store")
    r = "http://example.com/a.gif"
    w.add_memento(r, T0, body=b"GIF89a", media_type="image/gif",
                  last_modified="Sun, 01 Dec 2002 10:00:00 GMT")
    later = ArchivalDatetime(T0.epoch_seconds + 3600)
    target = w.uri_m(r, T0)
    w.add_memento(r, later, status=302, location=target)
    w.add_memento(r, ArchivalDatetime(T0.epoch_seconds + 7200), status=302,
                  location="http://example.com/a.gif")
    w.add_memento(r, ArchivalDatetime(T0.epoch_seconds + 9000), retrievable=False)
    return w, r


def test_fixture_archive(tmp_path):
    w, r = _store(tmp_path)
    src = FixtureArchive(w.root)
    tm = src.fetch_timemap(OriginalResourceRef(r))
    assert len(tm) == 4
    ok = src.fetch_memento(tm.mementos[0].uri_m, want_body=True)
    assert ok.status is FetchStatus.OK and ok.record.body == b"GIF89a"
    inside = src.fetch_memento(tm.mementos[1].uri_m)
    assert inside.status is FetchStatus.OK and inside.record.memento_datetime == T0
    live = src.fetch_memento(tm.mementos[2].uri_m)
    assert live.status is FetchStatus.REDIRECTED and live.live_web
    assert src.fetch_memento(tm.mementos[3].uri_m).status is FetchStatus.FAILED
    assert src.fetch_memento("http://web.archive.org/web/20000101000000/http://nope/").status \
        is FetchStatus.FAILED
    with pytest.raises(TimeMapNotFound):
        src.fetch_timemap(OriginalResourceRef("http://nope.example/"))
    assert validate_store(w.root) == []


def test_open_source(tmp_path):
    w, _ = _store(tmp_path)
    assert isinstance(open_source(f"fixture:{w.root}"), FixtureArchive)
    assert isinstance(open_source("live:http://arc.example/timemap/link/{uri_r}", session=object()),
                      LiveArchive)
    for bad in ("fixture:", "ftp:x", "live"):
        with pytest.raises(ValueError):
            open_source(bad)


def test_validate_store_reports_problems(tmp_path):
    root = tmp_path / "bad"
    (root / "http%3A%2F%2Fa.example%2F").mkdir(parents=True)
    (root / "notauri").mkdir()
    (root / "notauri" / "timemap.json").write_text('{"mementos": [{"uri_m": "x", "datetime": "junk"}]}')
    problems = validate_store(root)
    assert any("missing timemap.json" in p for p in problems)
    assert any("unparseable datetime" in p for p in problems)
    assert any("absolute URI-R" in p for p in problems)


def test_parse_header_block():
    status, headers = parse_header_block("HTTP/1.1 302 Found\r\nLocation: /x\r\n\r\nbody")
    assert status == 302 and headers == {"Location": "/x"}
    with pytest.raises(ValueError):
        parse_header_block("garbage")


class FakeResponse:
    def __init__(self, status, headers=None, content=b""):
        self.status_code = status
        self.headers = headers or {}
        self.content = content


class FakeSession:
    def __init__(self, routes):
        self.routes = routes
        self.calls = []

    def get(self, url, allow_redirects=True, timeout=None):
        assert allow_redirects is False
        self.calls.append(url)
        return self.routes.get(url, FakeResponse(404))


TIMEMAP = (b'<http://example.com/>; rel="original",\n'
           b'<http://arc.example/web/20041209192926/http://example.com/>; rel="memento"; '
           b'datetime="Thu, 09 Dec 2004 19:29:26 GMT"\n')


def test_live_archive_with_fake_session():
    m1 = "http://arc.example/web/20041209192926/http://example.com/"
    m2 = "http://arc.example/web/20041209192926/http://www.example.com/"
    routes = {
        "http://arc.example/timemap/link/http://example.com/": FakeResponse(200, content=TIMEMAP),
        m1: FakeResponse(302, {"Location": m2}),
        m2: FakeResponse(200, {"Memento-Datetime": "Thu, 09 Dec 2004 19:29:26 GMT"}, b"<html>"),
        "http://arc.example/web/1/loop": FakeResponse(302, {"Location": "/web/1/loop"}),
        "http://arc.example/web/2/live": FakeResponse(301, {"Location": "http://example.com/"}),
    }
    src = LiveArchive("http://arc.example/timemap/link/{uri_r}", session=FakeSession(routes))
    tm = src.fetch_timemap(OriginalResourceRef("http://example.com/"))
    assert [m.uri_m for m in tm] == [m1]
    out = src.fetch_memento(m1, want_body=True)
    assert out.status is FetchStatus.OK and out.record.uri_m == m2 and out.record.body == b"<html>"
    assert src.fetch_memento("http://arc.example/web/1/loop").status is FetchStatus.FAILED
    live = src.fetch_memento("http://arc.example/web/2/live")
    assert live.live_web and live.to_uri == "http://example.com/"
    with pytest.raises(TimeMapNotFound):
        src.fetch_timemap(OriginalResourceRef("http://other.example/"))
    with pytest.raises(ValueError):
        LiveArchive("http://arc.example/timemap", session=object())


class FakeClock:
    def __init__(self):
        self.now = 0.0
        self.lock = threading.Lock()

    def clock(self):
        return self.now

    def sleep(self, s):
        with self.lock:
            self.now += s


def test_limiter_spaces_request_starts():
    fc = FakeClock()
    lim = PolitenessLimiter(delay_ms=500, max_parallel=2, clock=fc.clock, sleep=fc.sleep)
    starts = []
    for _ in range(4):
        with lim.slot("arc.example"):
            starts.append(fc.now)
    assert starts == [0.0, 0.5, 1.0, 1.5]
    with lim.slot("other.example"):
        assert fc.now == 1.5  # other hosts are independent


def test_limiter_caps_parallelism():
    lim = PolitenessLimiter(delay_ms=0, max_parallel=2)
    active, peak = [0], [0]
    guard = threading.Lock()
    gate = threading.Event()

    def work():
        with lim.slot("h"):
            with guard:
                active[0] += 1
                peak[0] = max(peak[0], active[0])
            gate.wait(0.05)
            with guard:
                active[0] -= 1

    threads = [threading.Thread(target=work) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert peak[0] <= 2
    with pytest.raises(ValueError):
        PolitenessLimiter(max_parallel=0)
