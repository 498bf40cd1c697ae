"""Small builders shared by the test modules."""

from memcoherence.chrono import ArchivalDatetime, DatetimeField
from memcoherence.model import MementoFlag, MementoRecord, OriginalResourceRef, TimeMapRecord

BASE = 1_100_000_000  # an arbitrary instant in 2004


def at(offset: int) -> ArchivalDatetime:
    """Instant ``offset`` seconds after BASE."""
    return ArchivalDatetime(BASE + offset)


def lm(offset):
    """Last-Modified field; ``None`` means absent."""
    return DatetimeField.absent() if offset is None else DatetimeField.defined(at(offset))


def memento(offset, last_modified=None, *, name="r", n=0, body=None, media_type=None,
            unretrievable=False, live=False):
    flags = set()
    if unretrievable:
        flags.add(MementoFlag.UNRETRIEVABLE)
    if live:
        flags.add(MementoFlag.LIVE_WEB_REDIRECT)
    return MementoRecord(f"http://arc.example/web/{BASE + offset}{'x' * n}/http://{name}.example/",
                         at(offset), lm(last_modified), body=body, media_type=media_type,
                         flags=frozenset(flags))


def timemap(*mementos, name="r"):
    return TimeMapRecord(OriginalResourceRef(f"http://{name}.example/"), tuple(mementos))
