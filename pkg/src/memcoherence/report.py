"""Temporal spread statistics and the coherence report (JSON and table)."""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field

from .chrono import ArchivalDatetime, parse_http_datetime
from .classify import CoherenceState, CoherenceVerdict
from .model import CompositeMemento, Resolution

SECONDS_PER_DAY = 86400
SECONDS_PER_YEAR = 365.25 * SECONDS_PER_DAY
SECONDS_PER_MONTH = SECONDS_PER_YEAR / 12

SCHEMA_VERSION = 1


def _round_half_up(x: float) -> int:
    return int(x + 0.5)


def render_delta(seconds: float | None) -> str:
    """Human-scaled signed delta such as ``-18 days`` or ``+8.1 years``.

    Seconds, minutes, hours and days are whole numbers; months and years
    carry one decimal.
    """
    if seconds is None:
        return ""
    sign = "-" if seconds < 0 else "+"
    s = abs(seconds)
    if s < 120:
        value, unit = str(_round_half_up(s)), "seconds"
    elif s < 120 * 60:
        value, unit = str(_round_half_up(s / 60)), "minutes"
    elif s < SECONDS_PER_DAY:
        value, unit = str(_round_half_up(s / 3600)), "hours"
    elif s < SECONDS_PER_MONTH:
        value, unit = str(_round_half_up(s / SECONDS_PER_DAY)), "days"
    elif s < SECONDS_PER_YEAR:
        value, unit = f"{s / SECONDS_PER_MONTH:.1f}", "months"
    else:
        value, unit = f"{s / SECONDS_PER_YEAR:.1f}", "years"
    return f"{sign}{value} {unit}"


def _dt_out(dt: ArchivalDatetime | None):
    return dt.http() if dt is not None else None


def _dt_in(text):
    if text is None:
        return None
    parsed = parse_http_datetime(text)
    if not parsed.is_defined:
        raise ValueError(f"bad datetime in report: {text!r}")
    return parsed.value


@dataclass(frozen=True)
class SpreadReport:
    spread_seconds: int = 0
    mean_delta_seconds: float | None = None
    stddev_delta_seconds: float | None = None
    min_delta_seconds: int | None = None
    max_delta_seconds: int | None = None
    counts: dict = field(default_factory=dict)
    per_state_counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "spread_seconds": self.spread_seconds,
            "mean_delta_seconds": self.mean_delta_seconds,
            "stddev_delta_seconds": self.stddev_delta_seconds,
            "min_delta_seconds": self.min_delta_seconds,
            "max_delta_seconds": self.max_delta_seconds,
            "counts": dict(self.counts),
            "per_state_counts": dict(self.per_state_counts),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpreadReport":
        return cls(**{k: d.get(k) for k in (
            "spread_seconds", "mean_delta_seconds", "stddev_delta_seconds",
            "min_delta_seconds", "max_delta_seconds")},
            counts=dict(d.get("counts", {})), per_state_counts=dict(d.get("per_state_counts", {})))


def compute_spread(cm: CompositeMemento, verdicts=()) -> SpreadReport:
    """Spread over the root plus resolved entries; mean/stddev over resolved deltas."""
    t0 = cm.root.memento_datetime
    deltas = [e.selected.memento_datetime - t0 for e in cm.entries
              if e.resolution is Resolution.RESOLVED]
    counts = {r.value: 0 for r in Resolution}
    for e in cm.entries:
        counts[e.resolution.value] += 1
    per_state = {s.value: 0 for s in CoherenceState}
    for v in verdicts:
        per_state[v.state.value] += 1
    if not deltas:
        return SpreadReport(0, None, None, None, None, counts, per_state)
    lo, hi = min(0, *deltas), max(0, *deltas)
    return SpreadReport(
        spread_seconds=hi - lo,
        mean_delta_seconds=float(statistics.fmean(deltas)),
        stddev_delta_seconds=float(statistics.pstdev(deltas)),
        min_delta_seconds=min(deltas),
        max_delta_seconds=max(deltas),
        counts=counts,
        per_state_counts=per_state,
    )


@dataclass(frozen=True)
class EntryReport:
    uri_r: str
    resolution: str
    pattern: str
    state: str
    uri_m: str | None = None
    memento_datetime: ArchivalDatetime | None = None
    last_modified: ArchivalDatetime | None = None
    last_modified_state: str = "Absent"
    delta_seconds: int | None = None
    depth: int = 1
    discovered_from: str = ""
    flags: tuple = ()
    content_relation: str | None = None
    degraded: bool = False
    collision_resolved: bool = False
    dynamic_suspect: bool = False
    note: str | None = None

    def to_dict(self) -> dict:
        return {
            "uri_r": self.uri_r,
            "uri_m": self.uri_m,
            "memento_datetime": _dt_out(self.memento_datetime),
            "last_modified": _dt_out(self.last_modified),
            "last_modified_state": self.last_modified_state,
            "delta_seconds": self.delta_seconds,
            "resolution": self.resolution,
            "pattern": self.pattern,
            "state": self.state,
            "depth": self.depth,
            "discovered_from": self.discovered_from,
            "flags": list(self.flags),
            "content_relation": self.content_relation,
            "degraded": self.degraded,
            "collision_resolved": self.collision_resolved,
            "dynamic_suspect": self.dynamic_suspect,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EntryReport":
        d = dict(d)
        d["memento_datetime"] = _dt_in(d.get("memento_datetime"))
        d["last_modified"] = _dt_in(d.get("last_modified"))
        d["flags"] = tuple(d.get("flags", ()))
        return cls(**d)


@dataclass(frozen=True)
class CoherenceReport:
    root_uri_r: str
    root_uri_m: str
    root_datetime: ArchivalDatetime
    target_datetime: ArchivalDatetime
    entries: tuple = ()
    truncated: tuple = ()  # (uri_r, reason, discovered_from)
    spread: SpreadReport = SpreadReport()
    run: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "root": {
                "uri_r": self.root_uri_r,
                "uri_m": self.root_uri_m,
                "memento_datetime": _dt_out(self.root_datetime),
                "target_datetime": _dt_out(self.target_datetime),
            },
            "entries": [e.to_dict() for e in self.entries],
            "truncated": [{"uri_r": u, "reason": why, "discovered_from": src}
                          for u, why, src in self.truncated],
            "spread": self.spread.to_dict(),
            "run": dict(self.run),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoherenceReport":
        root = d["root"]
        return cls(
            root_uri_r=root["uri_r"],
            root_uri_m=root["uri_m"],
            root_datetime=_dt_in(root["memento_datetime"]),
            target_datetime=_dt_in(root["target_datetime"]),
            entries=tuple(EntryReport.from_dict(e) for e in d.get("entries", ())),
            truncated=tuple((t["uri_r"], t["reason"], t["discovered_from"])
                            for t in d.get("truncated", ())),
            spread=SpreadReport.from_dict(d.get("spread", {})),
            run=dict(d.get("run", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CoherenceReport":
        return cls.from_dict(json.loads(text))

    def table_rows(self) -> list[tuple]:
        """(URI, Memento-Datetime, delta, pattern, state); the root comes first."""
        rows = [(self.root_uri_r, self.root_datetime.iso(), "root", "", "")]
        for e in self.entries:
            if e.resolution == Resolution.NOT_ARCHIVED.value:
                when = "Not Archived"
            elif e.resolution == Resolution.MISSING_MEMENTO.value:
                when = "Missing Memento"
            else:
                when = e.memento_datetime.iso()
            rows.append((e.uri_r, when, render_delta(e.delta_seconds), e.pattern, e.state))
        return rows

    def to_table(self) -> str:
        header = ("URI", "Memento-Datetime", "Delta", "Pattern", "State")
        rows = [header] + self.table_rows()
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = []
        for n, row in enumerate(rows):
            cells = [row[0].ljust(widths[0]), row[1].ljust(widths[1]), row[2].rjust(widths[2]),
                     row[3].ljust(widths[3]), row[4].ljust(widths[4])]
            lines.append("  ".join(cells).rstrip())
            if n == 0:
                lines.append("  ".join("-" * w for w in widths))
        s = self.spread
        lines.append("")
        lines.append(f"spread {render_delta(s.spread_seconds).lstrip('+')}; "
                     f"mean {render_delta(s.mean_delta_seconds) or 'n/a'}; "
                     f"stddev {render_delta(s.stddev_delta_seconds).lstrip('+') or 'n/a'}")
        if self.truncated:
            lines.append(f"{len(self.truncated)} resources not followed (limits)")
        return "\n".join(lines) + "\n"


def build_report(cm: CompositeMemento, verdicts: list[CoherenceVerdict], run: dict | None = None
                 ) -> CoherenceReport:
    """Pair each entry with its verdict (both in discovery order)."""
    t0 = cm.root.memento_datetime
    by_resource = {v.resource: v for v in verdicts}
    entries = []
    for e in cm.entries:
        v = by_resource[e.resource]
        sel = e.selected
        lm = sel.last_modified if sel is not None else None
        entries.append(EntryReport(
            uri_r=e.resource.uri_r,
            resolution=e.resolution.value,
            pattern=v.pattern.value,
            state=v.state.value,
            uri_m=sel.uri_m if sel is not None else None,
            memento_datetime=sel.memento_datetime if e.resolution is Resolution.RESOLVED else None,
            last_modified=lm.value if lm is not None and lm.is_defined else None,
            last_modified_state=("Defined" if lm is not None and lm.is_defined
                                 else (lm.reason.value if lm is not None else "Absent")),
            delta_seconds=(sel.memento_datetime - t0
                           if e.resolution is Resolution.RESOLVED else None),
            depth=e.discovery_depth,
            discovered_from=e.discovered_from,
            flags=tuple(sorted(f.value for f in sel.flags)) if sel is not None else (),
            content_relation=(v.evidence.content_relation.value
                              if v.evidence.content_relation is not None else None),
            degraded=v.degraded,
            collision_resolved=v.collision_resolved,
            dynamic_suspect=v.evidence.dynamic_suspect,
            note=v.error or e.note,
        ))
    return CoherenceReport(
        root_uri_r=cm.root_resource.uri_r,
        root_uri_m=cm.root.uri_m,
        root_datetime=t0,
        target_datetime=cm.target_datetime,
        entries=tuple(entries),
        truncated=tuple((t.resource.uri_r, t.reason, t.discovered_from) for t in cm.truncated),
        spread=compute_spread(cm, verdicts),
        run=dict(run or {}),
    )
