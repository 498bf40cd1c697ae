"""Command line interface.

Exit codes: 0 report produced, 1 operational failure, 2 root not archived,
64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .archive import ArchiveError, open_source, timemap_from_links
from .chrono import parse_user_datetime
from .classify import Mode, classify, classify_composite
from .model import MementoRecord, OriginalResourceRef, Resolution, ResolutionEntry
from .recompose import (
    HEURISTICS,
    ConfigurationError,
    Limits,
    RecompositionError,
    RootNotArchived,
    SelectionHeuristic,
    recompose,
    resolve_entry,
    select_memento,
)
from .report import build_report
from .similarity import SimilarityPolicy

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_ROOT_NOT_ARCHIVED = 2
EXIT_USAGE = 64

log = logging.getLogger("memcoherence")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _datetime_arg(text):
    try:
        return parse_user_datetime(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _uri_r(text):
    try:
        return OriginalResourceRef(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="memcoherence", description="Temporal coherence of archived web pages.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def source_opts(sp, required):
        sp.add_argument("--source", required=required,
                        help="live:<timemap URL template with {uri_r}> or fixture:<path>")
        sp.add_argument("--politeness-delay-ms", type=int, default=0)
        sp.add_argument("--max-parallel-fetches", type=_positive, default=4)
        sp.add_argument("--request-timeout-ms", type=_positive, default=30000)

    a = sub.add_parser("analyze", help="recompose a root page and classify its embedded resources")
    a.add_argument("root", type=_uri_r, help="URI-R of the root page")
    a.add_argument("--datetime", required=True, type=_datetime_arg,
                   help="ISO 8601 or 14-digit timestamp")
    source_opts(a, True)
    a.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.HEADERS_ONLY.value)
    a.add_argument("--heuristic", choices=sorted(HEURISTICS), default="nearest")
    a.add_argument("--max-depth", type=_positive, default=Limits().max_depth)
    a.add_argument("--max-resources", type=_positive, default=Limits().max_resources)
    a.add_argument("--use-target-datetime", action="store_true",
                   help="select embedded mementos against --datetime, not the root's capture time")
    a.add_argument("--format", choices=("json", "table"), default="json")
    a.add_argument("--out", type=Path)

    c = sub.add_parser("classify-one", help="classify one embedded resource against a root datetime")
    c.add_argument("uri_r", type=_uri_r)
    c.add_argument("--root-datetime", required=True, type=_datetime_arg)
    group = c.add_mutually_exclusive_group(required=True)
    group.add_argument("--timemap", type=Path, help="application/link-format timemap file")
    group.add_argument("--source")
    c.add_argument("--politeness-delay-ms", type=int, default=0)
    c.add_argument("--max-parallel-fetches", type=_positive, default=4)
    c.add_argument("--request-timeout-ms", type=_positive, default=30000)
    c.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.HEADERS_ONLY.value)

    f = sub.add_parser("fixtures", help="fixture store utilities")
    fsub = f.add_subparsers(dest="fixtures_command", required=True, parser_class=_Parser)
    v = fsub.add_parser("validate", help="check a fixture store's layout")
    v.add_argument("path", type=Path)
    return p


def _open(args):
    return open_source(args.source,
                       politeness_delay_ms=args.politeness_delay_ms,
                       max_parallel_fetches=args.max_parallel_fetches,
                       request_timeout_ms=args.request_timeout_ms)


def _write(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def cmd_analyze(args) -> int:
    source = _open(args)
    mode = Mode(args.mode)
    limits = Limits(args.max_depth, args.max_resources)
    h = SelectionHeuristic(args.heuristic)
    cm = recompose(args.root, args.datetime, h, source, limits,
                   with_content=mode is Mode.WITH_CONTENT,
                   use_root_datetime=not args.use_target_datetime)
    verdicts = classify_composite(cm, mode, SimilarityPolicy())
    run = {
        "heuristic": h.name,
        "mode": mode.value,
        "max_depth": limits.max_depth,
        "max_resources": limits.max_resources,
        "selection_datetime": "target" if args.use_target_datetime else "root",
        "tool_version": __version__,
    }
    report = build_report(cm, verdicts, run)
    _write(report.to_json() if args.format == "json" else report.to_table(), args.out)
    return EXIT_OK


def _verdict_json(v) -> dict:
    ev = v.evidence
    return {
        "uri_r": v.resource.uri_r,
        "pattern": v.pattern.value,
        "state": v.state.value,
        "t0": ev.t0.http(),
        "t_left": ev.t_left.http() if ev.t_left else None,
        "t_right": ev.t_right.http() if ev.t_right else None,
        "last_modified": (ev.lm_used.value.http() if ev.lm_used is not None and ev.lm_used.is_defined
                          else None),
        "content_relation": ev.content_relation.value if ev.content_relation else None,
        "deciding_uri_m": ev.deciding_uri_m,
        "degraded": v.degraded,
        "collision_resolved": v.collision_resolved,
        "dynamic_suspect": ev.dynamic_suspect,
        "error": v.error,
    }


def cmd_classify_one(args) -> int:
    t0 = args.root_datetime
    root = MementoRecord("urn:memcoherence:root", t0)
    if args.timemap is not None:
        # a bare timemap carries no headers, so Last-Modified is absent throughout
        tm = timemap_from_links(args.uri_r, args.timemap.read_text(encoding="utf-8"))
        selected = select_memento(tm, t0, SelectionHeuristic()) if tm else None
        entry = ResolutionEntry(args.uri_r,
                                Resolution.RESOLVED if selected else Resolution.NOT_ARCHIVED,
                                1, "", selected=selected, timemap=tm)
    else:
        source = _open(args)
        entry = resolve_entry(source, args.uri_r, t0, SelectionHeuristic(), depth=1,
                              discovered_from="", want_body=args.mode == Mode.WITH_CONTENT.value,
                              with_content=args.mode == Mode.WITH_CONTENT.value)
    v = classify(root, entry, entry.timemap, Mode(args.mode))
    sys.stdout.write(json.dumps(_verdict_json(v), sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def cmd_fixtures_validate(args) -> int:
    from .fixtures import validate_store
    problems = validate_store(args.path)
    for p in problems:
        print(p)
    if problems:
        return EXIT_FAILURE
    print(f"{args.path}: ok")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"analyze": cmd_analyze, "classify-one": cmd_classify_one,
                "fixtures": cmd_fixtures_validate}
    try:
        return handlers[args.command](args)
    except RootNotArchived as exc:
        print(f"root not archived: {exc}", file=sys.stderr)
        return EXIT_ROOT_NOT_ARCHIVED
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArchiveError, RecompositionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
