"""Repository scanner and report emitters.

Usage::

    iac-metrics analyze PATH [PATH ...] [--format json|csv] [--out FILE]
                        [--kb FILE] [--strict] [--ext yml,yaml] [--jobs N]
                        [--ensure-regex escaped|literal]
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Optional, Sequence, Union

from . import __version__
from .knowledge import KnowledgeBase, KnowledgeError, load_knowledge_base
from .lexing import Diagnostic
from .metrics import CATALOGUE, METRIC_NAMES, REAL_METRICS, MetricOptions, MetricsReport, compute_all
from .model import FileKind, SourceFile, parse_source

log = logging.getLogger("iacmetrics")

KB_ENV_VAR = "IAC_METRICS_KB"
DEFAULT_EXTENSIONS = frozenset({"yml", "yaml"})


class ScanError(Exception):
    pass


class RootNotFound(ScanError):
    def __init__(self, path):
        super().__init__(f"path not found: {path}")
        self.path = path


class IoError(ScanError):
    def __init__(self, path, reason):
        super().__init__(f"cannot read {path}: {reason}")
        self.path = path
        self.reason = reason


@dataclass(frozen=True)
class ScanConfig:
    roots: tuple[str, ...]
    extensions: frozenset = DEFAULT_EXTENSIONS
    kb_path: Optional[str] = None
    strict: bool = False
    output_format: str = "json"
    output_path: Optional[str] = None
    include_non_applicable: bool = True
    parallelism: Union[int, str] = 1
    options: MetricOptions = field(default_factory=MetricOptions)

    def __post_init__(self):
        if not self.roots:
            raise ValueError("at least one root path is required")
        if not self.extensions:
            raise ValueError("at least one file extension is required")
        if self.output_format not in ("json", "csv"):
            raise ValueError(f"unknown output format {self.output_format!r}")
        if self.parallelism != "auto" and (not isinstance(self.parallelism, int) or self.parallelism < 1):
            raise ValueError("parallelism must be a positive integer or 'auto'")

    @property
    def workers(self) -> int:
        if self.parallelism == "auto":
            return os.cpu_count() or 1
        return self.parallelism


@dataclass
class ScanSummary:
    files_total: int = 0
    files_parsed: int = 0
    files_failed: int = 0
    reports: list = field(default_factory=list)
    kb_version: str = ""
    tool_version: str = __version__
    diagnostics: list = field(default_factory=list)


def discover_files(roots: Sequence[str], extensions, diagnostics: list) -> list[str]:
    """Matching files under ``roots``, sorted; symlinked directory cycles are skipped."""
    suffixes = tuple("." + e.lstrip(".").lower() for e in extensions)
    found = set()
    for root in roots:
        if not os.path.exists(root):
            raise RootNotFound(root)
        if os.path.isfile(root):
            found.add(os.path.normpath(root))
            continue
        visited = set()
        for dirpath, dirnames, filenames in os.walk(root, followlinks=True):
            real = os.path.realpath(dirpath)
            if real in visited:
                diagnostics.append(Diagnostic("warning", None, f"symlink cycle skipped: {dirpath}"))
                dirnames[:] = []
                continue
            visited.add(real)
            dirnames.sort()
            for name in filenames:
                if name.lower().endswith(suffixes):
                    found.add(os.path.normpath(os.path.join(dirpath, name)))
    return sorted(found)


def _io_failure_report(path: str, reason: str) -> MetricsReport:
    empty = SourceFile(path, "", (), FileKind.UNKNOWN)
    report = compute_all(empty)
    return MetricsReport(
        report.file, report.kind, report.values, report.applicable,
        (Diagnostic("error", None, f"cannot read file: {reason}"),),
    )


def analyze_path(path: str, kb: KnowledgeBase, options: MetricOptions, strict: bool = False) -> MetricsReport:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
        text = data.decode("utf-8-sig")
    except (OSError, UnicodeDecodeError) as exc:
        if strict:
            raise IoError(path, exc) from None
        return _io_failure_report(path, str(exc))
    return compute_all(parse_source(path, text), kb, options)


def scan(config: ScanConfig, kb: Optional[KnowledgeBase] = None) -> ScanSummary:
    if kb is None:
        kb = load_knowledge_base(config.kb_path)
    summary = ScanSummary(kb_version=kb.version_label)
    paths = discover_files(config.roots, config.extensions, summary.diagnostics)
    work = partial(analyze_path, kb=kb, options=config.options, strict=config.strict)
    if config.workers > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=min(config.workers, len(paths))) as pool:
            reports = list(pool.map(work, paths, chunksize=max(1, len(paths) // (4 * config.workers))))
    else:
        reports = [work(p) for p in paths]
    summary.reports = reports
    summary.files_total = len(reports)
    summary.files_failed = sum(1 for r in reports if r.failed)
    summary.files_parsed = summary.files_total - summary.files_failed
    return summary


# --------------------------------------------------------------------------
# emitters


def _format_value(name: str, value) -> str:
    if name in REAL_METRICS:
        return f"{value:.6f}"
    return str(int(value))


def _report_json(report: MetricsReport) -> str:
    metrics = ", ".join(f"{json.dumps(n)}: {_format_value(n, report.values[n])}" for n in METRIC_NAMES)
    applicable = ", ".join(f"{json.dumps(n)}: {json.dumps(report.applicable[n])}" for n in METRIC_NAMES)
    diagnostics = ", ".join(
        json.dumps({"severity": d.severity, "line": d.line, "message": d.message}) for d in report.diagnostics
    )
    return (
        f'{{"path": {json.dumps(report.file)}, "kind": {json.dumps(report.kind.value)}, '
        f'"metrics": {{{metrics}}}, "applicable": {{{applicable}}}, "diagnostics": [{diagnostics}]}}'
    )


def emit_json(summary: ScanSummary) -> bytes:
    """Serialize the summary; metric keys follow catalogue order, reals use 6 decimals."""
    lines = [
        "{",
        f'  "tool_version": {json.dumps(summary.tool_version)},',
        f'  "kb_version": {json.dumps(summary.kb_version)},',
    ]
    if summary.reports:
        lines.append('  "files": [')
        lines.append(",\n".join("    " + _report_json(r) for r in summary.reports))
        lines.append("  ]")
    else:
        lines.append('  "files": []')
    lines.append("}")
    body = "\n".join(lines) + "\n"
    return body.encode("utf-8")


def emit_csv(summary: ScanSummary, include_non_applicable: bool = True) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf)  # RFC 4180: CRLF rows, minimal quoting
    writer.writerow(["file", "kind", *METRIC_NAMES])
    for report in summary.reports:
        row = [report.file, report.kind.value]
        for name in METRIC_NAMES:
            if not report.applicable[name] and not include_non_applicable:
                row.append("")
            else:
                row.append(_format_value(name, report.values[name]))
        writer.writerow(row)
    return buf.getvalue().encode("utf-8")


# --------------------------------------------------------------------------
# command line


def metric_reference() -> str:
    width = max(len(m.name) for m in CATALOGUE)
    lines = ["metrics (scope in brackets):"]
    for m in CATALOGUE:
        lines.append(f"  {m.name:<{width}}  {m.description} [{m.scope.value}]")
    return "\n".join(lines)


def _jobs(value: str):
    if value == "auto":
        return "auto"
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a positive integer or 'auto'") from None
    if n < 1:
        raise argparse.ArgumentTypeError("expected a positive integer or 'auto'")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iac-metrics",
        description="Source-code quality metrics for Ansible playbooks and task files.",
        epilog=metric_reference(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    analyze = sub.add_parser(
        "analyze",
        help="compute metrics for YAML files under the given paths",
        epilog=metric_reference(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    analyze.add_argument("paths", nargs="+", metavar="PATH")
    analyze.add_argument("--format", choices=("json", "csv"), default="json")
    analyze.add_argument("--out", metavar="FILE", help="write the report here instead of stdout")
    analyze.add_argument("--kb", metavar="FILE", help=f"knowledge file (default: ${KB_ENV_VAR} or bundled)")
    analyze.add_argument("--strict", action="store_true", help="exit 1 if any file fails to parse or read")
    analyze.add_argument("--ext", default="yml,yaml", help="comma-separated extensions (default: yml,yaml)")
    analyze.add_argument("--jobs", type=_jobs, default=1, metavar="N", help="worker processes, or 'auto'")
    analyze.add_argument("--ensure-regex", choices=("escaped", "literal"), default="escaped")
    analyze.add_argument("--exclude-handlers", action="store_true", help="do not count handlers in NumTasks")
    analyze.add_argument(
        "--blank-non-applicable", action="store_true",
        help="leave CSV cells empty for metrics outside the file's scope",
    )
    analyze.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")

    try:
        config = ScanConfig(
            roots=tuple(args.paths),
            extensions=frozenset(e.strip().lstrip(".") for e in args.ext.split(",") if e.strip()),
            kb_path=args.kb or os.environ.get(KB_ENV_VAR) or None,
            strict=args.strict,
            output_format=args.format,
            output_path=args.out,
            include_non_applicable=not args.blank_non_applicable,
            parallelism=args.jobs,
            options=MetricOptions(include_handlers=not args.exclude_handlers, ensure_regex=args.ensure_regex),
        )
        kb = load_knowledge_base(config.kb_path)
    except (ValueError, KnowledgeError, OSError) as exc:
        print(f"iac-metrics: error: {exc}", file=sys.stderr)
        return 2

    try:
        summary = scan(config, kb)
    except RootNotFound as exc:
        print(f"iac-metrics: error: {exc}", file=sys.stderr)
        return 2
    except IoError as exc:
        print(f"iac-metrics: error: {exc}", file=sys.stderr)
        return 1

    for diag in summary.diagnostics:
        log.warning(diag.message)
    for report in summary.reports:
        for diag in report.diagnostics:
            if diag.severity == "error":
                where = f"{report.file}:{diag.line}" if diag.line else report.file
                log.warning("%s: %s", where, diag.message)

    if config.output_format == "json":
        payload = emit_json(summary)
    else:
        payload = emit_csv(summary, config.include_non_applicable)
    try:
        if config.output_path:
            with open(config.output_path, "wb") as fh:
                fh.write(payload)
        else:
            sys.stdout.buffer.write(payload)
            sys.stdout.flush()
    except OSError as exc:
        print(f"iac-metrics: error: cannot write output: {exc}", file=sys.stderr)
        return 2

    log.info("%d files, %d parsed, %d failed", summary.files_total, summary.files_parsed, summary.files_failed)
    if config.strict and summary.files_failed:
        return 1
    return 0
