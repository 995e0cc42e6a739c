"""Turn build evidence into invocation streams and assemble snapshots.

Three evidence kinds are supported: raw build logs (text, one command
per logical line, backslash continuations joined), JSON compilation
databases (directory/file/command-or-arguments), and wrapper spool
directories (line-delimited JSON argv captures, ordered by timestamp).

Interleaved parallel-build logs are handled line-at-a-time: make/ninja
-j output interleaves at line granularity, so nothing beyond backslash
continuation spans lines.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum

from . import flagmodel
from .cmdline import (
    Dialect,
    Family,
    RawInvocation,
    Token,
    ToolKind,
    detect_dialect,
    expand_response_files,
    normalize_path,
    tokenize,
)
from .errors import DuplicateOutput, MalformedDb, MalformedRecord, UnterminatedQuote
from .snapshot import BuildSnapshot, LinkTargetRecord, TranslationUnitRecord

SPOOL_SCHEMA_VERSION = 1


class EvidenceKind(str, Enum):
    RAW_LOG = "raw-log"
    COMPILATION_DB = "compdb"
    WRAPPER_SPOOL = "spool"


@dataclass(frozen=True)
class EvidenceSource:
    kind: EvidenceKind
    path: str
    label: str
    build_id: str


def _logical_lines(text: str):
    """Yield (first_line_number, joined_line) with backslash continuations merged."""
    pending = ""
    start = None
    for idx, line in enumerate(text.splitlines(), start=1):
        if start is None:
            start = idx
        if line.endswith("\\"):
            pending += line[:-1] + " "
            continue
        yield start, pending + line
        pending = ""
        start = None
    if pending:
        yield start, pending.rstrip()


def parse_raw_log(path: str, source: EvidenceSource) -> list[RawInvocation]:
    """Extract compiler/linker invocations from a plain-text build log.

    A line counts as an invocation iff its first word's dialect has a
    known tool kind; everything else (echo, make chatter) is ignored.
    """
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        text = fh.read()
    cwd = os.path.dirname(os.path.abspath(path))
    out: list[RawInvocation] = []
    for lineno, line in _logical_lines(text):
        stripped = line.strip()
        if not stripped:
            continue
        first = stripped.split(None, 1)[0]
        dialect = detect_dialect(first)
        if dialect.tool_kind is ToolKind.UNKNOWN:
            continue
        try:
            tokens = tokenize(stripped, dialect)
        except UnterminatedQuote:
            continue  # truncated/garbled log line; not an invocation
        if not tokens:
            continue
        out.append(RawInvocation(
            program=tokens[0].text,
            tokens=tuple(tokens[1:]),
            cwd=cwd,
            source=f"log:{path}:{lineno}",
            dialect=dialect,
        ))
    return out


def parse_compilation_db(path: str, source: EvidenceSource) -> list[RawInvocation]:
    """Read a JSON compilation database (command or arguments form)."""
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        try:
            entries = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedDb(str(exc)) from None
    if not isinstance(entries, list):
        raise MalformedDb("top-level value is not an array")
    out: list[RawInvocation] = []
    for idx, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise MalformedDb("entry is not an object", idx)
        directory = entry.get("directory", "")
        if "arguments" in entry:
            argv = entry["arguments"]
            if not argv:
                raise MalformedDb("empty arguments array", idx)
            program = argv[0]
            dialect = detect_dialect(program)
            tokens = tuple(Token(a) for a in argv[1:] if a)
        elif "command" in entry:
            try:
                tokens_all = tokenize(entry["command"], Dialect(Family.GNU_LIKE, ToolKind.COMPILER))
            except UnterminatedQuote as exc:
                raise MalformedDb(f"unterminated quote: {exc}", idx) from None
            if not tokens_all:
                raise MalformedDb("empty command", idx)
            program = tokens_all[0].text
            dialect = detect_dialect(program)
            if dialect.family is Family.MSVC:
                tokens_all = tokenize(entry["command"], dialect)
            tokens = tuple(tokens_all[1:])
        else:
            raise MalformedDb("entry has neither command nor arguments", idx)
        out.append(RawInvocation(
            program=program,
            tokens=tokens,
            cwd=directory,
            source=f"compdb:{path}#{idx}",
            dialect=dialect,
        ))
    return out


def parse_wrapper_spool(dirpath: str, source: EvidenceSource) -> list[RawInvocation]:
    """Read a directory of line-delimited wrapper interception records.

    Each record: {"v": 1, "argv": [...], "cwd": str, "ts": RFC3339, "tool": str}.
    Output is ordered by (ts, filename); argv is taken verbatim.
    """
    keyed: list[tuple[tuple, RawInvocation]] = []
    for name in sorted(os.listdir(dirpath)):
        fpath = os.path.join(dirpath, name)
        if not os.path.isfile(fpath):
            continue
        with open(fpath, "r", encoding="utf-8", errors="replace") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    raise MalformedRecord(fpath, lineno, "invalid JSON") from None
                if not isinstance(rec, dict) or "argv" not in rec or not rec["argv"]:
                    raise MalformedRecord(fpath, lineno, "missing argv")
                argv = rec["argv"]
                program = argv[0]
                inv = RawInvocation(
                    program=program,
                    tokens=tuple(Token(a) for a in argv[1:] if a),
                    cwd=rec.get("cwd", ""),
                    source=f"spool:{fpath}:{lineno}",
                    dialect=detect_dialect(rec.get("tool") or program),
                )
                keyed.append(((rec.get("ts", ""), name, lineno), inv))
    keyed.sort(key=lambda kv: kv[0])
    return [inv for _, inv in keyed]


def parse_evidence(source: EvidenceSource) -> list[RawInvocation]:
    if source.kind is EvidenceKind.RAW_LOG:
        return parse_raw_log(source.path, source)
    if source.kind is EvidenceKind.COMPILATION_DB:
        return parse_compilation_db(source.path, source)
    return parse_wrapper_spool(source.path, source)


def _default_object_name(src: str, family: Family) -> str:
    base = src.replace("\\", "/").rsplit("/", 1)[-1]
    stem = base.rsplit(".", 1)[0] if "." in base else base
    return stem + (".obj" if family is Family.MSVC else ".o")


def assemble_snapshot(
    invocations: list[RawInvocation],
    source: EvidenceSource,
    created: str | None = None,
) -> BuildSnapshot:
    """Fold an invocation list into a sealed BuildSnapshot.

    Compiler invocations with recognized source inputs become TU
    records; linker invocations (and source-less compiler-driver link
    steps) become link-target records. Member TUs are matched by exact
    cwd-normalized object path; unmatched link inputs are retained as
    external inputs, since third-party binaries arrive without TU
    evidence. Nothing is dropped silently: skipped invocations become
    diagnostics.
    """
    if created is None:
        created = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    snap = BuildSnapshot(source.build_id, source.label, created)
    seen_outputs: dict[str, str] = {}
    pending_targets: list[tuple[RawInvocation, flagmodel.EffectiveFlagSet]] = []

    for inv in invocations:
        tokens = expand_response_files(list(inv.tokens), inv.cwd, inv.dialect)
        entries = flagmodel.classify_all(tokens, inv.dialect)
        effective = flagmodel.resolve(entries)
        is_compiler = inv.dialect.tool_kind is ToolKind.COMPILER
        is_linker = inv.dialect.tool_kind is ToolKind.LINKER

        if is_compiler and effective.sources:
            out_entry = effective.group_value("output")
            explicit_out = out_entry.value if out_entry is not None else None
            for src_entry in effective.sources:
                src = normalize_path(src_entry.value, inv.cwd)
                if explicit_out is not None and len(effective.sources) == 1:
                    out_path = normalize_path(explicit_out, inv.cwd)
                else:
                    out_path = normalize_path(
                        _default_object_name(src_entry.value, inv.dialect.family), inv.cwd
                    )
                if out_path in seen_outputs:
                    raise DuplicateOutput(out_path)
                seen_outputs[out_path] = src
                snap.tus.append(TranslationUnitRecord(src, out_path, inv, effective))
        elif (is_linker or is_compiler) and effective.link_inputs:
            pending_targets.append((inv, effective))
        else:
            snap.diagnostics.append({
                "source": inv.source,
                "program": inv.program,
                "reason": "no recognized source or link inputs",
            })

    tu_by_output = {t.output_file: t.source_file for t in snap.tus}
    for inv, effective in pending_targets:
        out_entry = effective.group_value("output")
        default = "a.exe" if inv.dialect.family is Family.MSVC else "a.out"
        output = normalize_path(out_entry.value if out_entry else default, inv.cwd)
        inputs, members, external = [], [], []
        for e in effective.link_inputs:
            p = normalize_path(e.value, inv.cwd) if e.key == "link_obj" else e.value
            inputs.append(p)
            if p in tu_by_output:
                members.append(tu_by_output[p])
            else:
                external.append(p)
        snap.targets.append(LinkTargetRecord(output, inputs, members, external, inv, effective))

    return snap.seal()
