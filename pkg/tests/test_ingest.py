import json

import pytest

from flagtrace.cmdline import Family
from flagtrace.errors import DuplicateOutput, MalformedDb, MalformedRecord
from flagtrace.ingest import (
    EvidenceKind,
    EvidenceSource,
    assemble_snapshot,
    parse_compilation_db,
    parse_raw_log,
    parse_wrapper_spool,
)


def src_for(kind, path, build_id="b1", label="dev"):
    return EvidenceSource(kind, str(path), label, build_id)


class TestParseRawLog:
    def test_single_invocation_among_noise(self, tmp_path):
        log = tmp_path / "build.log"
        log.write_text("gcc -O2 -c a.c\necho done\n")
        source = src_for(EvidenceKind.RAW_LOG, log)
        invs = parse_raw_log(str(log), source)
        assert len(invs) == 1
        assert invs[0].program == "gcc"
        assert [t.text for t in invs[0].tokens] == ["-O2", "-c", "a.c"]
        assert invs[0].source.endswith(":1")

    def test_backslash_continuation(self, tmp_path):
        log = tmp_path / "build.log"
        log.write_text("gcc -c a.c \\\n-O2\n")
        invs = parse_raw_log(str(log), src_for(EvidenceKind.RAW_LOG, log))
        assert len(invs) == 1
        assert len(invs[0].tokens) == 3  # -c a.c -O2; four tokens incl. program

    def test_msvc_line(self, tmp_path):
        log = tmp_path / "build.log"
        log.write_text("cl /GS /O2 foo.cxx\n")
        invs = parse_raw_log(str(log), src_for(EvidenceKind.RAW_LOG, log))
        assert len(invs) == 1
        assert invs[0].dialect.family is Family.MSVC

    def test_empty_log_is_not_an_error(self, tmp_path):
        log = tmp_path / "build.log"
        log.write_text("make: nothing to do\n")
        assert parse_raw_log(str(log), src_for(EvidenceKind.RAW_LOG, log)) == []


class TestParseCompilationDb:
    def test_arguments_form(self, tmp_path):
        db = tmp_path / "compile_commands.json"
        db.write_text(json.dumps([
            {"directory": "/src", "file": "a.c", "arguments": ["gcc", "-c", "a.c"]},
        ]))
        invs = parse_compilation_db(str(db), src_for(EvidenceKind.COMPILATION_DB, db))
        assert len(invs) == 1
        assert invs[0].cwd == "/src"
        assert [t.text for t in invs[0].tokens] == ["-c", "a.c"]

    def test_command_form_quoting(self, tmp_path):
        db = tmp_path / "cc.json"
        db.write_text(json.dumps([
            {"directory": "/src", "file": "a.c", "command": 'gcc -DMSG="a b" -c a.c'},
        ]))
        invs = parse_compilation_db(str(db), src_for(EvidenceKind.COMPILATION_DB, db))
        assert [t.text for t in invs[0].tokens] == ["-DMSG=a b", "-c", "a.c"]

    def test_empty_array(self, tmp_path):
        db = tmp_path / "cc.json"
        db.write_text("[]")
        assert parse_compilation_db(str(db), src_for(EvidenceKind.COMPILATION_DB, db)) == []

    def test_rejects_entry_without_command_or_arguments(self, tmp_path):
        db = tmp_path / "cc.json"
        db.write_text(json.dumps([{"directory": "/src", "file": "a.c"}]))
        with pytest.raises(MalformedDb) as exc:
            parse_compilation_db(str(db), src_for(EvidenceKind.COMPILATION_DB, db))
        assert exc.value.index == 0


class TestParseWrapperSpool:
    def test_single_record(self, tmp_path):
        spool = tmp_path / "spool"
        spool.mkdir()
        (spool / "rec.jsonl").write_text(json.dumps(
            {"v": 1, "argv": ["cl", "/O2", "a.cxx"], "cwd": "C:\\src",
             "ts": "2026-01-01T00:00:00Z", "tool": "cl"}) + "\n")
        invs = parse_wrapper_spool(str(spool), src_for(EvidenceKind.WRAPPER_SPOOL, spool))
        assert len(invs) == 1
        assert invs[0].dialect.family is Family.MSVC

    def test_sorted_by_timestamp_across_files(self, tmp_path):
        spool = tmp_path / "spool"
        spool.mkdir()
        (spool / "z.jsonl").write_text(json.dumps(
            {"v": 1, "argv": ["gcc", "-c", "first.c"], "cwd": "/s",
             "ts": "2026-01-01T00:00:01Z", "tool": "gcc"}) + "\n")
        (spool / "a.jsonl").write_text(json.dumps(
            {"v": 1, "argv": ["gcc", "-c", "second.c"], "cwd": "/s",
             "ts": "2026-01-01T00:00:02Z", "tool": "gcc"}) + "\n")
        invs = parse_wrapper_spool(str(spool), src_for(EvidenceKind.WRAPPER_SPOOL, spool))
        got = [t.text for inv in invs for t in inv.tokens if t.text.endswith(".c")]
        assert got == ["first.c", "second.c"]

    def test_empty_dir(self, tmp_path):
        spool = tmp_path / "spool"
        spool.mkdir()
        assert parse_wrapper_spool(str(spool), src_for(EvidenceKind.WRAPPER_SPOOL, spool)) == []

    def test_malformed_record(self, tmp_path):
        spool = tmp_path / "spool"
        spool.mkdir()
        (spool / "bad.jsonl").write_text("{not json\n")
        with pytest.raises(MalformedRecord):
            parse_wrapper_spool(str(spool), src_for(EvidenceKind.WRAPPER_SPOOL, spool))


def log_snapshot(tmp_path, text, build_id="b1", label="dev", created="2026-01-01T00:00:00Z"):
    log = tmp_path / f"{build_id}.log"
    log.write_text(text)
    source = src_for(EvidenceKind.RAW_LOG, log, build_id, label)
    return assemble_snapshot(parse_raw_log(str(log), source), source, created=created)


class TestAssembleSnapshot:
    def test_tu_and_target_with_membership(self, tmp_path):
        snap = log_snapshot(tmp_path, "gcc -c a.c -o a.o\ngcc a.o -o app\n")
        assert len(snap.tus) == 1 and len(snap.targets) == 1
        assert snap.targets[0].member_tus == [snap.tus[0].source_file]
        assert snap.targets[0].external_inputs == []

    def test_empty(self, tmp_path):
        snap = log_snapshot(tmp_path, "echo hi\n")
        assert snap.tus == [] and snap.targets == []
        assert snap.content_hash == log_snapshot(tmp_path, "echo nothing\n", "b2").content_hash

    def test_deterministic_hash(self, tmp_path):
        text = "gcc -c a.c -o a.o\ngcc -c b.c -o b.o\ngcc a.o b.o -o app -lm\n"
        s1 = log_snapshot(tmp_path, text, "x1")
        s2 = log_snapshot(tmp_path, text, "x1")
        assert s1.content_hash == s2.content_hash

    def test_duplicate_output(self, tmp_path):
        with pytest.raises(DuplicateOutput):
            log_snapshot(tmp_path, "gcc -c a.c -o a.o\ngcc -c b.c -o a.o\n")

    def test_external_inputs_flagged(self, tmp_path):
        snap = log_snapshot(tmp_path, "gcc vendor.o -o app\n")
        assert snap.targets[0].external_inputs == snap.targets[0].inputs

    def test_nothing_dropped_silently(self, tmp_path):
        log = tmp_path / "b.log"
        log.write_text("gcc -c a.c\ngcc a.o -o app\nar rcs libx.a a.o\n")
        source = src_for(EvidenceKind.RAW_LOG, log)
        invs = parse_raw_log(str(log), source)
        snap = assemble_snapshot(invs, source)
        assert len(invs) == len(snap.tus) + len(snap.targets) + len(snap.diagnostics)

    def test_denormalized_effective_revalidates(self, tmp_path):
        from flagtrace.snapshot import BuildSnapshot
        snap = log_snapshot(tmp_path, "gcc -O2 -c a.c -o a.o\ngcc a.o -o app\n")
        again = BuildSnapshot.deserialize(snap.serialize())
        assert again.value_equal(snap)
