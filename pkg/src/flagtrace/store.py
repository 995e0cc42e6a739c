"""Append-only snapshot store with retrieval by id, label, and time order.

Layout (frozen, version-headed):

    <root>/VERSION              "flagtrace-store v1"
    <root>/index.tsv            tab-separated: build_id label created hash relpath
    <root>/snapshots/<name>.fts line-delimited canonical snapshot file

Snapshots are immutable once written: there is no delete or compact
command, and a put never rewrites previously stored bytes. Writes are
serialized through an advisory lock file; reads take no lock.
"""

from __future__ import annotations

import fcntl
import hashlib
import os
from dataclasses import dataclass

from .errors import CorruptSnapshot, DuplicateBuildId, NotFound
from .snapshot import BuildSnapshot

STORE_VERSION = "flagtrace-store v1"

ABSENT = "Absent"


@dataclass(frozen=True)
class IndexEntry:
    build_id: str
    label: str
    created: str
    content_hash: str
    relpath: str


class Store:
    def __init__(self, root: str):
        self.root = root
        self.snap_dir = os.path.join(root, "snapshots")
        self.index_path = os.path.join(root, "index.tsv")
        self.version_path = os.path.join(root, "VERSION")
        self.lock_path = os.path.join(root, ".lock")
        os.makedirs(self.snap_dir, exist_ok=True)
        if not os.path.exists(self.version_path):
            with open(self.version_path, "w", encoding="utf-8") as fh:
                fh.write(STORE_VERSION + "\n")

    def _read_index(self) -> list[IndexEntry]:
        if not os.path.exists(self.index_path):
            return []
        entries = []
        with open(self.index_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                build_id, label, created, content_hash, relpath = line.split("\t")
                entries.append(IndexEntry(build_id, label, created, content_hash, relpath))
        return entries

    def put(self, snapshot: BuildSnapshot) -> str:
        """Durably write a snapshot, then index it; returns the content hash."""
        with open(self.lock_path, "w") as lock:
            fcntl.flock(lock, fcntl.LOCK_EX)
            for e in self._read_index():
                if e.build_id == snapshot.build_id:
                    raise DuplicateBuildId(snapshot.build_id)
            name = hashlib.sha256(snapshot.build_id.encode("utf-8")).hexdigest()[:16] + ".fts"
            relpath = os.path.join("snapshots", name)
            final = os.path.join(self.root, relpath)
            tmp = final + ".tmp"
            data = snapshot.serialize()
            with open(tmp, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.rename(tmp, final)
            line = "\t".join([snapshot.build_id, snapshot.label, snapshot.created,
                              snapshot.content_hash, relpath])
            with open(self.index_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        return snapshot.content_hash

    def get(self, build_id: str) -> BuildSnapshot:
        """Load and hash-verify one snapshot; NotFound for unknown ids."""
        for e in self._read_index():
            if e.build_id == build_id:
                with open(os.path.join(self.root, e.relpath), "rb") as fh:
                    snap = BuildSnapshot.deserialize(fh.read())
                if snap.content_hash != e.content_hash:
                    raise CorruptSnapshot(e.content_hash, snap.content_hash)
                return snap
        raise NotFound(build_id)

    def list_builds(self, label: str | None = None) -> list[IndexEntry]:
        entries = self._read_index()
        if label is not None:
            entries = [e for e in entries if e.label == label]
        entries.sort(key=lambda e: (e.created, e.build_id))
        return entries

    def history(
        self, label: str, flag_query: tuple[str, str] | None = None
    ) -> list[tuple[str, str, dict]]:
        """Builds with the label in created order, optionally summarizing a flag.

        flag_query is (scope, key) with scope "tu" or "target"; the
        summary maps each subject in scope to the winning value of the
        group `key` (or ABSENT). Also reports a macro name's definition
        when `key` names no scalar group.

        History queries are a linear scan over stored snapshots; there
        is no imposed bound on history length.
        """
        out = []
        for e in self.list_builds(label):
            summary: dict[str, str] = {}
            if flag_query is not None:
                scope, key = flag_query
                snap = self.get(e.build_id)
                records = snap.targets if scope == "target" else snap.tus
                for rec in records:
                    subject = rec.output if scope == "target" else rec.source_file
                    winner = rec.effective.group_value(key)
                    if winner is not None:
                        summary[subject] = winner.value if winner.value is not None else winner.spelling
                    elif key in rec.effective.defines:
                        summary[subject] = rec.effective.defines[key].spelling
                    else:
                        summary[subject] = ABSENT
            out.append((e.build_id, e.created, summary))
        return out
