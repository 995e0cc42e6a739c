"""Immutable build-snapshot records and their canonical serialization.

A snapshot captures every translation unit and link target observed in
one build of one configuration. Records serialize to line-delimited
canonical JSON (UTF-8, LF) so stored snapshots stay diffable with plain
text tools; the content hash is SHA-256 over those record lines.

Effective flag sets are stored denormalized for query speed and
revalidated on load by re-resolving the stored invocation.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from . import flagmodel
from .cmdline import RawInvocation
from .errors import CorruptSnapshot

SNAPSHOT_VERSION = 1


def _canon(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def _effective_of(invocation: RawInvocation) -> flagmodel.EffectiveFlagSet:
    entries = flagmodel.classify_all(list(invocation.tokens), invocation.dialect)
    return flagmodel.resolve(entries)


@dataclass
class TranslationUnitRecord:
    source_file: str
    output_file: str | None
    invocation: RawInvocation
    effective: flagmodel.EffectiveFlagSet

    def to_dict(self) -> dict:
        return {
            "kind": "tu",
            "source_file": self.source_file,
            "output_file": self.output_file,
            "invocation": self.invocation.to_dict(),
            "effective": flagmodel.canonical_serialize(self.effective).decode("utf-8"),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TranslationUnitRecord":
        inv = RawInvocation.from_dict(d["invocation"])
        eff = _effective_of(inv)
        stored = d["effective"].encode("utf-8")
        actual = flagmodel.canonical_serialize(eff)
        if stored != actual:
            raise CorruptSnapshot(
                hashlib.sha256(stored).hexdigest(), hashlib.sha256(actual).hexdigest()
            )
        return cls(d["source_file"], d["output_file"], inv, eff)


@dataclass
class LinkTargetRecord:
    output: str
    inputs: list[str]  # normalized paths / library names, command order
    member_tus: list[str]  # source files of TUs matched by output object path
    external_inputs: list[str]  # inputs with no TU evidence in this snapshot
    invocation: RawInvocation
    effective: flagmodel.EffectiveFlagSet

    def to_dict(self) -> dict:
        return {
            "kind": "target",
            "output": self.output,
            "inputs": list(self.inputs),
            "member_tus": list(self.member_tus),
            "external_inputs": list(self.external_inputs),
            "invocation": self.invocation.to_dict(),
            "effective": flagmodel.canonical_serialize(self.effective).decode("utf-8"),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinkTargetRecord":
        inv = RawInvocation.from_dict(d["invocation"])
        eff = _effective_of(inv)
        stored = d["effective"].encode("utf-8")
        actual = flagmodel.canonical_serialize(eff)
        if stored != actual:
            raise CorruptSnapshot(
                hashlib.sha256(stored).hexdigest(), hashlib.sha256(actual).hexdigest()
            )
        return cls(d["output"], list(d["inputs"]), list(d["member_tus"]),
                   list(d["external_inputs"]), inv, eff)


@dataclass
class BuildSnapshot:
    build_id: str
    label: str
    created: str  # RFC3339
    tus: list[TranslationUnitRecord] = field(default_factory=list)
    targets: list[LinkTargetRecord] = field(default_factory=list)
    diagnostics: list[dict] = field(default_factory=list)
    content_hash: str = ""

    def record_lines(self) -> list[str]:
        lines = [_canon(t.to_dict()) for t in self.tus]
        lines.extend(_canon(t.to_dict()) for t in self.targets)
        return lines

    def compute_hash(self) -> str:
        h = hashlib.sha256()
        for line in self.record_lines():
            h.update(line.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()

    def seal(self) -> "BuildSnapshot":
        self.content_hash = self.compute_hash()
        return self

    def tu_by_source(self) -> dict[str, TranslationUnitRecord]:
        return {t.source_file: t for t in self.tus}

    def target_by_output(self) -> dict[str, LinkTargetRecord]:
        return {t.output: t for t in self.targets}

    def value_equal(self, other: "BuildSnapshot") -> bool:
        return (
            self.build_id == other.build_id
            and self.label == other.label
            and self.created == other.created
            and self.record_lines() == other.record_lines()
        )

    def serialize(self) -> bytes:
        header = _canon({
            "snapshot_version": SNAPSHOT_VERSION,
            "build_id": self.build_id,
            "label": self.label,
            "created": self.created,
            "content_hash": self.content_hash,
        })
        lines = [header]
        lines.extend(self.record_lines())
        lines.extend(_canon({"kind": "diagnostic", **d}) for d in self.diagnostics)
        return ("\n".join(lines) + "\n").encode("utf-8")

    @classmethod
    def deserialize(cls, data: bytes) -> "BuildSnapshot":
        lines = data.decode("utf-8").splitlines()
        header = json.loads(lines[0])
        snap = cls(header["build_id"], header["label"], header["created"],
                   content_hash=header["content_hash"])
        for line in lines[1:]:
            d = json.loads(line)
            if d["kind"] == "tu":
                snap.tus.append(TranslationUnitRecord.from_dict(d))
            elif d["kind"] == "target":
                snap.targets.append(LinkTargetRecord.from_dict(d))
            else:
                d.pop("kind")
                snap.diagnostics.append(d)
        actual = snap.compute_hash()
        if actual != snap.content_hash:
            raise CorruptSnapshot(snap.content_hash, actual)
        return snap
