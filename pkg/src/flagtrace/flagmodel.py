"""Canonical flag vocabulary and effective-flag-set resolution.

A compiler sees an ordered argument list where later members of a
mutually exclusive group (optimization level, exception model, stack
protection, ...) override earlier ones. This module maps dialect
tokens onto a canonical vocabulary and folds an ordered token stream
into the state the compiler actually acts on.

The vocabulary is a versioned data table (data/flag_vocabulary.tsv),
not code; anything the table does not know degrades to an opaque entry
rather than failing — completeness over hundreds of flags is impossible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources

from .cmdline import Dialect, Family, Origin, Token, COMMAND_LINE

POSITIVE = "positive"
NEGATIVE = "negative"
VALUED = "valued"

_SOURCE_EXTS = {".c", ".cc", ".cpp", ".cxx", ".c++", ".i", ".ii", ".s", ".asm", ".m", ".mm"}
_OBJECT_EXTS = {".o", ".obj"}
_LIB_EXTS = {".a", ".so", ".lib", ".dylib"}


@dataclass(frozen=True)
class FlagEntry:
    key: str
    value: str | None
    polarity: str
    spelling: str
    origin: Origin = COMMAND_LINE
    group: str | None = None

    def value_tuple(self) -> tuple:
        """Value identity: everything except provenance."""
        return (self.key, self.group, self.polarity, self.value, self.spelling)

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "group": self.group,
            "polarity": self.polarity,
            "value": self.value,
            "spelling": self.spelling,
        }

    @classmethod
    def from_dict(cls, d: dict, origin: Origin = COMMAND_LINE) -> "FlagEntry":
        return cls(d["key"], d["value"], d["polarity"], d["spelling"], origin, d["group"])


@dataclass(frozen=True)
class _VocabRow:
    pattern: str
    dialect: Family
    key: str
    group: str
    polarity: str
    value_from: str


def _load_vocabulary() -> tuple[dict, list]:
    exact: dict[tuple[Family, str], _VocabRow] = {}
    prefixes: list[_VocabRow] = []
    text = resources.files("flagtrace.data").joinpath("flag_vocabulary.tsv").read_text("utf-8")
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        pattern, dialect, key, group, polarity, value_from = line.split("\t")
        row = _VocabRow(pattern, Family(dialect), key, group, polarity, value_from)
        if pattern.endswith("*"):
            prefixes.append(row)
        else:
            exact[(row.dialect, pattern)] = row
    return exact, prefixes


_EXACT, _PREFIXES = _load_vocabulary()

# Flags taking their argument either attached or as the next token.
_GNU_ARG_FLAGS = {"-D": "macro_define", "-U": "macro_undef", "-I": "include_dir",
                  "-isystem": "include_dir", "-l": "link_lib", "-o": "output"}
_MSVC_ARG_FLAGS = {"/D": "macro_define", "/U": "macro_undef", "/I": "include_dir",
                   "/Fo": "output", "/Fe": "output", "/OUT:": "output"}
_ARG_KEY_GROUPS = {"output": "output"}


def _ext_of(text: str) -> str:
    name = text.replace("\\", "/").rsplit("/", 1)[-1]
    # libfoo.so.1.2 style versioned shared objects
    lowered = name.lower()
    if ".so." in lowered:
        return ".so"
    dot = name.rfind(".")
    return name[dot:].lower() if dot > 0 else ""


def _from_row(row: _VocabRow, token: Token) -> FlagEntry:
    if row.value_from == "spelling":
        # Canonical spelling from the table (e.g. '/O2' even when typed '-O2').
        value = row.pattern
    elif row.value_from == "suffix":
        value = token.text[len(row.pattern) - 1 :]
    else:
        value = None
    return FlagEntry(row.key, value, row.polarity, token.text, token.origin, row.group)


def classify(token: Token, dialect: Dialect, next_token: Token | None = None) -> tuple[FlagEntry, bool]:
    """Map one token onto the canonical vocabulary.

    Returns the entry plus whether the next token was consumed as this
    flag's argument (separated forms: -D FOO, -I dir, /D FOO).
    Unknown tokens never fail; they degrade to key=opaque.
    """
    text = token.text
    lookup = text
    if dialect.family is Family.MSVC and text.startswith("-") and len(text) > 1:
        # MSVC accepts '-' for '/'; canonicalize for matching only.
        lookup = "/" + text[1:]

    arg_flags = _MSVC_ARG_FLAGS if dialect.family is Family.MSVC else _GNU_ARG_FLAGS
    for prefix, key in arg_flags.items():
        if lookup == prefix.rstrip(":") and not prefix.endswith(":"):
            if next_token is not None:
                return (
                    FlagEntry(key, next_token.text, VALUED, f"{text} {next_token.text}",
                              token.origin, _ARG_KEY_GROUPS.get(key)),
                    True,
                )
            return FlagEntry("opaque", None, VALUED, text, token.origin), False
        if lookup.startswith(prefix) and len(lookup) > len(prefix):
            return FlagEntry(key, lookup[len(prefix):], VALUED, text, token.origin,
                             _ARG_KEY_GROUPS.get(key)), False

    row = _EXACT.get((dialect.family, lookup))
    if row is not None:
        return _from_row(row, token), False
    for row in _PREFIXES:
        if row.dialect is dialect.family and lookup.startswith(row.pattern[:-1]):
            return _from_row(row, token), False

    if (
        dialect.family is Family.GNU_LIKE
        and text.startswith("-W")
        and len(text) > 2
        and not text.startswith(("-Wl,", "-Wa,", "-Wp,"))
    ):
        name = text[2:]
        polarity = POSITIVE
        if name.startswith("no-"):
            polarity = NEGATIVE
            name = name[3:]
        if name:
            return FlagEntry("warning", name, polarity, text, token.origin, f"warning:{name}"), False

    # On GNU-likes only '-' marks a flag; a leading '/' is an absolute path.
    is_flag_like = text.startswith("-") or (
        dialect.family is Family.MSVC and text.startswith("/")
    )
    if not is_flag_like:
        ext = _ext_of(text)
        if ext in _SOURCE_EXTS or (ext == ".c" or text.endswith(".C")):
            return FlagEntry("source_file", text, VALUED, text, token.origin), False
        if ext in _OBJECT_EXTS:
            return FlagEntry("link_obj", text, VALUED, text, token.origin), False
        if ext in _LIB_EXTS:
            return FlagEntry("link_lib", text, VALUED, text, token.origin), False

    return FlagEntry("opaque", None, VALUED, text, token.origin), False


def classify_all(tokens: list[Token], dialect: Dialect) -> list[FlagEntry]:
    entries = []
    i = 0
    while i < len(tokens):
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        entry, consumed = classify(tokens[i], dialect, nxt)
        entries.append(entry)
        i += 2 if consumed else 1
    return entries


def _macro_name(value: str) -> str:
    return value.split("=", 1)[0]


@dataclass
class EffectiveFlagSet:
    """The resolved flag state after later-wins folding.

    scalar_groups holds the winner per exclusive group; defines folds
    -D/-U left to right (an undef removes the macro); ordered fields
    keep exact command order, which is semantically significant.
    """

    scalar_groups: dict[str, FlagEntry] = field(default_factory=dict)
    defines: dict[str, FlagEntry] = field(default_factory=dict)
    include_dirs: list[FlagEntry] = field(default_factory=list)
    link_inputs: list[FlagEntry] = field(default_factory=list)
    sources: list[FlagEntry] = field(default_factory=list)
    opaque: list[FlagEntry] = field(default_factory=list)

    def extend(self, entries: list[FlagEntry]) -> "EffectiveFlagSet":
        out = EffectiveFlagSet(
            dict(self.scalar_groups), dict(self.defines),
            list(self.include_dirs), list(self.link_inputs),
            list(self.sources), list(self.opaque),
        )
        for e in entries:
            if e.group is not None:
                out.scalar_groups[e.group] = e
            elif e.key == "macro_define":
                name = _macro_name(e.value or "")
                out.defines.pop(name, None)
                out.defines[name] = e
            elif e.key == "macro_undef":
                out.defines.pop(e.value or "", None)
            elif e.key == "include_dir":
                out.include_dirs.append(e)
            elif e.key in ("link_obj", "link_lib"):
                out.link_inputs.append(e)
            elif e.key == "source_file":
                out.sources.append(e)
            else:
                out.opaque.append(e)
        return out

    def entries(self) -> list[FlagEntry]:
        """Re-linearize to an entry list; resolve() of it is a fixed point."""
        out = [self.scalar_groups[g] for g in sorted(self.scalar_groups)]
        out.extend(self.defines[n] for n in sorted(self.defines))
        out.extend(self.include_dirs)
        out.extend(self.link_inputs)
        out.extend(self.sources)
        out.extend(self.opaque)
        return out

    def group_value(self, group: str) -> FlagEntry | None:
        return self.scalar_groups.get(group)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EffectiveFlagSet):
            return NotImplemented
        return canonical_serialize(self) == canonical_serialize(other)


def resolve(entries: list[FlagEntry]) -> EffectiveFlagSet:
    """Fold ordered entries into the effective state (later wins per group)."""
    return EffectiveFlagSet().extend(entries)


def _line(*parts) -> str:
    return json.dumps(list(parts), ensure_ascii=False, separators=(",", ":"))


def canonical_serialize(fset: EffectiveFlagSet) -> bytes:
    """Deterministic byte encoding of a resolved set, fit for hashing.

    Scalar groups are sorted by group id; order-significant fields keep
    their order. Equal values produce identical bytes and vice versa.
    """
    lines = [_line("flagset", 1)]
    for gid in sorted(fset.scalar_groups):
        e = fset.scalar_groups[gid]
        lines.append(_line("group", gid, e.key, e.polarity, e.value, e.spelling))
    for name in sorted(fset.defines):
        e = fset.defines[name]
        lines.append(_line("define", name, e.value, e.spelling))
    for e in fset.include_dirs:
        lines.append(_line("include", e.value, e.spelling))
    for e in fset.link_inputs:
        lines.append(_line("link", "obj" if e.key == "link_obj" else "lib", e.value, e.spelling))
    for e in fset.sources:
        lines.append(_line("source", e.value))
    for e in fset.opaque:
        lines.append(_line("opaque", e.spelling))
    return ("\n".join(lines) + "\n").encode("utf-8")
