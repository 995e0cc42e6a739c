import random

import pytest
from hypothesis import given, strategies as st

from flagtrace.cmdline import Dialect, Family, Token, ToolKind, tokenize
from flagtrace.flagmodel import (
    NEGATIVE,
    POSITIVE,
    EffectiveFlagSet,
    canonical_serialize,
    classify,
    classify_all,
    resolve,
)

GNU = Dialect(Family.GNU_LIKE, ToolKind.COMPILER)
MSVC = Dialect(Family.MSVC, ToolKind.COMPILER)


def c1(text, dialect=GNU, nxt=None):
    entry, consumed = classify(Token(text), dialect, Token(nxt) if nxt else None)
    return entry, consumed


class TestClassify:
    def test_no_exceptions(self):
        entry, _ = c1("-fno-exceptions")
        assert entry.key == "exceptions" and entry.polarity == NEGATIVE

    def test_march(self):
        entry, _ = c1("-march=native")
        assert entry.key == "target_arch" and entry.value == "native"

    def test_link_lib(self):
        entry, _ = c1("-latomic")
        assert entry.key == "link_lib" and entry.value == "atomic"

    def test_separated_define(self):
        entry, consumed = c1("-D", nxt="FOO=2")
        assert consumed and entry.key == "macro_define" and entry.value == "FOO=2"

    def test_msvc_dash_prefix_canonicalized(self):
        entry, _ = c1("-GS", MSVC)
        assert entry.key == "stack_protector" and entry.polarity == POSITIVE
        assert entry.spelling == "-GS"

    def test_msvc_separated_define(self):
        entry, consumed = c1("/D", MSVC, nxt="WIN32")
        assert consumed and entry.key == "macro_define" and entry.value == "WIN32"

    def test_unknown_degrades_to_opaque(self):
        entry, _ = c1("-fsome-novel-flag")
        assert entry.key == "opaque" and entry.spelling == "-fsome-novel-flag"

    def test_warning_polarity(self):
        pos, _ = c1("-Wunused")
        neg, _ = c1("-Wno-unused")
        assert pos.group == neg.group == "warning:unused"
        assert pos.polarity == POSITIVE and neg.polarity == NEGATIVE

    def test_linker_passthrough_is_opaque(self):
        entry, _ = c1("-Wl,--as-needed")
        assert entry.key == "opaque"

    def test_source_and_objects(self):
        assert c1("foo.c")[0].key == "source_file"
        assert c1("foo.o")[0].key == "link_obj"
        assert c1("libz.a")[0].key == "link_lib"
        assert c1("libz.so.1.2")[0].key == "link_lib"


class TestResolve:
    def test_later_opt_wins(self):
        r = resolve(classify_all(tokenize("-O2 -O0", GNU), GNU))
        assert r.scalar_groups["opt_level"].spelling == "-O0"

    def test_later_exceptions_wins(self):
        r = resolve(classify_all(tokenize("-fexceptions -fno-exceptions", GNU), GNU))
        assert r.scalar_groups["exceptions"].polarity == NEGATIVE

    def test_empty(self):
        r = resolve([])
        assert r == EffectiveFlagSet()

    def test_undef_after_define_removes(self):
        r = resolve(classify_all(tokenize("-DFOO=1 -UFOO", GNU), GNU))
        assert "FOO" not in r.defines

    def test_define_after_undef_defines(self):
        r = resolve(classify_all(tokenize("-UFOO -DFOO", GNU), GNU))
        assert "FOO" in r.defines

    def test_define_with_and_without_value_distinct(self):
        a = resolve(classify_all(tokenize("-DFOO", GNU), GNU))
        b = resolve(classify_all(tokenize("-DFOO=1", GNU), GNU))
        assert a != b

    def test_last_wins_oracle(self):
        # oracle: linear scan keeping the last occurrence per group
        entries = classify_all(tokenize("-O1 -O3 -g -g0 -O2", GNU), GNU)
        expected = {}
        for e in entries:
            if e.group:
                expected[e.group] = e.spelling
        r = resolve(entries)
        assert {g: e.spelling for g, e in r.scalar_groups.items()} == expected


VOCAB_TOKENS = [
    "-O0", "-O1", "-O2", "-O3", "-Os", "-g", "-g3", "-fexceptions",
    "-fno-exceptions", "-fstack-protector", "-fno-stack-protector",
    "-std=c++17", "-std=c11", "-march=native", "-march=armv7",
    "-DFOO", "-DFOO=1", "-DBAR=2", "-UFOO", "-Iinc", "-I/usr/include",
    "-lm", "-latomic", "-Wall", "-Wno-unused", "-Werror", "-c",
    "a.c", "b.c", "util.o", "libz.a", "-pthread", "-fPIC",
]


def random_entries(rng, n):
    toks = tokenize(" ".join(rng.choice(VOCAB_TOKENS) for _ in range(n)), GNU)
    return classify_all(toks, GNU)


class TestProperties:
    def test_resolve_idempotence(self):
        rng = random.Random(7)
        for _ in range(50):
            r = resolve(random_entries(rng, rng.randint(0, 20)))
            assert resolve(r.entries()) == r

    def test_decomposability(self):
        rng = random.Random(11)
        for _ in range(50):
            l1 = random_entries(rng, rng.randint(0, 12))
            l2 = random_entries(rng, rng.randint(0, 12))
            assert resolve(l1 + l2) == resolve(l1).extend(l2)

    @given(st.integers(0, 2**32 - 1))
    def test_appended_group_member_wins(self, seed):
        rng = random.Random(seed)
        entries = random_entries(rng, rng.randint(0, 10))
        tail = classify_all(tokenize(rng.choice(["-O3", "-fno-exceptions", "-g0"]), GNU), GNU)
        r = resolve(entries + tail)
        assert r.scalar_groups[tail[0].group].spelling == tail[0].spelling


class TestCanonicalSerialize:
    def test_empty_is_stable(self):
        assert canonical_serialize(resolve([])) == canonical_serialize(resolve([]))
        assert canonical_serialize(resolve([])) == b'["flagset",1]\n'

    def test_equal_values_equal_bytes(self):
        a = resolve(classify_all(tokenize("-O2 -DX -Ia", GNU), GNU))
        b = resolve(classify_all(tokenize("-O2 -DX -Ia", GNU), GNU))
        assert canonical_serialize(a) == canonical_serialize(b)

    def test_include_order_significant(self):
        a = resolve(classify_all(tokenize("-Ia -Ib", GNU), GNU))
        b = resolve(classify_all(tokenize("-Ib -Ia", GNU), GNU))
        assert canonical_serialize(a) != canonical_serialize(b)

    def test_injective_on_random_sets(self):
        rng = random.Random(3)
        seen = {}
        for _ in range(200):
            r = resolve(random_entries(rng, rng.randint(0, 15)))
            key = canonical_serialize(r)
            if key in seen:
                assert seen[key] == r
            seen[key] = r
