from pathlib import Path

import numpy as np
import pytest

from softregret.core import Dataset, SeededRng, validate_dataset
from softregret.ingest import (
    LogEvent,
    ParseError,
    filter_binary,
    find_perfect_matches,
    format_event,
    parse_line,
    parse_lines,
    pick_pair,
)
from softregret.pairing import pair_brute_force

FIXTURE = Path(__file__).parent / "data" / "r6a_fixture.txt"

GOLDEN = [
    LogEvent(1241160900, "id-4", 0, {1: 1.0, 2: 0.5}, (("id-4", {1: 1.0}), ("id-7", {1: 1.0}))),
    LogEvent(1241160901, "id-7", 1, {1: 1.0, 3: 0.25, 6: 0.125},
             (("id-4", {1: 1.0, 2: 0.3}), ("id-7", {1: 1.0}), ("id-9", {1: 1.0}))),
    LogEvent(1241160902, "id-9", 0, {1: 1.0},
             (("id-4", {1: 1.0}), ("id-7", {1: 1.0}), ("id-9", {1: 1.0}))),
    LogEvent(1241160903, "id-4", 1, {1: 1.0, 2: 0.5}, (("id-4", {1: 1.0}), ("id-7", {1: 1.0}))),
    LogEvent(1241160904, "id-7", 0, {1: 1.0, 4: -2.5, 7: 9.0}, (("id-7", {1: 1.0}), ("id-4", {1: 1.0}))),
    LogEvent(1241160905, "id-9", 1, {2: 0.001}, (("id-9", {1: 1.0}), ("id-4", {1: 1.0}))),
]


def random_line(g):
    ids = [f"id-{k}" for k in g.choice(50, size=g.integers(1, 6), replace=False)]

    def feats():
        idx = g.choice(np.arange(1, 9), size=g.integers(0, 5), replace=False)
        return " ".join(f"{i}:{float(v)!r}" for i, v in zip(idx, g.normal(size=len(idx)) * 10.0 ** g.integers(-5, 5)))

    parts = [f"{g.integers(0, 2**40)} {ids[g.integers(len(ids))]} {g.integers(0, 2)}", f"|user {feats()}"]
    parts += [f"|{a} {feats()}" for a in ids]
    return " ".join(parts)


class TestParseLine:
    def test_example_line(self):
        ev = parse_line("1241160900 id-4 0 |user 1:1.0 2:0.5 |id-4 1:1.0 |id-7 1:1.0")
        assert ev.timestamp == 1241160900 and ev.displayed_article == "id-4" and ev.click == 0
        assert ev.user_features == {1: 1.0, 2: 0.5}
        assert ev.pool_ids == ["id-4", "id-7"]

    def test_no_user_block(self):
        with pytest.raises(ParseError) as err:
            parse_line("1241160900 id-4 0 |id-4 1:1.0")
        assert err.value.reason == "no user block"

    @pytest.mark.parametrize(
        "line, reason, offset",
        [
            ("12x id-4 0 |user 1:1.0 |id-4", "timestamp is not a decimal integer", 0),
            ("1 id-4 2 |user 1:1.0 |id-4", "click must be 0 or 1", 7),
            ("1 id-4", "expected timestamp, article and click", 6),
            ("1 id-4 0 |user 1:1.0 |id-5", "displayed article not in pool", 2),
            ("1 id-4 0 1:1.0 |user |id-4", "token outside any block", 9),
            ("1 id-4 0 |user 1:1.0 |user |id-4", "duplicate user block", 21),
            ("1 id-4 0 |user 1:nan |id-4", "feature value is not a decimal real", 17),
        ],
    )
    def test_errors_carry_reason_and_offset(self, line, reason, offset):
        with pytest.raises(ParseError) as err:
            parse_line(line)
        assert err.value.reason == reason
        assert err.value.offset == offset

    def test_unknown_indices_kept(self):
        ev = parse_line("5 a 1 |user 1:1.0 42:3.5 |a 99:1.0")
        assert ev.user_features[42] == 3.5 and ev.pool[0][1] == {99: 1.0}

    def test_constant_feature_is_a_warning(self):
        assert not parse_line("5 a 1 |user 2:1.0 |a").has_constant_feature

    def test_context_densifies(self):
        ev = parse_line("5 a 1 |user 1:1.0 3:0.5 9:2.0 |a")
        assert ev.context().tolist() == [1.0, 0.0, 0.5, 0.0, 0.0, 0.0]


class TestFixture:
    def test_golden(self):
        with open(FIXTURE, "rb") as fh:
            assert list(parse_lines(fh)) == GOLDEN

    def test_corrupt_line_counted(self):
        lines = FIXTURE.read_text().splitlines()
        lines.insert(2, "garbage line here")
        out = list(parse_lines(lines))
        errors = [o for o in out if isinstance(o, ParseError)]
        assert len(errors) == 1 and errors[0].line_no == 3
        assert [o for o in out if isinstance(o, LogEvent)] == GOLDEN


class TestRoundTrip:
    def test_fixed_point(self):
        g = np.random.default_rng(0)
        for _ in range(1000):
            line = random_line(g)
            ev = parse_line(line)
            text = format_event(ev)
            again = parse_line(text)
            assert again == ev
            assert format_event(again) == text

    def test_fuzz_total(self):
        g = np.random.default_rng(1)
        alphabet = np.frombuffer(b"0123456789 |:.-+eEuser\tid\xff\x00a", dtype=np.uint8)
        n_events = 0
        for _ in range(100_000):
            size = g.integers(0, 40)
            raw = (alphabet[g.integers(0, len(alphabet), size)] if g.random() < 0.7
                   else g.integers(0, 256, size, dtype=np.uint8)).tobytes()
            try:
                parse_line(raw)
                n_events += 1
            except ParseError as err:
                assert 0 <= err.offset <= len(raw)
        assert n_events < 100_000

    def test_mutated_valid_lines(self):
        g = np.random.default_rng(2)
        for _ in range(2000):
            raw = bytearray(random_line(g).encode())
            for _ in range(g.integers(1, 4)):
                raw[g.integers(len(raw))] = int(g.integers(0, 256))
            try:
                parse_line(bytes(raw))
            except ParseError:
                pass


class TestFilterBinary:
    def test_counts_and_labels(self):
        events = [o for o in parse_lines(FIXTURE.read_text().splitlines())]
        ds = filter_binary(events, ("id-7", "id-4"))
        assert len(ds) == 4
        assert ds.x.tolist() == [0, 1, 0, 1]  # id-4 < id-7
        assert ds.y.tolist() == [0.0, 1.0, 1.0, 0.0]
        assert validate_dataset(ds) == []

    def test_lexicographic_rule(self):
        evs = [parse_line("1 b 1 |user 1:1.0 |a |b"), parse_line("2 a 0 |user 1:1.0 |a |b")]
        ds = filter_binary(evs, ("b", "a"))
        assert ds.x.tolist() == [1, 0]

    def test_five_events_three_kept(self):
        evs = [parse_line(f"{t} {a} 0 |user 1:1.0 |a |b |c") for t, a in enumerate("abcab")]
        ds = filter_binary(evs, ("a", "c"))
        assert len(ds) == 3 and ds.x.tolist() == [0, 1, 0]

    def test_missing_article(self):
        with pytest.raises(ValueError):
            filter_binary(GOLDEN, ("id-4", "id-99"))

    def test_random_pair_reproducible(self):
        a = pick_pair(["x", "y", "z", "w"], SeededRng(3))
        assert a == pick_pair(["w", "z", "y", "x"], SeededRng(3))
        assert a[0] < a[1]
        ds1 = filter_binary(GOLDEN, rng=SeededRng(3))
        ds2 = filter_binary(GOLDEN, rng=SeededRng(3))
        assert ds1 == ds2


class TestPerfectMatches:
    def test_duplicate_context(self):
        ds = Dataset([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]], [0, 1, 1], [0.0, 1.0, 0.0])
        assert find_perfect_matches(ds) == [(0, 1)]

    def test_distinct(self):
        ds = Dataset(np.eye(3), [0, 1, 0], np.zeros(3))
        assert find_perfect_matches(ds) == []

    def test_subset_of_zero_distance_pairs(self):
        g = np.random.default_rng(0)
        w = np.round(g.normal(size=(300, 2)))
        ds = Dataset(w, g.integers(0, 2, 300), g.normal(size=300))
        pairs = pair_brute_force(ds, SeededRng(0))
        matches = find_perfect_matches(ds)
        assert matches
        zero_rows = set(np.flatnonzero(pairs.sq_distance == 0.0))
        for i, j in matches:
            assert i in zero_rows and j in zero_rows
            assert ds.x[i] != ds.x[j] and np.array_equal(ds.w[i], ds.w[j])
