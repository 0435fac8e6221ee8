"""Reader for Yahoo! R6A-style click logs.

One event per line, space separated::

    <timestamp> <shown article> <click> |user 1:v 2:v ... |<article> 1:v ... |<article> ...

The first three tokens are a decimal timestamp, the displayed article id and
a 0/1 click.  Each ``|``-prefixed token opens a block; the ``user`` block
holds the user features and every other block is a pool article with its
features.  Features are ``index:value`` pairs.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .core import Dataset, as_rng

__all__ = [
    "LogEvent",
    "ParseError",
    "parse_line",
    "format_event",
    "parse_lines",
    "pick_pair",
    "filter_binary",
    "find_perfect_matches",
    "USER_DIM",
]

log = logging.getLogger(__name__)

USER_DIM = 6

_TOKEN = re.compile(rb"[^ \t\r\n]+")
_INT = re.compile(rb"[0-9]+")
_REAL = re.compile(rb"[+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")


class ParseError(ValueError):
    """A malformed log line; ``offset`` is the byte position of the problem."""

    def __init__(self, reason: str, offset: int, line_no: int | None = None):
        self.reason = reason
        self.offset = offset
        self.line_no = line_no
        where = f"line {line_no}, " if line_no is not None else ""
        super().__init__(f"{where}byte {offset}: {reason}")


@dataclass(frozen=True)
class LogEvent:
    timestamp: int
    displayed_article: str
    click: int
    user_features: dict
    pool: tuple  # ((article_id, {index: value}), ...)

    @property
    def pool_ids(self) -> list[str]:
        return [a for a, _ in self.pool]

    @property
    def has_constant_feature(self) -> bool:
        return self.user_features.get(1) == 1.0

    def context(self, dim: int = USER_DIM) -> np.ndarray:
        """Dense user features over indices ``1..dim``, missing entries 0."""
        out = np.zeros(dim)
        for idx, v in self.user_features.items():
            if 1 <= idx <= dim:
                out[idx - 1] = v
        return out


def _decode(tok: bytes, offset: int) -> str:
    try:
        return tok.decode("utf-8")
    except UnicodeDecodeError:
        raise ParseError("token is not valid UTF-8", offset) from None


def _feature(tok: bytes, offset: int):
    idx, sep, val = tok.partition(b":")
    if not sep:
        raise ParseError(f"feature {tok[:40]!r} is not index:value", offset)
    if not _INT.fullmatch(idx):
        raise ParseError("feature index is not a decimal integer", offset)
    if not _REAL.fullmatch(val):
        raise ParseError("feature value is not a decimal real", offset + len(idx) + 1)
    v = float(val)
    if not np.isfinite(v):
        raise ParseError("feature value is not finite", offset + len(idx) + 1)
    return int(idx), v


def parse_line(line) -> LogEvent:
    """Parse one log line (``str`` or ``bytes``); raises :class:`ParseError`."""
    if isinstance(line, str):
        line = line.encode("utf-8", errors="surrogateescape")
    toks = [(m.start(), m.group()) for m in _TOKEN.finditer(line)]
    if len(toks) < 3:
        raise ParseError("expected timestamp, article and click", len(line))
    (o_ts, ts), (o_art, art), (o_clk, clk) = toks[:3]
    if not _INT.fullmatch(ts):
        raise ParseError("timestamp is not a decimal integer", o_ts)
    if b"|" in art:
        raise ParseError("displayed article id contains '|'", o_art)
    if clk not in (b"0", b"1"):
        raise ParseError("click must be 0 or 1", o_clk)
    shown = _decode(art, o_art)

    user = None
    pool = []
    current = None
    for off, tok in toks[3:]:
        if tok.startswith(b"|"):
            head = tok[1:]
            if not head or b"|" in head:
                raise ParseError("malformed block head", off)
            name = _decode(head, off + 1)
            current = {}
            if name == "user":
                if user is not None:
                    raise ParseError("duplicate user block", off)
                user = current
            else:
                if any(a == name for a, _ in pool):
                    raise ParseError(f"duplicate pool article {name!r}", off)
                pool.append((name, current))
            continue
        if current is None:
            raise ParseError("token outside any block", off)
        idx, v = _feature(tok, off)
        if idx in current:
            raise ParseError(f"duplicate feature index {idx}", off)
        current[idx] = v
    if user is None:
        raise ParseError("no user block", len(line))
    if shown not in (a for a, _ in pool):
        raise ParseError("displayed article not in pool", o_art)
    ev = LogEvent(int(ts), shown, int(clk), user, tuple(pool))
    if not ev.has_constant_feature:
        log.debug("event at %d lacks the constant user feature 1:1.0", ev.timestamp)
    return ev


def _features_str(feats: dict) -> str:
    return "".join(f" {i}:{v!r}" for i, v in feats.items())


def format_event(ev: LogEvent) -> str:
    """Serialize an event back to a log line (no trailing newline)."""
    parts = [f"{ev.timestamp} {ev.displayed_article} {ev.click} |user{_features_str(ev.user_features)}"]
    parts.extend(f"|{a}{_features_str(f)}" for a, f in ev.pool)
    return " ".join(parts)


def parse_lines(lines: Iterable) -> Iterator:
    """Yield a :class:`LogEvent` or :class:`ParseError` per non-blank line.

    Works on any iterable of lines, so files are streamed.
    """
    for no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            yield parse_line(line)
        except ParseError as err:
            err.line_no = no
            err.args = (f"line {no}, byte {err.offset}: {err.reason}",)
            yield err


def pick_pair(pool_ids, rng) -> tuple[str, str]:
    """Two distinct articles drawn uniformly from a pool, in sorted order."""
    ids = sorted(set(pool_ids))
    if len(ids) < 2:
        raise ValueError("pool has fewer than two articles")
    i, j = as_rng(rng).generator("article_pair").choice(len(ids), size=2, replace=False)
    return tuple(sorted((ids[i], ids[j])))


def filter_binary(events: Iterable[LogEvent], pair=None, rng=None, dim: int = USER_DIM) -> Dataset:
    """Keep events that displayed one of two articles.

    ``pair`` is a pair of article ids, or ``None`` to draw two articles from
    the pool of the first event.  Action 0 is the lexicographically smaller
    id.  Context is the dense user feature vector; outcome is the click.
    """
    it = iter(events)
    first = None
    if pair is None:
        first = next(it, None)
        if first is None:
            raise ValueError("no events to filter")
        pair = pick_pair(first.pool_ids, rng)
    a0, a1 = sorted(pair)
    if a0 == a1:
        raise ValueError("the two articles must differ")
    rows, actions, clicks = [], [], []
    seen = {a0: False, a1: False}

    def take(ev):
        if ev.displayed_article in seen:
            seen[ev.displayed_article] = True
            rows.append(ev.context(dim))
            actions.append(0 if ev.displayed_article == a0 else 1)
            clicks.append(float(ev.click))

    if first is not None:
        take(first)
    for ev in it:
        take(ev)
    missing = [a for a, s in seen.items() if not s]
    if missing:
        raise ValueError(f"article(s) never displayed: {', '.join(missing)}")
    return Dataset(np.array(rows).reshape(-1, dim), actions, clicks)


def find_perfect_matches(ds: Dataset) -> list[tuple[int, int]]:
    """All pairs ``(i, j)``, ``i < j``, with bitwise-equal contexts and different actions."""
    groups: dict[bytes, tuple[list, list]] = {}
    for i in range(len(ds)):
        key = ds.w[i].tobytes()
        groups.setdefault(key, ([], []))[int(ds.x[i])].append(i)
    out = []
    for zeros, ones in groups.values():
        for i in zeros:
            for j in ones:
                out.append((min(i, j), max(i, j)))
    return sorted(out)
