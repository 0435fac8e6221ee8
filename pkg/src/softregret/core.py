"""Datasets, counterfactual tables, seeded randomness and splitting.

Every randomized routine in the package takes a :class:`SeededRng` and is a
pure function of its inputs and that seed.  Generators are PCG64 streams
seeded through ``numpy.random.SeedSequence``; child streams are keyed by
extra integers (see :meth:`SeededRng.child`).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

__all__ = [
    "SeededRng",
    "as_rng",
    "LabeledExample",
    "CounterfactualExample",
    "Dataset",
    "Counterfactuals",
    "Violation",
    "train_test_split",
    "split_indices",
    "validate_dataset",
    "write_dataset",
    "read_dataset",
    "write_counterfactuals",
    "read_counterfactuals",
]


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("rng keys must be non-negative")
        return int(key)
    # strings are keyed by a stable checksum so child streams do not depend
    # on PYTHONHASHSEED
    return zlib.crc32(str(key).encode("utf-8"))


@dataclass(frozen=True)
class SeededRng:
    """A 64-bit seed naming a family of deterministic PCG64 streams.

    ``generator()`` returns a fresh stream each call, so two calls with the
    same keys replay identical numbers.  ``child(*keys)`` derives an
    independent seed from ``(seed, *keys)``; strings are hashed with CRC32.
    """

    seed: int

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))

    def _sequence(self, keys) -> np.random.SeedSequence:
        words = [self.seed & 0xFFFFFFFF, self.seed >> 32]
        words.extend(_key_to_int(k) for k in keys)
        return np.random.SeedSequence(words)

    def generator(self, *keys) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self._sequence(keys)))

    def child(self, *keys) -> "SeededRng":
        state = self._sequence(keys).generate_state(1, dtype=np.uint64)
        return SeededRng(int(state[0]))


def as_rng(rng: Union[SeededRng, int, None]) -> SeededRng:
    if isinstance(rng, SeededRng):
        return rng
    if rng is None:
        return SeededRng(0)
    return SeededRng(int(rng))


class LabeledExample(NamedTuple):
    context: np.ndarray
    action: int
    outcome: float


class CounterfactualExample(NamedTuple):
    context: np.ndarray
    y0: float
    y1: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Logged observations ``(y_i, x_i, w_i)`` stored column-wise.

    Parameters
    ----------
    w : array-like, shape (n, d)
        Contexts.
    x : array-like, shape (n,)
        Binary actions.
    y : array-like, shape (n,)
        Observed outcomes.

    The arrays are copied and frozen; examples are addressed by row index.
    Values are not checked for finiteness here, use :func:`validate_dataset`.
    """

    w: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64, copy=True)
        if w.ndim == 1:
            w = w.reshape(-1, 1)
        if w.ndim != 2 or w.shape[1] < 1:
            raise ValueError(f"contexts must be a 2-d array with d >= 1, got shape {w.shape}")
        x = np.array(self.x, copy=True)
        if x.dtype.kind == "f":
            if not np.all(np.isin(x, (0.0, 1.0))):
                raise ValueError("actions must be 0 or 1")
        x = x.astype(np.int64).reshape(-1)
        y = np.array(self.y, dtype=np.float64, copy=True).reshape(-1)
        if not (len(x) == len(y) == w.shape[0]):
            raise ValueError(
                f"length mismatch: {w.shape[0]} contexts, {len(x)} actions, {len(y)} outcomes"
            )
        for a in (w, x, y):
            a.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_examples(cls, examples: Iterable[LabeledExample], dim: int | None = None) -> "Dataset":
        examples = list(examples)
        if not examples:
            if dim is None:
                raise ValueError("dim is required for an empty dataset")
            return cls(np.empty((0, dim)), np.empty(0, dtype=np.int64), np.empty(0))
        dim = len(examples[0].context) if dim is None else dim
        for i, ex in enumerate(examples):
            if len(ex.context) != dim:
                raise ValueError(f"example {i} has context length {len(ex.context)}, expected {dim}")
        return cls(
            np.array([ex.context for ex in examples], dtype=np.float64),
            np.array([ex.action for ex in examples]),
            np.array([ex.outcome for ex in examples], dtype=np.float64),
        )

    @property
    def dim(self) -> int:
        return self.w.shape[1]

    def __len__(self) -> int:
        return self.w.shape[0]

    def __getitem__(self, i: int) -> LabeledExample:
        return LabeledExample(self.w[i], int(self.x[i]), float(self.y[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.w[idx], self.x[idx], self.y[idx])

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.array(self.w.shape, dtype=np.int64).tobytes())
        for a in (self.w, self.x.astype(np.int64), self.y):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.w.shape == other.w.shape
            and np.array_equal(self.x, other.x)
            and _bitwise_equal(self.w, other.w)
            and _bitwise_equal(self.y, other.y)
        )


@dataclass(frozen=True, eq=False)
class Counterfactuals:
    """Contexts with both potential outcomes.

    ``y0``/``y1`` are the values regret is measured against (noiseless means
    for the synthetic generators).  ``y0_draw``/``y1_draw`` optionally carry
    the noisy per-arm draws that were used when logging.
    """

    w: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    y0_draw: np.ndarray | None = None
    y1_draw: np.ndarray | None = None

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64, copy=True)
        if w.ndim == 1:
            w = w.reshape(-1, 1)
        n = w.shape[0]
        object.__setattr__(self, "w", w)
        for name in ("y0", "y1", "y0_draw", "y1_draw"):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.array(v, dtype=np.float64, copy=True).reshape(-1)
            if len(v) != n:
                raise ValueError(f"{name} has length {len(v)}, expected {n}")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        w.setflags(write=False)

    @classmethod
    def from_examples(cls, examples: Sequence[CounterfactualExample]) -> "Counterfactuals":
        return cls(
            np.array([e.context for e in examples], dtype=np.float64),
            [e.y0 for e in examples],
            [e.y1 for e in examples],
        )

    @property
    def dim(self) -> int:
        return self.w.shape[1]

    def __len__(self) -> int:
        return self.w.shape[0]

    def __getitem__(self, i: int) -> CounterfactualExample:
        return CounterfactualExample(self.w[i], float(self.y0[i]), float(self.y1[i]))

    def subset(self, idx) -> "Counterfactuals":
        idx = np.asarray(idx, dtype=np.int64)
        pick = lambda a: None if a is None else a[idx]  # noqa: E731
        return Counterfactuals(self.w[idx], self.y0[idx], self.y1[idx], pick(self.y0_draw), pick(self.y1_draw))

    @property
    def effect(self) -> np.ndarray:
        return self.y1 - self.y0

    def __eq__(self, other):
        if not isinstance(other, Counterfactuals):
            return NotImplemented
        return all(
            _bitwise_equal(a, b)
            for a, b in [(self.w, other.w), (self.y0, other.y0), (self.y1, other.y1)]
        )


def _bitwise_equal(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and a.tobytes() == b.tobytes()


def train_test_split(ds, train_fraction: float, rng) -> tuple:
    """Split ``ds`` by a uniform random permutation.

    The first ``floor(train_fraction * n)`` permuted rows form the training
    set.  ``ds`` may be a :class:`Dataset` or :class:`Counterfactuals`.
    """
    train_idx, test_idx = split_indices(len(ds), train_fraction, rng)
    return ds.subset(train_idx), ds.subset(test_idx)


def split_indices(n: int, train_fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Row indices of the split performed by :func:`train_test_split`."""
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    perm = as_rng(rng).generator("split").permutation(n)
    n_train = math.floor(train_fraction * n)
    return perm[:n_train], perm[n_train:]


class Violation(NamedTuple):
    index: int | None
    reason: str


def validate_dataset(ds, dim: int | None = None) -> list[Violation]:
    """Return every problem found in ``ds``; an empty list means clean.

    Accepts a :class:`Dataset` or a plain sequence of :class:`LabeledExample`
    (in which case ``dim`` defaults to the first context's length).
    """
    report: list[Violation] = []
    if isinstance(ds, Dataset):
        bad_w = ~np.isfinite(ds.w).all(axis=1)
        bad_y = ~np.isfinite(ds.y)
        bad_x = ~np.isin(ds.x, (0, 1))
        for i in np.flatnonzero(bad_w):
            report.append(Violation(int(i), "non-finite context"))
        for i in np.flatnonzero(bad_y):
            report.append(Violation(int(i), "non-finite outcome"))
        for i in np.flatnonzero(bad_x):
            report.append(Violation(int(i), "action not in {0, 1}"))
        actions = ds.x
    else:
        examples = list(ds)
        if dim is None and examples:
            dim = len(examples[0].context)
        actions = []
        for i, ex in enumerate(examples):
            ctx = np.asarray(ex.context, dtype=np.float64).reshape(-1)
            if len(ctx) != dim:
                report.append(Violation(i, f"context length {len(ctx)} != {dim}"))
            if not np.isfinite(ctx).all():
                report.append(Violation(i, "non-finite context"))
            if not math.isfinite(ex.outcome):
                report.append(Violation(i, "non-finite outcome"))
            if ex.action not in (0, 1):
                report.append(Violation(i, "action not in {0, 1}"))
            actions.append(ex.action)
        actions = np.asarray(actions)
    for a in (0, 1):
        if not np.any(actions == a):
            report.append(Violation(None, f"action class {a} empty"))
    return report


# -- serialization ----------------------------------------------------------
# Floats are written with repr(), which is the shortest string that
# round-trips to the same double.


def _fmt(v: float) -> str:
    return repr(float(v))


def _is_jsonl(path) -> bool:
    return str(path).endswith((".jsonl", ".ndjson"))


def write_dataset(ds: Dataset, path) -> None:
    """Write ``ds`` as CSV (``y,x,w_1..w_d``) or JSON lines (by extension)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(dumps_dataset(ds, jsonl=_is_jsonl(path)))


def dumps_dataset(ds: Dataset, jsonl: bool = False) -> str:
    buf = io.StringIO()
    if jsonl:
        for i in range(len(ds)):
            w = "[" + ", ".join(_fmt(v) for v in ds.w[i]) + "]"
            buf.write(f'{{"y": {_fmt(ds.y[i])}, "x": {int(ds.x[i])}, "w": {w}}}\n')
        return buf.getvalue()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["y", "x"] + [f"w_{j + 1}" for j in range(ds.dim)])
    for i in range(len(ds)):
        writer.writerow([_fmt(ds.y[i]), int(ds.x[i])] + [_fmt(v) for v in ds.w[i]])
    return buf.getvalue()


def read_dataset(path) -> Dataset:
    path = Path(path)
    text = path.read_text()
    if _is_jsonl(path):
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows:
            raise ValueError(f"{path}: no rows")
        return Dataset([r["w"] for r in rows], [r["x"] for r in rows], [r["y"] for r in rows])
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or header[:2] != ["y", "x"] or len(header) < 3:
        raise ValueError(f"{path}: expected header 'y,x,w_1,...'")
    rows = [r for r in reader if r]
    d = len(header) - 2
    if not rows:
        return Dataset(np.empty((0, d)), np.empty(0, dtype=np.int64), np.empty(0))
    arr = [[float(v) for v in r[2:]] for r in rows]
    return Dataset(arr, [int(r[1]) for r in rows], [float(r[0]) for r in rows])


def write_counterfactuals(cfs: Counterfactuals, path) -> None:
    """CSV ``y0,y1,w_1..w_d`` or JSON lines with keys ``y0``, ``y1``, ``w``."""
    path = Path(path)
    buf = io.StringIO()
    if _is_jsonl(path):
        for i in range(len(cfs)):
            w = "[" + ", ".join(_fmt(v) for v in cfs.w[i]) + "]"
            buf.write(f'{{"y0": {_fmt(cfs.y0[i])}, "y1": {_fmt(cfs.y1[i])}, "w": {w}}}\n')
    else:
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["y0", "y1"] + [f"w_{j + 1}" for j in range(cfs.dim)])
        for i in range(len(cfs)):
            writer.writerow([_fmt(cfs.y0[i]), _fmt(cfs.y1[i])] + [_fmt(v) for v in cfs.w[i]])
    with path.open("w", newline="") as fh:
        fh.write(buf.getvalue())


def read_counterfactuals(path) -> Counterfactuals:
    path = Path(path)
    text = path.read_text()
    if _is_jsonl(path):
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        return Counterfactuals([r["w"] for r in rows], [r["y0"] for r in rows], [r["y1"] for r in rows])
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or header[:2] != ["y0", "y1"]:
        raise ValueError(f"{path}: expected header 'y0,y1,w_1,...'")
    rows = [r for r in reader if r]
    return Counterfactuals(
        [[float(v) for v in r[2:]] for r in rows],
        [float(r[0]) for r in rows],
        [float(r[1]) for r in rows],
    )
