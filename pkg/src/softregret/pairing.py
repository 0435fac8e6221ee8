"""Cross-action nearest neighbours.

For every example ``i`` the partner ``n(i)`` is the example with the other
action whose context is closest in Euclidean distance.  Squared distances
are accumulated feature by feature in a fixed order (:func:`squared_distances`)
and two candidates tie only when those sums are bitwise equal.  Ties are
broken uniformly at random with a stream keyed by ``(seed, i)``, so the
result does not depend on the search strategy or processing order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .core import Dataset, as_rng

__all__ = [
    "PairedIndex",
    "PairingError",
    "squared_distances",
    "pair_brute_force",
    "pair_accelerated",
    "pair",
    "save_pairs",
    "load_pairs",
]


class PairingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PairedIndex:
    partner: np.ndarray
    sq_distance: np.ndarray

    def __len__(self):
        return len(self.partner)

    def __eq__(self, other):
        if not isinstance(other, PairedIndex):
            return NotImplemented
        return np.array_equal(self.partner, other.partner)

    @property
    def distance(self) -> np.ndarray:
        return np.sqrt(self.sq_distance)


def squared_distances(point, others) -> np.ndarray:
    """``sum_j (others[:, j] - point[j])**2`` accumulated left to right."""
    others = np.asarray(others, dtype=np.float64)
    acc = np.zeros(others.shape[0])
    for j in range(others.shape[1]):
        diff = others[:, j] - point[j]
        acc = acc + diff * diff
    return acc


def _check(ds: Dataset):
    for a in (0, 1):
        if not np.any(ds.x == a):
            raise PairingError(f"action class {a} is empty; pairing impossible")


def _choose(candidates: np.ndarray, sq: np.ndarray, rng, i: int):
    """Pick among the minimum-distance candidates; ``candidates`` ascending."""
    best = sq.min()
    tied = candidates[sq == best]
    if len(tied) == 1:
        return int(tied[0]), best
    j = int(rng.generator("tie", i).integers(len(tied)))
    return int(tied[j]), best


def pair_brute_force(ds: Dataset, rng) -> PairedIndex:
    """Exhaustive O(n^2) pairing."""
    _check(ds)
    rng = as_rng(rng)
    n = len(ds)
    partner = np.empty(n, dtype=np.int64)
    sq_dist = np.empty(n)
    groups = {a: np.flatnonzero(ds.x != a) for a in (0, 1)}
    for i in range(n):
        cand = groups[int(ds.x[i])]
        sq = squared_distances(ds.w[i], ds.w[cand])
        partner[i], sq_dist[i] = _choose(cand, sq, rng, i)
    return PairedIndex(partner, sq_dist)


def pair_accelerated(ds: Dataset, rng) -> PairedIndex:
    """KD-tree pairing with the same result as :func:`pair_brute_force`.

    The tree yields the nearest distance; every point inside a slightly
    inflated ball around it is then rescored with :func:`squared_distances`
    so ties are detected on exactly the same numbers as the brute-force path.
    """
    _check(ds)
    rng = as_rng(rng)
    n = len(ds)
    partner = np.empty(n, dtype=np.int64)
    sq_dist = np.empty(n)
    for a in (0, 1):
        src = np.flatnonzero(ds.x == a)
        cand = np.flatnonzero(ds.x != a)
        tree = cKDTree(ds.w[cand])
        dist, _ = tree.query(ds.w[src], k=1)
        radius = dist * (1.0 + 1e-9) + 1e-12
        balls = tree.query_ball_point(ds.w[src], radius, return_sorted=True)
        for i, ball in zip(src, balls):
            local = cand[np.asarray(ball, dtype=np.int64)]
            sq = squared_distances(ds.w[i], ds.w[local])
            partner[i], sq_dist[i] = _choose(local, sq, rng, int(i))
    return PairedIndex(partner, sq_dist)


def pair(ds: Dataset, rng, method: str = "auto") -> PairedIndex:
    if method == "brute" or (method == "auto" and len(ds) <= 256):
        return pair_brute_force(ds, rng)
    return pair_accelerated(ds, rng)


def save_pairs(pairs: PairedIndex, ds: Dataset, path) -> None:
    """Cache partners next to the hash of the dataset they belong to."""
    payload = {"dataset_sha256": ds.content_hash(), "partner": pairs.partner.tolist()}
    Path(path).write_text(json.dumps(payload))


def load_pairs(path, ds: Dataset) -> PairedIndex | None:
    """Load a cached pairing, or ``None`` if it was computed for other data."""
    payload = json.loads(Path(path).read_text())
    if payload.get("dataset_sha256") != ds.content_hash():
        return None
    partner = np.asarray(payload["partner"], dtype=np.int64)
    if len(partner) != len(ds):
        return None
    sq = np.array([squared_distances(ds.w[i], ds.w[[j]])[0] for i, j in enumerate(partner)])
    return PairedIndex(partner, sq)
