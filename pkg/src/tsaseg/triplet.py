"""Anchor downsampling and triplet selection from a combined affinity matrix.

Anchors come from stochastic pooling: the video is cut into contiguous
windows of ``batch_size`` frames and one representative is drawn per
window, by default with probability proportional to the frame's
self-affinity. Positives are the top fraction of an anchor's affinity
row; negatives sit in the one-standard-deviation band above the row mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .similarity import AffinityMatrix


@dataclass(frozen=True)
class DownsampleSet:
    """Strictly increasing frame indices, one per pooling window."""

    indices: np.ndarray

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=np.int64)
        if indices.ndim != 1 or indices.size == 0:
            raise ValueError("downsample set must be a non-empty 1-D index list")
        if np.any(np.diff(indices) <= 0):
            raise ValueError("indices must be strictly increasing")
        object.__setattr__(self, "indices", indices)

    def __len__(self) -> int:
        return int(self.indices.size)


@dataclass(frozen=True)
class Triplet:
    anchor: int
    positive: int
    negative: int

    def __post_init__(self):
        if len({self.anchor, self.positive, self.negative}) != 3:
            raise ValueError("anchor, positive and negative must be pairwise distinct")


def _rows(f_ts: AffinityMatrix | np.ndarray) -> np.ndarray:
    return f_ts.rows if isinstance(f_ts, AffinityMatrix) else np.asarray(f_ts, dtype=np.float64)


def stochastic_pool(
    f_ts: AffinityMatrix | np.ndarray,
    batch_size: int,
    rng: np.random.Generator,
    mode: str = "self_affinity",
) -> DownsampleSet:
    """Pick one representative frame per contiguous window of ``batch_size``.

    ``mode='self_affinity'`` samples within each window with probability
    proportional to the row's diagonal entry; ``mode='uniform'`` samples
    uniformly. The last window may be shorter. Deterministic under rng.
    """
    rows = _rows(f_ts)
    n = rows.shape[0]
    if not 1 <= batch_size <= n:
        raise ValueError(f"batch_size must lie in [1, {n}], got {batch_size}")
    if mode not in ("self_affinity", "uniform"):
        raise ValueError(f"unknown pooling mode {mode!r}")
    diag = np.diag(rows)
    picks = []
    for start in range(0, n, batch_size):
        window = np.arange(start, min(start + batch_size, n))
        if mode == "self_affinity" and diag[window].sum() > 0:
            probs = diag[window] / diag[window].sum()
            picks.append(int(rng.choice(window, p=probs)))
        else:
            picks.append(int(rng.choice(window)))
    return DownsampleSet(np.array(picks, dtype=np.int64))


def positive_set(
    f_ts: AffinityMatrix | np.ndarray, anchor: int, fraction: float = 0.05
) -> np.ndarray:
    """Indices of the ceil(fraction * N) highest-affinity frames in the anchor row.

    Ties break toward smaller temporal distance, then smaller index. The
    anchor itself is excluded; the count is capped so at least one frame
    stays available as a negative candidate.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    rows = _rows(f_ts)
    n = rows.shape[0]
    count = math.ceil(fraction * n)
    count = max(1, min(count, n - 2 if n > 2 else 1))
    candidates = np.array([j for j in range(n) if j != anchor])
    order = sorted(
        candidates,
        key=lambda j: (-rows[anchor, j], abs(j - anchor), j),
    )
    return np.array(sorted(order[:count]), dtype=np.int64)


def negative_set(
    f_ts: AffinityMatrix | np.ndarray,
    anchor: int,
    exclude: np.ndarray | None = None,
) -> np.ndarray:
    """Indices whose anchor-row affinity lies in [mean, mean + std].

    Statistics are taken over the anchor row with the diagonal excluded
    (the self-affinity would inflate both). ``exclude`` removes the
    positive set so positives and negatives never overlap. If the band
    is empty the single frame closest to the mean is returned.
    """
    rows = _rows(f_ts)
    n = rows.shape[0]
    excluded = set() if exclude is None else set(int(j) for j in exclude)
    off_diag = np.array([rows[anchor, j] for j in range(n) if j != anchor])
    mean = off_diag.mean()
    std = off_diag.std()
    candidates = [j for j in range(n) if j != anchor and j not in excluded]
    if not candidates:
        raise ValueError("no negative candidates remain outside the positive set")
    band = [j for j in candidates if mean <= rows[anchor, j] <= mean + std]
    if band:
        return np.array(band, dtype=np.int64)
    fallback = min(candidates, key=lambda j: (abs(rows[anchor, j] - mean), abs(j - anchor), j))
    return np.array([fallback], dtype=np.int64)


def sample_triplets(
    f_ts: AffinityMatrix | np.ndarray,
    pool: DownsampleSet,
    rng: np.random.Generator,
    per_anchor: int = 1,
    fraction: float = 0.05,
) -> list[Triplet]:
    """Draw ``per_anchor`` (positive, negative) pairs for every pooled anchor.

    Each anchor gets a child generator spawned from ``rng`` so that the
    outcome does not depend on anchor processing order.
    """
    if per_anchor < 1:
        raise ValueError("per_anchor must be a positive integer")
    rows = _rows(f_ts)
    children = rng.spawn(len(pool))
    triplets: list[Triplet] = []
    for anchor, child in zip(pool.indices.tolist(), children):
        positives = positive_set(rows, anchor, fraction)
        negatives = negative_set(rows, anchor, exclude=positives)
        for _ in range(per_anchor):
            pos = int(child.choice(positives))
            neg = int(child.choice(negatives))
            triplets.append(Triplet(anchor, pos, neg))
    return triplets
