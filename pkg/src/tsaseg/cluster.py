"""Frame clustering: k-means, first-neighbor agglomeration, spectral, equal split.

All clusterers return a :class:`Segmentation` of per-frame integer
labels; downstream evaluation is invariant to label identity, so labels
are only consistent within one result. The spectral path runs on a
dense symmetric normalized Laplacian whose eigenpairs come from a
cyclic Jacobi sweep (desk-scale videos make dense O(N^3) acceptable).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_io import FeatureMatrix
from .similarity import ZeroNormRowError


@dataclass(frozen=True)
class Segmentation:
    """Per-frame labels in [0, k) plus the derived maximal runs."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("labels must be a non-empty 1-D sequence")
        if self.k < 1:
            raise ValueError("cluster count must be positive")
        if labels.min() < 0 or labels.max() >= self.k:
            raise ValueError(f"labels must lie in [0, {self.k})")
        object.__setattr__(self, "labels", labels)

    @property
    def n_frames(self) -> int:
        return int(self.labels.size)

    @property
    def segments(self) -> list[tuple[int, int, int]]:
        """Maximal constant runs as (start, end, label), end exclusive."""
        labels = self.labels
        out = []
        start = 0
        for i in range(1, labels.size + 1):
            if i == labels.size or labels[i] != labels[start]:
                out.append((start, i, int(labels[start])))
                start = i
        return out


def _values(m: FeatureMatrix | np.ndarray) -> np.ndarray:
    return m.values if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=np.float64)


# ---------------------------------------------------------------------------
# K-means
# ---------------------------------------------------------------------------


def _kmeans_pp_centers(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """D^2-weighted seeding."""
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    dist2 = ((x - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = dist2.sum()
        if total > 0:
            idx = rng.choice(n, p=dist2 / total)
        else:  # all remaining points coincide with chosen centers
            idx = rng.integers(n)
        centers[c] = x[idx]
        dist2 = np.minimum(dist2, ((x - centers[c]) ** 2).sum(axis=1))
    return centers


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int) -> tuple[np.ndarray, float]:
    k = centers.shape[0]
    prev_wcss = np.inf
    labels = np.zeros(x.shape[0], dtype=np.int64)
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        # refill empty clusters with the point farthest from its center
        for c in range(k):
            if not np.any(labels == c):
                farthest = int(np.argmax(d2[np.arange(x.shape[0]), labels]))
                labels[farthest] = c
                d2[farthest, :] = np.inf
                d2[farthest, c] = 0.0
        wcss = float(d2[np.arange(x.shape[0]), labels].sum())
        if not wcss <= prev_wcss + 1e-9 * (1.0 + abs(prev_wcss)):
            raise AssertionError(f"k-means objective increased: {prev_wcss} -> {wcss}")
        new_centers = centers.copy()
        for c in range(k):
            members = x[labels == c]
            if members.size:
                new_centers[c] = members.mean(axis=0)
        if np.array_equal(new_centers, centers):
            return labels, wcss
        centers = new_centers
        prev_wcss = wcss
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    return labels, float(d2[np.arange(x.shape[0]), labels].sum())


def kmeans(
    m: FeatureMatrix | np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iter: int = 300,
    restarts: int = 10,
) -> Segmentation:
    """Lloyd's algorithm with k-means++ seeding, best of ``restarts`` by WCSS."""
    x = _values(m)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if k == 1:
        return Segmentation(np.zeros(n, dtype=np.int64), 1)
    if k == n:
        return Segmentation(np.arange(n, dtype=np.int64), n)
    best_labels, best_wcss = None, np.inf
    for child in rng.spawn(restarts):
        centers = _kmeans_pp_centers(x, k, child)
        labels, wcss = _lloyd(x, centers, max_iter)
        if wcss < best_wcss:
            best_labels, best_wcss = labels, wcss
    return Segmentation(best_labels, k)


# ---------------------------------------------------------------------------
# First-integer-neighbor agglomeration
# ---------------------------------------------------------------------------


def _cosine_distance_matrix(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        i = int(np.argwhere(norms == 0)[0][0])
        raise ZeroNormRowError(f"row {i} has zero norm; cosine distance undefined")
    unit = x / norms[:, None]
    return 1.0 - unit @ unit.T


def _first_neighbor_partition(points: np.ndarray) -> np.ndarray:
    """Connected components of the first-nearest-neighbor graph (cosine)."""
    n = points.shape[0]
    dist = _cosine_distance_matrix(points)
    np.fill_diagonal(dist, np.inf)
    nn = np.argmin(dist, axis=1)
    # union-find over edges i-j with j = nn(i), i = nn(j), or nn(i) = nn(j)
    parent = np.arange(n)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for i in range(n):
        union(i, int(nn[i]))
    for i in range(n):
        for j in range(i + 1, n):
            if nn[i] == nn[j]:
                union(i, j)
    roots = np.array([find(i) for i in range(n)])
    _, labels = np.unique(roots, return_inverse=True)
    return labels


def _relabel_first_appearance(labels: np.ndarray) -> np.ndarray:
    mapping: dict[int, int] = {}
    out = np.empty_like(labels)
    for i, lab in enumerate(labels.tolist()):
        out[i] = mapping.setdefault(lab, len(mapping))
    return out


def _cluster_means(x: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    means = np.empty((k, x.shape[1]))
    for c in range(k):
        means[c] = x[labels == c].mean(axis=0)
    return means


def _merge_to_k(x: np.ndarray, labels: np.ndarray, target_k: int) -> np.ndarray:
    """Repeatedly merge the mutually-nearest pair of cluster means (cosine)."""
    labels = _relabel_first_appearance(labels)
    k = int(labels.max()) + 1
    while k > target_k:
        means = _cluster_means(x, labels, k)
        dist = _cosine_distance_matrix(means)
        np.fill_diagonal(dist, np.inf)
        a, b = np.unravel_index(np.argmin(dist), dist.shape)
        a, b = min(a, b), max(a, b)
        labels = np.where(labels == b, a, labels)
        labels = np.where(labels > b, labels - 1, labels)
        k -= 1
    return _relabel_first_appearance(labels)


def finch(
    m: FeatureMatrix | np.ndarray, required_k: int | None = None
) -> list[Segmentation] | Segmentation:
    """First-neighbor agglomerative clustering.

    Without ``required_k`` returns the partition hierarchy (coarsening
    levels, strictly decreasing cluster counts, down to one cluster).
    With ``required_k`` returns a single partition: the smallest level
    with at least that many clusters, merged down to exactly
    ``required_k`` by successive mutual-nearest-mean merges.
    """
    x = _values(m)
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least 2 frames")
    if required_k is not None and not 1 <= required_k <= n:
        raise ValueError(f"required_k must lie in [1, {n}], got {required_k}")
    if required_k == n:
        return Segmentation(np.arange(n, dtype=np.int64), n)

    levels: list[np.ndarray] = []
    labels = _relabel_first_appearance(_first_neighbor_partition(x))
    levels.append(labels)
    while int(labels.max()) + 1 > 1:
        k = int(labels.max()) + 1
        means = _cluster_means(x, labels, k)
        if k == 2:
            meta = np.zeros(2, dtype=np.int64)
        else:
            meta = _first_neighbor_partition(means)
        new_labels = _relabel_first_appearance(meta[labels])
        if int(new_labels.max()) + 1 >= k:
            break  # no further coarsening possible
        labels = new_labels
        levels.append(labels)

    if required_k is None:
        return [Segmentation(lv, int(lv.max()) + 1) for lv in levels]

    eligible = [lv for lv in levels if int(lv.max()) + 1 >= required_k]
    base = eligible[-1] if eligible else np.arange(n, dtype=np.int64)
    merged = _merge_to_k(x, base, required_k)
    return Segmentation(merged, required_k)


# ---------------------------------------------------------------------------
# Spectral clustering on the symmetric normalized Laplacian
# ---------------------------------------------------------------------------


def jacobi_eigh(
    a: np.ndarray, tol: float = 1e-10, max_sweeps: int = 60
) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, eigenvectors as columns). Converged
    when the off-diagonal Frobenius norm drops below ``tol``.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, atol=1e-12):
        raise ValueError("matrix must be symmetric")
    n = a.shape[0]
    A = a.copy()
    V = np.eye(n)

    def off_norm() -> float:
        off = A - np.diag(np.diag(A))
        return float(np.sqrt((off**2).sum()))

    for _ in range(max_sweeps):
        if off_norm() < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < tol / max(1, n):
                    continue
                # rotation angle annihilating A[p, q]
                theta = 0.5 * (A[q, q] - A[p, p]) / apq
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * A[:, p] - s * A[:, q]
                rot_q = s * A[:, p] + c * A[:, q]
                A[:, p], A[:, q] = rot_p, rot_q
                rot_p = c * A[p, :] - s * A[q, :]
                rot_q = s * A[p, :] + c * A[q, :]
                A[p, :], A[q, :] = rot_p, rot_q
                rot_p = c * V[:, p] - s * V[:, q]
                rot_q = s * V[:, p] + c * V[:, q]
                V[:, p], V[:, q] = rot_p, rot_q
    else:
        if off_norm() >= tol:
            raise ArithmeticError(f"Jacobi sweep did not converge below {tol}")
    order = np.argsort(np.diag(A), kind="stable")
    return np.diag(A)[order].copy(), V[:, order].copy()


def spectral(
    m: FeatureMatrix | np.ndarray,
    k: int,
    rng: np.random.Generator,
    affinity_smoothing: float = 1e-10,
) -> Segmentation:
    """Normalized spectral clustering with a Gaussian affinity.

    The bandwidth is the median pairwise Euclidean distance; the
    embedding uses the k smallest-eigenvalue eigenvectors of
    I - D^{-1/2} A D^{-1/2}, rows normalized to unit length, partitioned
    by k-means.
    """
    x = _values(m)
    n = x.shape[0]
    if not 2 <= k <= n:
        raise ValueError(f"k must lie in [2, {n}], got {k}")
    if k == n:
        return Segmentation(np.arange(n, dtype=np.int64), n)
    sq = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
    off = sq[~np.eye(n, dtype=bool)]
    bandwidth2 = float(np.median(off))
    if bandwidth2 <= 0:
        bandwidth2 = 1.0  # all points coincide; affinity becomes uniform
    affinity = np.exp(-sq / (2.0 * bandwidth2)) + affinity_smoothing
    degree = affinity.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(degree)
    laplacian = np.eye(n) - inv_sqrt[:, None] * affinity * inv_sqrt[None, :]
    laplacian = 0.5 * (laplacian + laplacian.T)
    _, vectors = jacobi_eigh(laplacian)
    embedding = vectors[:, :k]
    row_norms = np.linalg.norm(embedding, axis=1)
    row_norms[row_norms == 0] = 1.0
    embedding = embedding / row_norms[:, None]
    return kmeans(embedding, k, rng)


def equal_split(n_frames: int, k: int) -> Segmentation:
    """k contiguous segments of near-equal length, longer segments first."""
    if not 1 <= k <= n_frames:
        raise ValueError(f"k must lie in [1, {n_frames}], got {k}")
    base, extra = divmod(n_frames, k)
    labels = np.empty(n_frames, dtype=np.int64)
    pos = 0
    for c in range(k):
        length = base + (1 if c < extra else 0)
        labels[pos : pos + length] = c
        pos += length
    return Segmentation(labels, k)
