"""Per-frame similarity distributions over a video.

Three row-stochastic N x N matrices are built here: a semantic
distribution from an exponential kernel over cosine similarity, a
temporal distribution from a decaying window kernel, and their per-frame
convex combination. Every row is a PDF over frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data_io import FeatureMatrix

ROW_SUM_TOL = 1e-9


class ZeroNormRowError(ValueError):
    """Cosine similarity is undefined for a zero-norm feature row."""


@dataclass(frozen=True)
class AffinityMatrix:
    """N x N matrix whose rows are probability distributions over frames."""

    rows: np.ndarray
    kind: str  # "semantic" | "temporal" | "combined"

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1]:
            raise ValueError(f"affinity matrix must be square, got shape {rows.shape}")
        if self.kind not in ("semantic", "temporal", "combined"):
            raise ValueError(f"unknown affinity kind {self.kind!r}")
        if rows.min() < 0:
            raise ValueError("affinity entries must be non-negative")
        sums = rows.sum(axis=1)
        if np.max(np.abs(sums - 1.0)) > ROW_SUM_TOL:
            worst = int(np.argmax(np.abs(sums - 1.0)))
            raise ValueError(f"row {worst} sums to {sums[worst]!r}, not 1")
        if self.kind == "combined" and rows.min() <= 0:
            raise ValueError("combined distribution must be strictly positive")
        object.__setattr__(self, "rows", rows)

    @property
    def size(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class TemporalKernel:
    """Decaying temporal weight w(d) = -1 + 2 exp(-d / beta).

    beta = L / (2 ln 2) so that the weight crosses zero exactly at
    distance L/2; beyond that frames are considered unrelated.
    """

    L: int

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("window length L must be a positive integer")

    @property
    def beta(self) -> float:
        return self.L / (2.0 * math.log(2.0))


def temporal_weight(d, kernel: TemporalKernel):
    """Evaluate w(d) = -1 + 2 exp(-d/beta); vectorized over d >= 0."""
    d = np.asarray(d, dtype=np.float64)
    if np.any(d < 0):
        raise ValueError("temporal distance must be non-negative")
    w = -1.0 + 2.0 * np.exp(-d / kernel.beta)
    return float(w) if w.ndim == 0 else w


def _unit_rows(values: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(values, axis=1)
    if np.any(norms == 0):
        i = int(np.argwhere(norms == 0)[0][0])
        raise ZeroNormRowError(f"feature row {i} has zero norm; cosine similarity undefined")
    return values / norms[:, None]


def cosine_similarity_matrix(values: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity of matrix rows."""
    unit = _unit_rows(np.asarray(values, dtype=np.float64))
    return unit @ unit.T


def semantic_kernel(values: np.ndarray, h: float, literal_distance: bool = False) -> np.ndarray:
    """Unnormalized semantic weights exp(-(1 - cos_sim)/h).

    ``literal_distance=True`` plugs the cosine *distance* into the same
    exponent (exp(-cos_sim/h)), which rewards dissimilar pairs; it exists
    only for ablation of that reading.
    """
    sims = cosine_similarity_matrix(values)
    if literal_distance:
        return np.exp(-sims / h)
    return np.exp((sims - 1.0) / h)


def semantic_distribution(
    m: FeatureMatrix | np.ndarray, h: float, literal_distance: bool = False
) -> AffinityMatrix:
    """Row-normalized exponential kernel over pairwise cosine similarity."""
    if h <= 0:
        raise ValueError("bandwidth h must be positive")
    values = m.values if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=np.float64)
    weights = semantic_kernel(values, h, literal_distance=literal_distance)
    rows = weights / weights.sum(axis=1, keepdims=True)
    return AffinityMatrix(rows, kind="semantic")


def temporal_distribution(
    n_frames: int, kernel: TemporalKernel, positions: np.ndarray | None = None
) -> AffinityMatrix:
    """Row-normalized clipped temporal kernel over frame distance.

    Negative weights (distances beyond L/2) are clipped to zero before
    normalization so that each row remains a PDF; the diagonal weight
    w(0) = 1 keeps every row normalizable.

    ``positions`` supplies the original frame indices when the rows of
    the accompanying feature matrix are a subsequence of a longer video
    (distances are then measured in original frame units).
    """
    if n_frames < 2:
        raise ValueError("need at least 2 frames")
    if positions is None:
        positions = np.arange(n_frames, dtype=np.float64)
    else:
        positions = np.asarray(positions, dtype=np.float64)
        if positions.shape != (n_frames,):
            raise ValueError("positions must have one entry per frame")
    dist = np.abs(positions[:, None] - positions[None, :])
    weights = np.maximum(temporal_weight(dist, kernel), 0.0)
    rows = weights / weights.sum(axis=1, keepdims=True)
    return AffinityMatrix(rows, kind="temporal")


def combine(
    fs: AffinityMatrix | np.ndarray,
    ft: AffinityMatrix | np.ndarray,
    alpha: np.ndarray,
    smoothing: float = 1e-8,
) -> AffinityMatrix:
    """Per-frame convex combination alpha*f_t + (1-alpha)*f_s, smoothed.

    ``smoothing`` is added to every entry (then rows renormalized) so the
    result has full support, which the KL divergence downstream requires.
    """
    rows = combined_rows(
        fs.rows if isinstance(fs, AffinityMatrix) else np.asarray(fs, dtype=np.float64),
        ft.rows if isinstance(ft, AffinityMatrix) else np.asarray(ft, dtype=np.float64),
        np.asarray(alpha, dtype=np.float64),
        smoothing,
    )
    return AffinityMatrix(rows, kind="combined")


def combined_rows(
    fs: np.ndarray, ft: np.ndarray, alpha: np.ndarray, smoothing: float
) -> np.ndarray:
    """Raw-array core of :func:`combine` (shared with the gradient engine)."""
    if fs.shape != ft.shape:
        raise ValueError(f"shape mismatch: semantic {fs.shape} vs temporal {ft.shape}")
    if alpha.shape != (fs.shape[0],):
        raise ValueError(f"alpha must have length {fs.shape[0]}, got shape {alpha.shape}")
    if alpha.min() < 0 or alpha.max() > 1:
        raise ValueError("alpha entries must lie in [0, 1]")
    if smoothing <= 0:
        raise ValueError("smoothing must be positive")
    mixed = alpha[:, None] * ft + (1.0 - alpha[:, None]) * fs
    smoothed = mixed + smoothing
    return smoothed / smoothed.sum(axis=1, keepdims=True)
