"""Candidate screening in latent space.

Points are projected onto their top two principal components; screening
then ranks candidates by mean Euclidean distance to the k nearest training
points (standard mode) or by the bilateral distance differential between
positive and negative training sets with an exact rank-test significance
gate (avoidance mode).  All functions accept coordinates of any dimension,
so callers choose between the projected plane and the full latent space.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

EXACT_TEST_LIMIT = 500_000  # max C(n+m, n) arrangements enumerated


@dataclass
class ProjectedSpace:
    mean: np.ndarray
    axes: np.ndarray  # (2, d), orthonormal rows
    variances: tuple[float, float]
    rank_deficient: bool

    def project(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.mean) @ self.axes.T


def pca2(points: np.ndarray) -> ProjectedSpace:
    """Top-2 principal axes from the exact covariance eigendecomposition.

    Covariance uses the n-1 divisor.  Each axis is flipped so its largest-
    magnitude loading is positive.  When fewer than two eigenvalues are
    positive the remaining axis is a deterministic null-space vector and
    the result is flagged rank-deficient.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise DataError("projection needs at least 3 points")
    if pts.shape[1] < 2:
        raise DataError("projection needs dimension >= 2")
    mean = pts.mean(axis=0)
    centered = pts - mean
    cov = centered.T @ centered / (pts.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    axes = eigvecs[:, order[:2]].T.copy()
    for row in axes:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    tol = max(eigvals[0], 1.0) * 1e-12
    deficient = bool(np.sum(eigvals > tol) < 2)
    return ProjectedSpace(mean, axes, (float(eigvals[0]), float(eigvals[1])), deficient)


def _knn_distances(query: np.ndarray, reference: np.ndarray, k: int) -> np.ndarray:
    ref = np.asarray(reference, dtype=float)
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if ref.shape[0] < k:
        raise DataError(f"reference set has {ref.shape[0]} points, needs >= k={k}")
    dists = np.sqrt(((ref - np.asarray(query, dtype=float)) ** 2).sum(axis=1))
    order = np.argsort(dists, kind="stable")
    return dists[order[:k]]


def knn_mean_dist(query, reference, k: int) -> float:
    """Mean Euclidean distance from the query to its k nearest references."""
    return float(_knn_distances(query, reference, k).mean())


def mann_whitney_exact_less(x, y) -> float:
    """Exact one-sided rank-test p-value for 'x tends smaller than y'.

    The statistic counts pairs with x_i < y_j (ties half).  The p-value is
    the fraction of all C(n+m, n) relabelings of the pooled values whose
    statistic is at least the observed one, so it is exact under ties too.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = len(x), len(y)
    if n == 0 or m == 0:
        raise DataError("rank test needs non-empty samples")
    if math.comb(n + m, n) > EXACT_TEST_LIMIT:
        raise ConfigError(
            f"exact rank test over C({n + m}, {n}) arrangements is too large"
        )

    def statistic(a: np.ndarray, b: np.ndarray) -> float:
        diff = a[:, None] - b[None, :]
        return float((diff < 0).sum() + 0.5 * (diff == 0).sum())

    observed = statistic(x, y)
    pooled = np.concatenate([x, y])
    total = 0
    at_least = 0
    for combo in itertools.combinations(range(n + m), n):
        mask = np.zeros(n + m, dtype=bool)
        mask[list(combo)] = True
        u = statistic(pooled[mask], pooled[~mask])
        total += 1
        if u >= observed - 1e-12:
            at_least += 1
    return at_least / total


@dataclass(frozen=True)
class BilateralScore:
    index: int
    d_plus: float
    d_minus: float
    delta: float
    p_value: float
    accepted: bool


def select_standard(
    candidates: np.ndarray,
    training: np.ndarray,
    keep_fraction: float = 0.25,
    k: int = 5,
) -> tuple[list[int], np.ndarray]:
    """Rank candidates by mean k-NN distance to the training points and keep
    the closest ceil(keep_fraction * n); ties break by candidate index.

    Returns (kept indices in rank order, all candidate distances).
    """
    cands = np.asarray(candidates, dtype=float)
    if cands.ndim != 2 or cands.shape[0] == 0:
        raise DataError("no candidates to filter")
    if not 0 < keep_fraction <= 1:
        raise ConfigError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    dists = np.array([knn_mean_dist(c, training, k) for c in cands])
    order = sorted(range(len(dists)), key=lambda i: (dists[i], i))
    n_keep = math.ceil(keep_fraction * len(dists))
    return order[:n_keep], dists


def select_avoidance(
    candidates: np.ndarray,
    positives: np.ndarray,
    negatives: np.ndarray,
    k: int = 5,
    alpha: float = 0.05,
) -> tuple[list[int], list[BilateralScore]]:
    """Bilateral screening: keep candidates significantly closer to the
    positive set than to the negative set.

    A candidate passes when its mean distance to the k nearest positives is
    below the mean to the k nearest negatives AND the exact one-sided rank
    test on the two k-distance samples is significant at alpha.  Accepted
    candidates are ranked by ascending distance differential.

    Returns (accepted indices in rank order, scores for all candidates).
    """
    cands = np.asarray(candidates, dtype=float)
    if cands.ndim != 2 or cands.shape[0] == 0:
        raise DataError("no candidates to filter")
    if not 0 < alpha <= 1:
        raise ConfigError(f"alpha must be in (0, 1], got {alpha}")
    scores = []
    for i, c in enumerate(cands):
        near_pos = _knn_distances(c, positives, k)
        near_neg = _knn_distances(c, negatives, k)
        d_plus = float(near_pos.mean())
        d_minus = float(near_neg.mean())
        p = mann_whitney_exact_less(near_pos, near_neg)
        accepted = d_plus < d_minus and p < alpha
        scores.append(BilateralScore(i, d_plus, d_minus, d_plus - d_minus, p, accepted))
    ranked = sorted(
        (s.index for s in scores if s.accepted),
        key=lambda i: (scores[i].delta, i),
    )
    return ranked, scores
