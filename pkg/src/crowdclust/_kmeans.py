"""Seeded Lloyd k-means with k-means++ seeding.

Used both to generate base clusterings and to discretize spectral
embeddings, so it has to be bit-reproducible from a numpy Generator.
"""

from __future__ import annotations

import numpy as np


def _sq_dists(X, centers, x_sq):
    d = x_sq[:, None] - 2.0 * (X @ centers.T) + np.einsum("ij,ij->i", centers, centers)[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def kmeans_plusplus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    x_sq = np.einsum("ij,ij->i", X, X)
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = _sq_dists(X, centers[:1], x_sq)[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            idx = int(rng.integers(n))
        centers[c] = X[idx]
        np.minimum(closest, _sq_dists(X, centers[c : c + 1], x_sq)[:, 0], out=closest)
    return centers


def lloyd(
    X: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray, float]:
    """One k-means run. Returns ``(labels, centers, inertia)``.

    Stops when inertia improves by no more than ``tol`` relative to the
    previous iteration. An empty cluster is re-seeded with the point farthest
    from its current center, so every label in ``[0, k)`` is used whenever
    ``k <= len(X)``, duplicate rows included.
    """
    X = np.asarray(X, dtype=float)
    x_sq = np.einsum("ij,ij->i", X, X)
    centers = kmeans_plusplus(X, k, rng)
    prev = np.inf
    labels = np.zeros(X.shape[0], dtype=np.intp)
    inertia = np.inf
    for _ in range(max_iter):
        d = _sq_dists(X, centers, x_sq)
        labels = d.argmin(axis=1)
        point_cost = d[np.arange(X.shape[0]), labels]
        counts = np.bincount(labels, minlength=k)
        for c in np.flatnonzero(counts == 0):
            # never strip the last point of a cluster
            cost = np.where(counts[labels] > 1, point_cost, -1.0)
            far = int(cost.argmax())
            counts[labels[far]] -= 1
            labels[far] = c
            counts[c] = 1
            point_cost[far] = 0.0
        for c in range(k):
            centers[c] = X[labels == c].mean(axis=0) if counts[c] else centers[c]
        inertia = float(_sq_dists(X, centers, x_sq)[np.arange(X.shape[0]), labels].sum())
        if prev - inertia <= tol * prev:
            break
        prev = inertia
    return labels, centers, inertia


def best_of_restarts(
    X: np.ndarray, k: int, rng: np.random.Generator, n_init: int = 10, **kw
) -> tuple[np.ndarray, np.ndarray, float]:
    """Lowest-inertia run among ``n_init`` restarts; earlier restarts win ties."""
    best = None
    for _ in range(n_init):
        run = lloyd(X, k, rng, **kw)
        if best is None or run[2] < best[2]:
            best = run
    return best
