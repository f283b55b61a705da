"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .core import Ensemble, Partition, partition_from_labels
from .exceptions import InvalidK

LINKAGES = ("average", "complete", "single")


def check_ensemble(X) -> Ensemble:
    """Coerce ``X`` into an :class:`Ensemble`.

    Accepts an Ensemble, a sequence of Partitions, or an array-like label
    matrix of shape ``(n_samples, n_members)`` with one base clustering per
    column.
    """
    if isinstance(X, Ensemble):
        return X
    if isinstance(X, (list, tuple)) and X and all(isinstance(p, Partition) for p in X):
        return Ensemble(tuple(X))
    labels = check_array(X, dtype=None, ensure_min_samples=1, ensure_min_features=2)
    if labels.dtype.kind not in "iuf":
        raise ValueError(f"label matrix must be numeric, got dtype {labels.dtype}")
    return Ensemble(tuple(partition_from_labels(labels[:, j]) for j in range(labels.shape[1])))


def check_n_clusters(k, n: int, min_k: int = 1) -> int:
    if isinstance(k, bool) or not isinstance(k, numbers.Integral):
        raise InvalidK(f"number of clusters must be an integer, got {k!r}")
    k = int(k)
    if not min_k <= k <= n:
        raise InvalidK(f"number of clusters must lie in [{min_k}, {n}], got {k}")
    return k


def check_linkage(kind: str) -> str:
    if kind not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}, got {kind!r}")
    return kind


def check_beta(beta) -> float:
    beta = float(beta)
    if not np.isfinite(beta) or beta < 0:
        raise ValueError(f"beta must be a finite non-negative number, got {beta}")
    return beta


def dense_bytes(n: int, itemsize: int = 8) -> int:
    return n * n * itemsize
