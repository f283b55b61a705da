"""Partitions, ensembles and the flattened cluster registry."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .exceptions import DimensionMismatch, InvalidPartition


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Partition:
    """A hard clustering of ``n`` instances with dense 0-based labels.

    Build one with :func:`partition_from_labels` unless the labels are
    already canonical.
    """

    labels: np.ndarray
    n_clusters: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.size == 0:
            raise InvalidPartition("labels must be a non-empty 1-d sequence")
        if not np.issubdtype(labels.dtype, np.integer):
            raise InvalidPartition("labels must be integers")
        counts = np.bincount(labels, minlength=self.n_clusters) if labels.min() >= 0 else None
        if counts is None or counts.size != self.n_clusters or np.any(counts == 0):
            raise InvalidPartition(
                "labels must use every index in [0, n_clusters) at least once"
            )
        object.__setattr__(self, "labels", _frozen(labels.astype(np.intp, copy=True)))

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_clusters)

    def members(self) -> list[np.ndarray]:
        """Sorted instance ids of each cluster, in label order."""
        order = np.argsort(self.labels, kind="stable")
        bounds = np.cumsum(self.sizes())[:-1]
        return np.split(order, bounds)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.n_clusters == other.n_clusters and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash((self.n_clusters, self.labels.tobytes()))

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Partition(n={self.n}, n_clusters={self.n_clusters})"


def partition_from_labels(raw_labels: Sequence[int]) -> Partition:
    """Canonicalize arbitrary integer labels.

    Distinct raw labels are mapped to ``0..k-1`` in ascending raw-label order,
    so ``[2, 0, 2, 9]`` becomes ``[1, 0, 1, 2]``.
    """
    raw = np.asarray(raw_labels)
    if raw.ndim != 1 or raw.size == 0:
        raise InvalidPartition("raw_labels must be a non-empty 1-d sequence")
    if raw.dtype.kind == "f":
        if not np.all(np.isfinite(raw)) or np.any(raw != np.round(raw)):
            raise InvalidPartition("raw_labels must be integer valued")
        raw = raw.astype(np.int64)
    elif raw.dtype.kind not in "iub":
        raise InvalidPartition(f"raw_labels must be integers, got dtype {raw.dtype}")
    uniq, dense = np.unique(raw, return_inverse=True)
    return Partition(dense.reshape(-1), int(uniq.size))


@dataclass(frozen=True, eq=False)
class Ensemble:
    """An ordered collection of ``M >= 2`` partitions of the same ``n`` instances."""

    members: tuple[Partition, ...]
    n: int = field(init=False)

    def __post_init__(self):
        members = tuple(self.members)
        if len(members) < 2:
            raise InvalidPartition(f"an ensemble needs at least 2 members, got {len(members)}")
        for m in members:
            if not isinstance(m, Partition):
                raise TypeError("ensemble members must be Partition instances")
        sizes = {m.n for m in members}
        if len(sizes) != 1:
            raise DimensionMismatch(f"members disagree on instance count: {sorted(sizes)}")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "n", sizes.pop())

    @classmethod
    def from_labels(cls, label_sets) -> "Ensemble":
        """Build from an iterable of raw label sequences (one per member)."""
        return cls(tuple(partition_from_labels(l) for l in label_sets))

    @property
    def M(self) -> int:
        return len(self.members)

    def label_matrix(self) -> np.ndarray:
        """``(n, M)`` array whose column ``l`` holds member ``l``'s labels."""
        return np.column_stack([m.labels for m in self.members])

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def __repr__(self):
        return f"Ensemble(M={self.M}, n={self.n})"


@dataclass(frozen=True, eq=False)
class ClusterRegistry:
    """All clusters of an ensemble, listed member by member.

    ``clusters[c]`` is the sorted id array of cluster ``c``; ``sources[c]`` the
    index of the member that produced it; ``offsets[l]`` the position of member
    ``l``'s first cluster.
    """

    clusters: tuple[np.ndarray, ...]
    sources: np.ndarray
    offsets: np.ndarray
    n: int

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def sizes(self) -> np.ndarray:
        return np.array([c.size for c in self.clusters], dtype=np.intp)

    def incidence(self) -> sp.csr_matrix:
        """Binary ``(n, n_c)`` instance-by-cluster membership matrix."""
        rows = np.concatenate(self.clusters)
        cols = np.repeat(np.arange(self.n_clusters), self.sizes())
        data = np.ones(rows.size)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n_clusters))

    def cluster_index(self) -> np.ndarray:
        """``(n, M)`` array: global cluster id of each instance in each member."""
        M = self.offsets.size
        out = np.empty((self.n, M), dtype=np.intp)
        for c, ids in enumerate(self.clusters):
            out[ids, self.sources[c]] = c
        return out


def build_registry(ensemble: Ensemble) -> ClusterRegistry:
    clusters: list[np.ndarray] = []
    sources: list[int] = []
    offsets: list[int] = []
    for l, member in enumerate(ensemble.members):
        offsets.append(len(clusters))
        for ids in member.members():
            clusters.append(_frozen(ids.astype(np.intp)))
            sources.append(l)
    return ClusterRegistry(
        clusters=tuple(clusters),
        sources=_frozen(np.asarray(sources, dtype=np.intp)),
        offsets=_frozen(np.asarray(offsets, dtype=np.intp)),
        n=ensemble.n,
    )
