"""Cluster-level similarity: Jaccard overlap, neighbors and SACT."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .agreement import AgreementProfile
from .core import ClusterRegistry
from .exceptions import DimensionMismatch

SACT_MODES = ("literal", "exclusive")


@dataclass(frozen=True, eq=False)
class SactMatrix:
    """Normalized SACT similarity between all clusters of an ensemble.

    ``sim`` is a sparse symmetric ``(n_c, n_c)`` matrix with a unit diagonal.
    ``raw`` holds the unnormalized off-diagonal coefficients and ``raw_max``
    their maximum (0 means no two clusters are linked at all).
    """

    sim: sp.csr_matrix
    raw: sp.csr_matrix
    raw_max: float

    @property
    def n_clusters(self) -> int:
        return self.sim.shape[0]

    def toarray(self) -> np.ndarray:
        return self.sim.toarray()


def jaccard(ci, cj) -> float:
    a = set(int(x) for x in ci)
    b = set(int(x) for x in cj)
    union = len(a | b)
    if union == 0:
        raise ValueError("Jaccard coefficient of two empty sets is undefined")
    return len(a & b) / union


def jaccard_matrix(registry: ClusterRegistry) -> np.ndarray:
    """Dense ``(n_c, n_c)`` Jaccard coefficients between all clusters."""
    H = registry.incidence()
    inter = (H.T @ H).toarray()
    sizes = registry.sizes().astype(float)
    union = sizes[:, None] + sizes[None, :] - inter
    return inter / union


def neighbor_lists(registry: ClusterRegistry) -> list[np.ndarray]:
    """Sorted ids of the clusters intersecting each cluster (itself included).

    Uses the instance-to-cluster inverted index, so the cost is O(n M^2).
    """
    idx = registry.cluster_index()
    n_c = registry.n_clusters
    M = idx.shape[1]
    left = np.repeat(idx, M, axis=1).ravel()
    right = np.tile(idx, (1, M)).ravel()
    codes = np.unique(left * n_c + right)
    owners, others = np.divmod(codes, n_c)
    bounds = np.searchsorted(owners, np.arange(1, n_c))
    return np.split(others, bounds)


def sact(
    registry: ClusterRegistry,
    profile: AgreementProfile,
    mode: str = "literal",
) -> SactMatrix:
    """Source-aware connected-triple similarity.

    For every mediator cluster ``k`` the pair ``(i, j)`` receives
    ``influence[source(k)] * min(J(i, k), J(j, k))``; only common neighbors of
    ``i`` and ``j`` contribute, so the loop runs over each mediator's neighbor
    list. In ``"literal"`` mode ``k`` ranges over every cluster including
    ``i`` and ``j``; ``"exclusive"`` skips ``k in {i, j}``.
    """
    if mode not in SACT_MODES:
        raise ValueError(f"mode must be one of {SACT_MODES}, got {mode!r}")
    if profile.influence.size != registry.offsets.size:
        raise DimensionMismatch("agreement profile and registry have different M")
    n_c = registry.n_clusters
    J = jaccard_matrix(registry)
    infl = profile.influence[registry.sources]
    raw = np.zeros((n_c, n_c))
    for k, nb in enumerate(neighbor_lists(registry)):
        if infl[k] == 0:
            continue
        jk = J[nb, k]
        contrib = infl[k] * np.minimum.outer(jk, jk)
        if mode == "exclusive":
            pos = np.searchsorted(nb, k)
            contrib[pos, :] = 0.0
            contrib[:, pos] = 0.0
        raw[np.ix_(nb, nb)] += contrib
    np.fill_diagonal(raw, 0.0)
    raw_max = float(raw.max()) if n_c > 1 else 0.0
    if raw_max > 0:
        sim = raw / raw_max
    else:
        sim = np.zeros_like(raw)
    np.fill_diagonal(sim, 1.0)
    return SactMatrix(sim=sp.csr_matrix(sim), raw=sp.csr_matrix(raw), raw_max=raw_max)
