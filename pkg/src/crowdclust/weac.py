"""Weighted evidence accumulation clustering.

Each base clustering contributes a binary co-membership matrix; members are
weighted by their crowd-agreement influence and the weighted co-association
matrix is cut with a greedy agglomerative linkage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from ._validation import (
    check_beta,
    check_ensemble,
    check_linkage,
    check_n_clusters,
    dense_bytes,
)
from .agreement import AgreementProfile, ncai
from .core import Ensemble, Partition, partition_from_labels
from .exceptions import MemoryGuardError

TIE_TOL = 1e-12
DEFAULT_MEMORY_LIMIT = 2 * 1024**3

_KIND_CODES = {"single": 0, "complete": 1, "average": 2}


@dataclass(frozen=True, eq=False)
class CoAssociationMatrix:
    values: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]


def member_similarity(p: Partition) -> np.ndarray:
    """Dense binary co-membership matrix of one partition.

    The consensus code never calls this; it exists for inspection and tests.
    """
    return (p.labels[:, None] == p.labels[None, :]).astype(float)


def weighted_coassociation(
    ensemble: Ensemble,
    beta: float = 2.0,
    profile: AgreementProfile | None = None,
    memory_limit: int | None = DEFAULT_MEMORY_LIMIT,
) -> CoAssociationMatrix:
    """Influence-weighted co-association matrix.

    Entries are accumulated as ``sum_l influence_l * S^l`` and divided once by
    ``sum_l influence_l``. With ``beta=0`` every influence is 1, so the result
    is bit-for-bit the plain average of the member similarity matrices.
    """
    beta = check_beta(beta)
    n = ensemble.n
    if memory_limit is not None and dense_bytes(n) > memory_limit:
        raise MemoryGuardError(
            f"co-association matrix for n={n} needs {dense_bytes(n)} bytes, "
            f"limit is {memory_limit}"
        )
    if profile is None:
        profile = ncai(ensemble, beta)
    influence = profile.influence
    values = np.zeros((n, n))
    for member, w in zip(ensemble.members, influence):
        if w == 0:
            continue
        lab = member.labels
        np.add(values, w, out=values, where=lab[:, None] == lab[None, :])
    values /= influence.sum()
    return CoAssociationMatrix(values=values, weights=influence / influence.sum())


@numba.njit(cache=True)
def _compact(S, keep):
    m = keep.shape[0]
    out = np.empty((m, m))
    for r in range(m):
        row = S[keep[r]]
        for c in range(m):
            out[r, c] = row[keep[c]]
    return out


@numba.njit(cache=True)
def _merge_kernel(S, kind, tol):
    n = S.shape[0]
    ids = np.arange(n)
    sizes = np.ones(n)
    active = np.ones(n, dtype=np.bool_)
    nn = np.empty(n)
    for i in range(n):
        S[i, i] = -np.inf
    for i in range(n):
        nn[i] = S[i].max() if n > 1 else -np.inf
    left = np.empty(n - 1, dtype=np.int64)
    right = np.empty(n - 1, dtype=np.int64)
    height = np.empty(n - 1)
    stale = np.zeros(n, dtype=np.bool_)
    m = n
    live = n
    for step in range(n - 1):
        if live <= m // 2 and m > 64:
            # shrink to the live clusters; local order still follows instance ids
            keep = np.flatnonzero(active[:m])
            S = _compact(S, keep)
            ids = ids[keep]
            sizes = sizes[keep]
            nn = nn[keep]
            m = live
            active = np.ones(m, dtype=np.bool_)
            stale = np.zeros(m, dtype=np.bool_)
        best = -np.inf
        for i in range(m):
            if active[i] and nn[i] > best:
                best = nn[i]
        thr = best - tol
        a = -1
        for i in range(m):
            if active[i] and nn[i] >= thr:
                a = i
                break
        b = -1
        for j in range(a + 1, m):
            if active[j] and S[a, j] >= thr:
                b = j
                break
        left[step] = ids[a]
        right[step] = ids[b]
        height[step] = S[a, b]
        sa = sizes[a]
        sb = sizes[b]
        active[b] = False
        live -= 1
        for j in range(m):
            if not active[j] or j == a:
                continue
            old_a = S[a, j]
            old_b = S[b, j]
            if kind == 0:
                new = max(old_a, old_b)
            elif kind == 1:
                new = min(old_a, old_b)
            else:
                new = (sa * old_a + sb * old_b) / (sa + sb)
            S[a, j] = new
            S[j, a] = new
            if new >= nn[j]:
                nn[j] = new
            elif old_a >= nn[j] or old_b >= nn[j]:
                stale[j] = True
        sizes[a] = sa + sb
        nn[b] = -np.inf
        stale[a] = True
        for j in range(m):
            if stale[j]:
                # column b is left in place; the live mask hides it
                top = -np.inf
                row = S[j]
                for c in range(m):
                    if active[c] and c != j and row[c] > top:
                        top = row[c]
                nn[j] = top
                stale[j] = False
    return left, right, height


@dataclass(frozen=True, eq=False)
class LinkageTree:
    """Merge history of a greedy agglomeration.

    Step ``s`` merged the clusters represented by ``left[s] < right[s]`` at
    similarity ``heights[s]``; the merged cluster keeps the id ``left[s]``,
    which is always the smallest instance id it contains.
    """

    left: np.ndarray
    right: np.ndarray
    heights: np.ndarray
    kind: str
    n: int

    def cut(self, k: int) -> Partition:
        """Partition obtained after the first ``n - k`` merges."""
        k = check_n_clusters(k, self.n)
        parent = np.arange(self.n)
        steps = self.n - k
        parent[self.right[:steps]] = self.left[:steps]
        root = parent.copy()
        while True:
            nxt = parent[root]
            if np.array_equal(nxt, root):
                break
            root = nxt
        return partition_from_labels(root)


def linkage_tree(
    matrix: CoAssociationMatrix | np.ndarray, linkage: str = "average"
) -> LinkageTree:
    """Greedy agglomeration on a similarity matrix, merging the most similar pair first.

    Pairs whose similarity lies within ``1e-12`` of the maximum are tied; the
    tie goes to the lexicographically smallest ``(min id, max id)`` pair.
    Cluster-to-cluster similarity is the max (single), min (complete) or
    size-weighted mean (average) of the merged clusters' similarities.
    """
    linkage = check_linkage(linkage)
    values = matrix.values if isinstance(matrix, CoAssociationMatrix) else np.asarray(matrix)
    if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("similarity matrix contains non-finite values")
    if not np.array_equal(values, values.T):
        raise ValueError("similarity matrix must be symmetric")
    S = np.array(values, dtype=np.float64, order="C", copy=True)
    n = S.shape[0]
    if n == 1:
        empty = np.empty(0, dtype=np.int64)
        return LinkageTree(empty, empty, np.empty(0), linkage, 1)
    left, right, height = _merge_kernel(S, _KIND_CODES[linkage], TIE_TOL)
    return LinkageTree(left, right, height, linkage, n)


def agglomerate(
    matrix: CoAssociationMatrix | np.ndarray, linkage: str, k: int
) -> Partition:
    values = matrix.values if isinstance(matrix, CoAssociationMatrix) else np.asarray(matrix)
    check_n_clusters(k, values.shape[0])
    return linkage_tree(matrix, linkage).cut(k)


def weac(
    ensemble: Ensemble,
    beta: float = 2.0,
    linkage: str = "average",
    k: int = 2,
    memory_limit: int | None = DEFAULT_MEMORY_LIMIT,
) -> Partition:
    check_n_clusters(k, ensemble.n)
    A = weighted_coassociation(ensemble, beta, memory_limit=memory_limit)
    return agglomerate(A, linkage, k)


def eac(ensemble: Ensemble, linkage: str = "average", k: int = 2, **kw) -> Partition:
    """Unweighted evidence accumulation, i.e. WEAC with ``beta=0``."""
    return weac(ensemble, 0.0, linkage, k, **kw)


def weac_for_ks(
    ensemble: Ensemble,
    ks,
    beta: float = 2.0,
    linkage: str = "average",
    memory_limit: int | None = DEFAULT_MEMORY_LIMIT,
) -> dict[int, Partition]:
    """Consensus at several cluster counts from a single linkage tree."""
    ks = [check_n_clusters(k, ensemble.n) for k in ks]
    tree = linkage_tree(weighted_coassociation(ensemble, beta, memory_limit=memory_limit), linkage)
    return {k: tree.cut(k) for k in ks}


class WEAC(ClusterMixin, BaseEstimator):
    """Weighted evidence accumulation consensus clustering.

    Parameters
    ----------
    n_clusters : int, default=2
        Number of consensus clusters.
    beta : float, default=2.0
        Exponent applied to the normalized crowd agreement of each member.
        ``beta=0`` gives plain evidence accumulation.
    linkage : {"average", "complete", "single"}, default="average"
    memory_limit : int or None
        Byte cap on the dense ``n x n`` matrix; None disables the guard.

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
    agreement_ : AgreementProfile
    weights_ : ndarray of shape (n_members,)
    coassociation_ : CoAssociationMatrix
    tree_ : LinkageTree

    Notes
    -----
    ``fit`` takes a label matrix with one base clustering per column, not
    feature vectors.
    """

    def __init__(self, n_clusters=2, beta=2.0, linkage="average", memory_limit=DEFAULT_MEMORY_LIMIT):
        self.n_clusters = n_clusters
        self.beta = beta
        self.linkage = linkage
        self.memory_limit = memory_limit

    def fit(self, X, y=None):
        ensemble = check_ensemble(X)
        k = check_n_clusters(self.n_clusters, ensemble.n)
        beta = check_beta(self.beta)
        self.agreement_ = ncai(ensemble, beta)
        self.coassociation_ = weighted_coassociation(
            ensemble, beta, profile=self.agreement_, memory_limit=self.memory_limit
        )
        self.weights_ = self.coassociation_.weights
        self.tree_ = linkage_tree(self.coassociation_, self.linkage)
        self.labels_ = self.tree_.cut(k).labels.copy()
        return self
