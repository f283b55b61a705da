"""Consensus by partitioning a multi-granularity bipartite graph.

The U side holds every instance followed by every cluster, the V side every
cluster. Instances link to the clusters containing them with weight
``alpha * influence(source)``; cluster copies link by SACT similarity. The
graph is split with a transfer cut: the spectral problem is solved on the
small V side only and the eigenvectors are carried over to U.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg
from sklearn.base import BaseEstimator, ClusterMixin

from ._kmeans import best_of_restarts
from ._validation import check_beta, check_ensemble, check_n_clusters
from .agreement import AgreementProfile, ncai
from .core import Ensemble, Partition, build_registry, partition_from_labels
from .exceptions import SpectralFailure
from .links import SactMatrix, sact

EPS = 1e-12
DENSE_LIMIT = 2000
EIG_TOL = 1e-10
EIG_MAXITER = 2000
NEG_TOL = -1e-10


@dataclass(frozen=True, eq=False)
class ConsensusGraph:
    """Bipartite graph with biadjacency ``links`` of shape ``(u_count, v_count)``.

    The first ``n_instances`` U rows are instances; any remaining U rows are
    cluster copies.
    """

    links: sp.csr_matrix
    n_instances: int
    alpha: float = 1.0
    beta: float = 0.0
    profile: AgreementProfile | None = None
    sact: SactMatrix | None = None

    @property
    def u_count(self) -> int:
        return self.links.shape[0]

    @property
    def v_count(self) -> int:
        return self.links.shape[1]

    def adjacency(self) -> sp.csr_matrix:
        """Full symmetric adjacency ``[[0, B], [B^T, 0]]``."""
        B = self.links
        return sp.bmat([[None, B], [B.T, None]], format="csr")


@dataclass(frozen=True, eq=False)
class TcutResult:
    u_labels: np.ndarray
    v_labels: np.ndarray
    eigenvalues: np.ndarray
    embedding: np.ndarray
    reduced_dim: int


def build_graph(
    ensemble: Ensemble,
    alpha: float = 0.5,
    beta: float = 2.0,
    sact_mode: str = "literal",
    profile: AgreementProfile | None = None,
) -> ConsensusGraph:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    beta = check_beta(beta)
    if profile is None:
        profile = ncai(ensemble, beta)
    registry = build_registry(ensemble)
    sim = sact(registry, profile, mode=sact_mode)
    n, n_c = ensemble.n, registry.n_clusters

    idx = registry.cluster_index()
    weights = alpha * profile.influence[registry.sources]
    rows = np.repeat(np.arange(n), idx.shape[1])
    cols = idx.ravel()
    vals = weights[cols]
    keep = vals > 0
    inst = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n_c))
    if sim.raw_max > 0:
        clus = sim.sim
    else:
        # no cluster pair is linked: leave the cluster copies unattached
        clus = sp.csr_matrix((n_c, n_c))
    links = sp.vstack([inst, clus], format="csr")
    links.eliminate_zeros()
    return ConsensusGraph(links, n, float(alpha), beta, profile, sim)


def _reduced_spectrum(B: sp.csr_matrix, k: int):
    d_u = np.asarray(B.sum(axis=1)).ravel() + EPS
    d_v = np.asarray(B.sum(axis=0)).ravel() + EPS
    W_v = (B.T @ sp.diags(1.0 / d_u) @ B).tocsr()
    scale = 1.0 / np.sqrt(d_v)
    M = sp.diags(scale) @ W_v @ sp.diags(scale)
    m = M.shape[0]
    try:
        if m <= DENSE_LIMIT:
            Md = M.toarray()
            Md = 0.5 * (Md + Md.T)
            mu, Y = scipy.linalg.eigh(Md)
            mu, Y = mu[::-1][:k], Y[:, ::-1][:, :k]
        else:
            mu, Y = scipy.sparse.linalg.eigsh(M, k=k, which="LA", tol=EIG_TOL, maxiter=EIG_MAXITER)
            order = np.argsort(-mu, kind="stable")
            mu, Y = mu[order], Y[:, order]
    except (np.linalg.LinAlgError, scipy.sparse.linalg.ArpackError) as exc:
        raise SpectralFailure(f"eigensolver failed on {m}x{m} reduced problem: {exc}") from exc
    lam = 1.0 - mu
    if not np.all(np.isfinite(lam)) or lam.min() < NEG_TOL:
        raise SpectralFailure(f"reduced eigenvalues out of range: {lam}")
    lam = np.maximum(lam, 0.0)
    f_v = Y * scale[:, None]
    # V-side eigenvector v lifts to U as D_U^-1 B v / (1 - gamma), where
    # lambda = gamma (2 - gamma); this reproduces the full-graph eigenvector.
    root = np.sqrt(np.clip(mu, 0.0, None))
    lift = np.where(root > 1e-8, 1.0 / np.maximum(root, 1e-8), 1.0)
    f_u = (sp.diags(1.0 / d_u) @ B @ f_v) * lift[None, :]
    gamma = 1.0 - root
    return gamma, lam, f_u, f_v, m


def _row_normalize(F):
    norms = np.linalg.norm(F, axis=1, keepdims=True)
    return np.divide(F, norms, out=np.zeros_like(F), where=norms > 0)


def tcut(graph: ConsensusGraph, k: int, random_state=0, n_init: int = 10) -> TcutResult:
    """Transfer-cut partition of all U and V nodes into ``k`` groups.

    k-means runs on the row-normalized embeddings of the instance nodes only;
    every other node joins its nearest centroid.
    """
    n = graph.n_instances
    k = check_n_clusters(k, n, min_k=1)
    if k > graph.v_count:
        raise SpectralFailure(f"k={k} exceeds the {graph.v_count} V-side nodes")
    gamma, lam, f_u, f_v, m = _reduced_spectrum(graph.links, k)
    return _discretize(graph, k, f_u, f_v, lam, m, random_state, n_init)


def _discretize(graph, k, f_u, f_v, lam, m, random_state, n_init):
    n = graph.n_instances
    emb_u = _row_normalize(f_u[:, :k])
    emb_v = _row_normalize(f_v[:, :k])
    rng = _as_rng(random_state)
    labels, centers, _ = best_of_restarts(emb_u[:n], k, rng, n_init=n_init)
    u_labels = np.empty(graph.u_count, dtype=np.intp)
    u_labels[:n] = labels
    if graph.u_count > n:
        u_labels[n:] = _nearest(emb_u[n:], centers)
    v_labels = _nearest(emb_v, centers)
    return TcutResult(u_labels, v_labels, lam[:k], np.vstack([emb_u, emb_v]), m)


def _nearest(X, centers):
    d = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d.argmin(axis=1)


def _as_rng(random_state) -> np.random.Generator:
    if isinstance(random_state, np.random.Generator):
        return random_state
    if random_state is None or isinstance(random_state, (int, np.integer)):
        return np.random.default_rng(random_state)
    raise ValueError(f"random_state must be None, an int or a Generator, got {random_state!r}")


def gpmgla(
    ensemble: Ensemble,
    k: int,
    alpha: float = 0.5,
    beta: float = 2.0,
    sact_mode: str = "literal",
    random_state=0,
) -> Partition:
    k = check_n_clusters(k, ensemble.n, min_k=2)
    graph = build_graph(ensemble, alpha, beta, sact_mode)
    return partition_from_labels(tcut(graph, k, random_state).u_labels[: ensemble.n])


def gpmgla_for_ks(
    ensemble: Ensemble,
    ks,
    alpha: float = 0.5,
    beta: float = 2.0,
    sact_mode: str = "literal",
    random_state=0,
) -> dict[int, Partition]:
    """Consensus at several cluster counts sharing one graph and eigensolve.

    ``k=1`` is answered with the trivial one-cluster partition.
    """
    ks = [check_n_clusters(k, ensemble.n, min_k=1) for k in ks]
    out = {}
    spectral = [k for k in ks if k >= 2]
    if spectral:
        graph = build_graph(ensemble, alpha, beta, sact_mode)
        kmax = min(max(spectral), graph.v_count)
        gamma, lam, f_u, f_v, m = _reduced_spectrum(graph.links, kmax)
        for k in spectral:
            if k > graph.v_count:
                raise SpectralFailure(f"k={k} exceeds the {graph.v_count} V-side nodes")
            res = _discretize(graph, k, f_u, f_v, lam, m, random_state, 10)
            out[k] = partition_from_labels(res.u_labels[: ensemble.n])
    for k in ks:
        if k == 1:
            out[k] = partition_from_labels(np.zeros(ensemble.n, dtype=int))
    return {k: out[k] for k in ks}


class GPMGLA(ClusterMixin, BaseEstimator):
    """Graph partitioning with multi-granularity link analysis.

    Parameters
    ----------
    n_clusters : int, default=2
    alpha : float, default=0.5
        Scale of the instance-to-cluster link weights.
    beta : float, default=2.0
        Exponent on the normalized crowd agreement.
    sact_mode : {"literal", "exclusive"}, default="literal"
        Whether the SACT sum over mediator clusters includes the pair itself.
    random_state : int, Generator or None, default=0
        Seed for the k-means step that discretizes the embedding.

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
    agreement_ : AgreementProfile
    sact_ : SactMatrix
    graph_ : ConsensusGraph
    eigenvalues_ : ndarray of shape (n_clusters,)
    embedding_ : ndarray of shape (u_count + v_count, n_clusters)
    cluster_node_labels_ : ndarray of shape (n_c,)
        Group of each V-side cluster node, for inspection.
    """

    def __init__(self, n_clusters=2, alpha=0.5, beta=2.0, sact_mode="literal", random_state=0):
        self.n_clusters = n_clusters
        self.alpha = alpha
        self.beta = beta
        self.sact_mode = sact_mode
        self.random_state = random_state

    def fit(self, X, y=None):
        ensemble = check_ensemble(X)
        k = check_n_clusters(self.n_clusters, ensemble.n, min_k=2)
        self.graph_ = build_graph(ensemble, self.alpha, self.beta, self.sact_mode)
        self.agreement_ = self.graph_.profile
        self.sact_ = self.graph_.sact
        result = tcut(self.graph_, k, self.random_state)
        self.eigenvalues_ = result.eigenvalues
        self.embedding_ = result.embedding
        self.cluster_node_labels_ = result.v_labels
        self.labels_ = partition_from_labels(result.u_labels[: ensemble.n]).labels.copy()
        return self
