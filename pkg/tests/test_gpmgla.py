import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from sklearn.datasets import make_blobs

from conftest import ensembles, random_ensemble
from crowdclust import GPMGLA, Ensemble, build_graph, gpmgla, nmi, partition_from_labels, tcut
from crowdclust.exceptions import InvalidK
from crowdclust.generators import kmeans
from crowdclust.gpmgla import ConsensusGraph, _reduced_spectrum, gpmgla_for_ks
from oracles import full_graph_ncut, same_grouping

EXAMPLE = [[0, 0, 1, 1], [0, 0, 0, 1]]


def test_graph_shape_and_weights():
    e = Ensemble.from_labels(EXAMPLE)
    g = build_graph(e, alpha=0.5, beta=2.0)
    assert (g.u_count, g.v_count) == (4 + 4, 4)
    B = g.links.toarray()
    # both members agree equally, so each is a reference member
    assert B[0].tolist() == [0.5, 0.0, 0.5, 0.0]
    assert B[3].tolist() == [0.0, 0.5, 0.0, 0.5]
    assert np.allclose(B[4:], g.sact.toarray())


def test_reference_member_weight(rng):
    e = Ensemble.from_labels(random_ensemble(rng, 20, 4))
    g = build_graph(e, alpha=0.5, beta=2.0)
    ref = int(np.argmax(g.profile.ncai))
    B = g.links.toarray()
    start = sum(p.n_clusters for p in list(e)[:ref])
    for i in range(20):
        assert B[i, start + e[ref].labels[i]] == 0.5


@given(ensembles(), st.floats(0.1, 3.0), st.floats(0.0, 4.0))
def test_graph_invariants(rows, alpha, beta):
    e = Ensemble.from_labels(rows)
    g = build_graph(e, alpha, beta)
    B = g.links.toarray()
    assert B.min() >= 0
    assert np.all((B[: e.n] > 0).sum(axis=1) <= e.M)
    A = g.adjacency()
    assert (A != A.T).nnz == 0
    assert np.all(A.toarray()[: g.u_count, : g.u_count] == 0)


def test_identical_members_recovered():
    base = [0, 0, 0, 1, 1, 2, 2, 2, 2]
    e = Ensemble.from_labels([base] * 5)
    for alpha, beta in [(0.5, 2.0), (1.0, 0.0), (0.1, 4.0)]:
        assert same_grouping(gpmgla(e, 3, alpha, beta).labels, base)


def test_components_become_groups():
    e = Ensemble.from_labels([[0, 0, 1, 1, 2, 2], [0, 0, 1, 1, 2, 2]])
    res = tcut(build_graph(e), 3)
    assert same_grouping(res.u_labels[:6], [0, 0, 1, 1, 2, 2])
    assert np.all(res.eigenvalues >= 0) and np.all(np.diff(res.eigenvalues) >= 0)
    assert res.eigenvalues.max() < 1e-9


def test_reduced_dimension_is_cluster_count(rng):
    e = Ensemble.from_labels(random_ensemble(rng, 50, 4))
    g = build_graph(e)
    res = tcut(g, 3)
    assert res.reduced_dim == g.v_count == sum(p.n_clusters for p in e)


def _random_graph(rng):
    while True:
        u = int(rng.integers(3, 15))
        v = int(rng.integers(2, 21 - u))
        n_inst = int(rng.integers(2, u + 1))
        B = rng.random((u, v)) * (rng.random((u, v)) < 0.6)
        if B.sum(axis=1).min() > 0 and B.sum(axis=0).min() > 0:
            return B, n_inst


def test_tcut_matches_full_graph_oracle(rng):
    hits = 0
    for t in range(100):
        B, n_inst = _random_graph(rng)
        k = int(rng.integers(2, min(n_inst, B.shape[1], B.shape[0]) + 1))
        g = ConsensusGraph(sp.csr_matrix(B), n_inst)
        res = tcut(g, k, random_state=t)
        mine = np.concatenate([res.u_labels, res.v_labels])
        hits += same_grouping(mine, full_graph_ncut(B, n_inst, k, seed=t))
    assert hits >= 95


def test_lift_reproduces_full_graph_eigenvectors(rng):
    B, _ = _random_graph(rng)
    u, v = B.shape
    gamma, lam, f_u, f_v, m = _reduced_spectrum(sp.csr_matrix(B), 2)
    W = np.block([[np.zeros((u, u)), B], [B.T, np.zeros((v, v))]])
    d = W.sum(axis=1) + 1e-12
    f = np.concatenate([f_u[:, 1], f_v[:, 1]])
    L = np.diag(d) - W
    assert np.allclose(L @ f, gamma[1] * d * f, atol=1e-8)
    assert lam[1] == pytest.approx(gamma[1] * (2 - gamma[1]))


def test_blobs_recovered():
    hits = 0
    for t in range(100):
        X, y = make_blobs(n_samples=60, centers=[[-10, 0], [10, 0]], cluster_std=1.0, random_state=t)
        r = np.random.default_rng(t)
        e = Ensemble(tuple(kmeans(X, int(r.integers(2, 7)), int(r.integers(2**31))) for _ in range(5)))
        hits += nmi(gpmgla(e, 2, random_state=t), partition_from_labels(y)) == 1.0
    assert hits >= 95


def test_alpha_invariance_without_cluster_links():
    base = [0, 0, 1, 1, 2, 2, 3, 3]
    # two identical members: every mediator outside a twin pair is disjoint
    e = Ensemble.from_labels([base, [1, 1, 0, 0, 3, 3, 2, 2]])
    ref = build_graph(e, 1.0, 2.0, sact_mode="exclusive")
    assert ref.sact.raw_max == 0.0
    labels = [gpmgla(e, 2, alpha=a, sact_mode="exclusive").labels for a in (0.01, 1.0, 7.5)]
    assert all(np.array_equal(labels[0], x) for x in labels)


@given(ensembles(max_n=14), st.randoms(use_true_random=False))
def test_member_order_invariance(rows, rnd):
    e = Ensemble.from_labels(rows)
    k = min(2, e.n)
    shuffled = list(rows)
    rnd.shuffle(shuffled)
    shuffled = [[7 - x for x in r] for r in shuffled]
    a = tcut(build_graph(e), k, random_state=0)
    b = tcut(build_graph(Ensemble.from_labels(shuffled)), k, random_state=0)
    assert np.allclose(np.sort(a.eigenvalues), np.sort(b.eigenvalues), atol=1e-8)


def test_for_ks_matches_single(rng):
    e = Ensemble.from_labels(random_ensemble(rng, 40, 5, max_k=6))
    many = gpmgla_for_ks(e, [1, 2, 3, 4], random_state=3)
    assert many[1].n_clusters == 1
    for k in (2, 3, 4):
        assert many[k] == gpmgla(e, k, random_state=3)
        assert many[k].n_clusters == k


def test_bad_params():
    e = Ensemble.from_labels(EXAMPLE)
    with pytest.raises(InvalidK):
        gpmgla(e, 1)
    with pytest.raises(ValueError):
        build_graph(e, alpha=0.0)


def test_estimator(rng):
    labels = np.column_stack([rng.integers(0, 3, 30) for _ in range(4)])
    est = GPMGLA(n_clusters=3, alpha=0.5, random_state=1).fit(labels)
    assert est.labels_.shape == (30,) and len(set(est.labels_)) == 3
    assert est.embedding_.shape[1] == 3
    assert est.get_params()["alpha"] == 0.5
    assert np.array_equal(GPMGLA(n_clusters=3, random_state=1).fit_predict(labels), est.labels_)
