import numpy as np
import pytest
from hypothesis import given

from conftest import ensembles, label_vectors
from crowdclust import Ensemble, Partition, build_registry, partition_from_labels
from crowdclust.exceptions import DimensionMismatch, InvalidPartition


def test_relabel_dense():
    p = partition_from_labels([7, 7, 3, 3])
    assert p.labels.tolist() == [1, 1, 0, 0]
    assert p.n_clusters == 2


def test_single_cluster():
    p = partition_from_labels([5, 5, 5])
    assert p.labels.tolist() == [0, 0, 0] and p.n_clusters == 1


def test_sorted_raw_label_mapping():
    assert partition_from_labels([2, 0, 2, 9]).labels.tolist() == [1, 0, 1, 2]


def test_empty_rejected():
    with pytest.raises(InvalidPartition):
        partition_from_labels([])


def test_non_integer_rejected():
    with pytest.raises(InvalidPartition):
        partition_from_labels([0.5, 1.0])


def test_labels_read_only():
    p = partition_from_labels([0, 1, 1])
    with pytest.raises(ValueError):
        p.labels[0] = 1


def test_partition_rejects_gaps():
    with pytest.raises(InvalidPartition):
        Partition(np.array([0, 2, 2]), 3)


@given(label_vectors())
def test_idempotent(raw):
    p = partition_from_labels(raw)
    assert partition_from_labels(p.labels) == p


@given(label_vectors())
def test_co_membership_preserved(raw):
    lab = partition_from_labels(raw).labels
    raw = np.asarray(raw)
    assert np.array_equal(raw[:, None] == raw[None, :], lab[:, None] == lab[None, :])


def test_ensemble_needs_two_members():
    with pytest.raises(ValueError):
        Ensemble.from_labels([[0, 1]])


def test_ensemble_size_mismatch():
    with pytest.raises(DimensionMismatch):
        Ensemble.from_labels([[0, 1], [0, 1, 1]])


def test_registry_counts():
    e = Ensemble.from_labels([[0, 0, 1, 1, 1], [0, 1, 2, 2, 2]])
    reg = build_registry(e)
    assert reg.n_clusters == 5
    assert list(reg.offsets) == [0, 2]


def test_registry_identical_members():
    e = Ensemble.from_labels([[0, 1, 2, 0]] * 4)
    assert build_registry(e).n_clusters == 12


def test_registry_enumeration():
    reg = build_registry(Ensemble.from_labels([[0, 0, 1, 1], [0, 0, 0, 1]]))
    assert [c.tolist() for c in reg.clusters] == [[0, 1], [2, 3], [0, 1, 2], [3]]
    assert list(reg.sources) == [0, 0, 1, 1]


@given(ensembles())
def test_registry_sources_partition_instances(rows):
    e = Ensemble.from_labels(rows)
    reg = build_registry(e)
    for s in range(e.M):
        sets = [set(c.tolist()) for c, src in zip(reg.clusters, reg.sources) if src == s]
        assert sum(len(x) for x in sets) == e.n
        assert set().union(*sets) == set(range(e.n))
    H = reg.incidence().toarray()
    assert np.all(H.sum(axis=1) == e.M)
