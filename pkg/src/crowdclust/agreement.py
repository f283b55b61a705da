"""Clustering similarity (NMI) and crowd-agreement estimation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import Ensemble, Partition
from .exceptions import AllZeroAgreement, DimensionMismatch, InvalidIndex


@dataclass(frozen=True, eq=False)
class AgreementProfile:
    """Per-member agreement scores.

    Attributes
    ----------
    cai : ndarray of shape (M,)
        Mean NMI of each member against all the others.
    ncai : ndarray of shape (M,)
        ``cai`` divided by its maximum; the best-agreeing member gets 1.
    influence : ndarray of shape (M,)
        ``ncai ** beta`` with ``0 ** 0 == 1``.
    beta : float
    table : ndarray of shape (M, M)
        Pairwise NMI table with a zero diagonal.
    uniform_fallback : bool
        True when all CAI values were zero and uniform scores were used.
    """

    cai: np.ndarray
    ncai: np.ndarray
    influence: np.ndarray
    beta: float
    table: np.ndarray
    uniform_fallback: bool = False

    @property
    def weights(self) -> np.ndarray:
        """Influence normalized to sum to one."""
        return self.influence / self.influence.sum()


def _contingency(a: np.ndarray, ka: int, b: np.ndarray, kb: int) -> np.ndarray:
    return np.bincount(a * kb + b, minlength=ka * kb).reshape(ka, kb)


def nmi(p: Partition, q: Partition) -> float:
    """Normalized mutual information with geometric-mean normalization.

    Returns 0 when either partition has a single cluster, since its entropy
    is zero.
    """
    if p.n != q.n:
        raise DimensionMismatch(f"partitions cover {p.n} and {q.n} instances")
    if p.n_clusters < 2 or q.n_clusters < 2:
        return 0.0
    if (q.n_clusters, q.labels.tobytes()) < (p.n_clusters, p.labels.tobytes()):
        # fixed argument order makes the float result exactly symmetric
        p, q = q, p
    n = p.n
    table = _contingency(p.labels, p.n_clusters, q.labels, q.n_clusters).astype(float)
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    nz = table > 0
    nij = table[nz]
    outer = np.outer(rows, cols)[nz]
    mutual = float(np.sum(nij * np.log(nij * n / outer)))
    hp = float(np.sum(rows * np.log(rows / n)))
    hq = float(np.sum(cols * np.log(cols / n)))
    value = mutual / np.sqrt(hp * hq)
    return float(min(max(value, 0.0), 1.0))


def nmi_table(ensemble: Ensemble) -> np.ndarray:
    """Symmetric ``(M, M)`` NMI table; each unordered pair evaluated once."""
    M = ensemble.M
    table = np.zeros((M, M))
    for i in range(M):
        for j in range(i + 1, M):
            table[i, j] = table[j, i] = nmi(ensemble[i], ensemble[j])
    return table


def cai(ensemble: Ensemble, i: int) -> float:
    M = ensemble.M
    if not 0 <= i < M:
        raise InvalidIndex(f"member index {i} out of range for M={M}")
    total = sum(nmi(ensemble[i], ensemble[j]) for j in range(M) if j != i)
    return total / (M - 1)


def _power(x: np.ndarray, beta: float) -> np.ndarray:
    if beta == 0:
        return np.ones_like(x)
    return np.power(x, beta)


def ncai(ensemble: Ensemble, beta: float = 2.0) -> AgreementProfile:
    """Crowd agreement profile of an ensemble.

    When every pairwise NMI is zero the normalization is undefined; an
    :class:`AllZeroAgreement` warning is emitted and all members get
    ``ncai = influence = 1``.
    """
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    M = ensemble.M
    table = nmi_table(ensemble)
    cai_values = table.sum(axis=1) / (M - 1)
    top = cai_values.max()
    if top <= 0:
        warnings.warn(
            "all crowd agreement values are zero; using uniform member weights",
            AllZeroAgreement,
            stacklevel=2,
        )
        ones = np.ones(M)
        return AgreementProfile(cai_values, ones, ones.copy(), float(beta), table, True)
    normalized = cai_values / top
    return AgreementProfile(cai_values, normalized, _power(normalized, beta), float(beta), table)
