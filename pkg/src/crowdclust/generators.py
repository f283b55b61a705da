"""Base-clustering generators and seeded pool/ensemble sampling."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numba
import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array

from ._kmeans import lloyd
from .core import Ensemble, Partition, partition_from_labels
from .exceptions import InvalidK, InvalidSize, InvalidSpec

GENERATORS = ("kmeans", "rpcl")


def _key(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    return int(k)


def sub_rng(master: int, *keys) -> np.random.Generator:
    """Independent generator for ``(master, *keys)``.

    String keys are hashed with CRC32 so the stream does not depend on
    ``PYTHONHASHSEED``; adding a new purpose tag never shifts existing streams.
    """
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def sub_seed(master: int, *keys) -> int:
    return int(sub_rng(master, *keys).integers(2**63 - 1))


def standardize(X: np.ndarray) -> np.ndarray:
    """Z-score each column; constant columns become zero."""
    X = np.asarray(X, dtype=float)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - mu) / sd


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    true_labels: np.ndarray | None = None
    name: str = "dataset"

    def __post_init__(self):
        X = check_array(self.features, dtype=float, ensure_min_samples=2)
        X.setflags(write=False)
        object.__setattr__(self, "features", X)
        if self.true_labels is not None:
            y = partition_from_labels(self.true_labels).labels
            if y.shape[0] != X.shape[0]:
                raise ValueError(f"{y.shape[0]} labels for {X.shape[0]} rows")
            object.__setattr__(self, "true_labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int | None:
        return None if self.true_labels is None else int(self.true_labels.max()) + 1

    def truth(self) -> Partition | None:
        return None if self.true_labels is None else partition_from_labels(self.true_labels)

    def head(self, size: int) -> "Dataset":
        """The first ``size`` rows."""
        y = None if self.true_labels is None else self.true_labels[:size]
        return Dataset(self.features[:size], y, f"{self.name}[:{size}]")


def _features(data) -> np.ndarray:
    return data.features if isinstance(data, Dataset) else check_array(data, dtype=float)


def kmeans(data, k: int, seed: int) -> Partition:
    """Single-restart Lloyd k-means with k-means++ seeding."""
    X = _features(data)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise InvalidK(f"k must lie in [1, {n}], got {k}")
    labels, _, _ = lloyd(X, int(k), np.random.default_rng(seed))
    return partition_from_labels(labels)


@numba.njit(cache=True)
def _rpcl_kernel(X, units, order, lr, dlr):
    n, d = X.shape
    k = units.shape[0]
    wins = np.ones(k)
    last = np.zeros(k, dtype=np.int64)
    n_epochs = order.shape[0]
    dist = np.empty(k)
    for e in range(n_epochs):
        last[:] = 0
        for t in range(n):
            x = X[order[e, t]]
            total = wins.sum()
            for j in range(k):
                s = 0.0
                for f in range(d):
                    diff = x[f] - units[j, f]
                    s += diff * diff
                dist[j] = (wins[j] / total) * s
            c = 0
            for j in range(1, k):
                if dist[j] < dist[c]:
                    c = j
            r = -1
            for j in range(k):
                if j != c and (r < 0 or dist[j] < dist[r]):
                    r = j
            for f in range(d):
                units[c, f] += lr * (x[f] - units[c, f])
            if r >= 0:
                for f in range(d):
                    units[r, f] -= dlr * (x[f] - units[r, f])
            wins[c] += 1.0
            last[c] += 1
    return units, last


def rpcl_epochs(n: int) -> int:
    return int(min(50, max(1, math.ceil(math.sqrt(n)))))


def rpcl_fit(X, k_max, rng, learn_rate=0.05, delearn_rate=0.002, n_epochs=None):
    """Run rival penalized competitive learning.

    Returns ``(labels, surviving_centers, last_epoch_wins)``. Each step moves
    the frequency-sensitive winner toward the sample and pushes the runner-up
    away. Units winning fewer than ``n / (4 k_max)`` samples in the last epoch
    are pruned; samples then go to the nearest surviving unit.
    """
    X = np.ascontiguousarray(X, dtype=float)
    n = X.shape[0]
    k_max = int(min(k_max, n))
    if k_max < 1:
        raise InvalidK(f"k_max must be positive, got {k_max}")
    epochs = rpcl_epochs(n) if n_epochs is None else int(n_epochs)
    units = X[rng.choice(n, k_max, replace=False)].copy()
    order = np.stack([rng.permutation(n) for _ in range(epochs)]).astype(np.int64)
    units, wins = _rpcl_kernel(X, units, order, float(learn_rate), float(delearn_rate))
    keep = wins >= n / (4.0 * k_max)
    if not keep.any():
        keep[int(wins.argmax())] = True
    centers = units[keep]
    d = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d.argmin(axis=1), centers, wins


def rpcl(data, k_max: int, seed: int, learn_rate: float = 0.05, delearn_rate: float = 0.002) -> Partition:
    labels, _, _ = rpcl_fit(_features(data), k_max, np.random.default_rng(seed), learn_rate, delearn_rate)
    return partition_from_labels(labels)


def merge_clusters(p: Partition, rho: float, rng: np.random.Generator) -> tuple[Partition, int]:
    """Merge ``ceil(rho * k)`` randomly chosen clusters of ``p`` into one.

    The merge count is capped at ``k - 1`` so at least two clusters remain.
    Returns the merged partition and the number of clusters merged.
    """
    k = p.n_clusters
    count = min(math.ceil(round(rho * k, 9)), k - 1)
    if count < 2:
        return p, max(count, 0)
    chosen = rng.choice(k, size=count, replace=False)
    target = chosen.min()
    remap = np.arange(k)
    remap[chosen] = target
    return partition_from_labels(remap[p.labels]), count


def ill_clustering(data, seed: int) -> Partition:
    """A heavily imbalanced clustering built by over-merging a k-means result."""
    X = _features(data)
    n = X.shape[0]
    if n < 4:
        raise InvalidSize(f"ill clusterings need n >= 4, got {n}")
    rng = np.random.default_rng(seed)
    k = int(rng.integers(math.ceil(math.sqrt(n)), math.floor(2 * math.sqrt(n)) + 1))
    rho = float(rng.uniform(0.7, 0.99))
    base = kmeans(X, k, int(rng.integers(2**63 - 1)))
    merged, _ = merge_clusters(base, rho, rng)
    return merged


def random_k(rng: np.random.Generator, n: int) -> int:
    """Cluster count drawn uniformly from ``[2, floor(2 sqrt(n))]``."""
    hi = max(2, math.floor(2 * math.sqrt(n)))
    return int(rng.integers(2, hi + 1))


@dataclass(frozen=True, eq=False)
class Pool:
    partitions: tuple[Partition, ...]
    provenance: tuple[dict, ...]
    ill_flags: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        sizes = {p.n for p in self.partitions}
        if len(sizes) != 1:
            raise InvalidSize("pool partitions must share the instance count")
        object.__setattr__(self, "n", sizes.pop())

    def __len__(self):
        return len(self.partitions)

    def label_matrix(self) -> np.ndarray:
        return np.column_stack([p.labels for p in self.partitions])


def _pool_counts(counts) -> dict[str, int]:
    if not counts:
        raise InvalidSpec("pool spec must name at least one generator")
    out = {}
    for name, c in counts.items():
        if name not in GENERATORS:
            raise InvalidSpec(f"unknown generator {name!r}; expected one of {GENERATORS}")
        if int(c) < 0:
            raise InvalidSpec(f"generator count must be non-negative, got {c}")
        out[name] = int(c)
    if sum(out.values()) == 0:
        raise InvalidSpec("pool spec generates no clusterings")
    return out


def ill_count(ratio: float, size: int) -> int:
    # guard against 0.2 * 200 landing a hair above 40
    return int(math.ceil(round(ratio * size, 9)))


def build_pool(data, counts, ill_ratio: float = 0.0, seed: int = 0) -> Pool:
    """Generate a pool of base clusterings.

    ``counts`` maps generator names (``"kmeans"``, ``"rpcl"``) to how many
    clusterings each contributes; each draws its cluster count uniformly from
    ``[2, 2 sqrt(n)]``. Then ``ceil(ill_ratio * size)`` uniformly chosen
    entries are replaced by ill clusterings. Entry ``i`` of generator ``g`` is
    a pure function of ``(seed, g, i)``, so pools built with different
    ``ill_ratio`` share all their surviving entries.
    """
    counts = _pool_counts(counts)
    if not 0.0 <= ill_ratio <= 1.0:
        raise InvalidSpec(f"ill_ratio must lie in [0, 1], got {ill_ratio}")
    X = _features(data)
    n = X.shape[0]
    parts: list[Partition] = []
    prov: list[dict] = []
    for name in GENERATORS:
        for i in range(counts.get(name, 0)):
            rng = sub_rng(seed, "pool", name, i)
            k = random_k(rng, n)
            s = int(rng.integers(2**63 - 1))
            if name == "kmeans":
                p = kmeans(X, k, s)
                params = {"k": k}
            else:
                p = rpcl(X, k, s)
                params = {"k_max": k}
            parts.append(p)
            prov.append({"generator": name, "index": i, "params": params, "seed": s})
    size = len(parts)
    flags = np.zeros(size, dtype=bool)
    m = ill_count(ill_ratio, size)
    if m:
        chosen = np.sort(sub_rng(seed, "ill-select").choice(size, m, replace=False))
        for slot in chosen:
            s = sub_seed(seed, "ill", int(slot))
            parts[slot] = ill_clustering(X, s)
            prov[slot] = {"generator": "ill", "index": int(slot), "params": {}, "seed": s}
            flags[slot] = True
    flags.setflags(write=False)
    return Pool(tuple(parts), tuple(prov), flags)


def sample_member_ids(pool_size: int, M: int, seed) -> np.ndarray:
    if not 1 <= M <= pool_size:
        raise InvalidSize(f"cannot draw {M} members from a pool of {pool_size}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.choice(pool_size, size=M, replace=False)


def sample_ensemble(pool: Pool, M: int = 5, seed=0) -> Ensemble:
    """Uniform draw of ``M`` pool members without replacement."""
    ids = sample_member_ids(len(pool), M, seed)
    return Ensemble(tuple(pool.partitions[i] for i in ids))


class RPCL(ClusterMixin, BaseEstimator):
    """Rival penalized competitive learning.

    Starts with ``n_units`` prototypes; surplus prototypes are driven away by
    rival penalization and pruned, so ``labels_`` may use fewer clusters.
    """

    def __init__(self, n_units=8, learning_rate=0.05, delearning_rate=0.002, n_epochs=None, random_state=0):
        self.n_units = n_units
        self.learning_rate = learning_rate
        self.delearning_rate = delearning_rate
        self.n_epochs = n_epochs
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float, ensure_min_samples=2)
        rng = np.random.default_rng(self.random_state)
        labels, self.cluster_centers_, self.wins_ = rpcl_fit(
            X, self.n_units, rng, self.learning_rate, self.delearning_rate, self.n_epochs
        )
        self.labels_ = partition_from_labels(labels).labels.copy()
        self.n_features_in_ = X.shape[1]
        return self


class PoolGenerator(TransformerMixin, BaseEstimator):
    """Turn a feature matrix into a label matrix of generated base clusterings.

    ``transform`` is deterministic given ``random_state``, so the output can
    be fed straight into :class:`~crowdclust.WEAC` or
    :class:`~crowdclust.GPMGLA` inside a Pipeline.
    """

    def __init__(self, n_kmeans=10, n_rpcl=0, ill_ratio=0.0, random_state=0):
        self.n_kmeans = n_kmeans
        self.n_rpcl = n_rpcl
        self.ill_ratio = ill_ratio
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float, ensure_min_samples=2)
        self.n_features_in_ = X.shape[1]
        self.pool_ = self._build(X)
        return self

    def _build(self, X):
        counts = {"kmeans": self.n_kmeans, "rpcl": self.n_rpcl}
        return build_pool(X, counts, self.ill_ratio, int(self.random_state))

    def transform(self, X):
        X = check_array(X, dtype=float, ensure_min_samples=2)
        return self._build(X).label_matrix()

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X).pool_.label_matrix()
