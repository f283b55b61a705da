"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``. The lines are also collected into the
pytest terminal summary.
"""

from __future__ import annotations

import os
import time
from functools import lru_cache

import numpy as np
import pytest

from crowdclust import (
    Ensemble,
    agglomerate,
    build_registry,
    member_similarity,
    nmi,
    partition_from_labels,
    sact,
    tcut,
    weighted_coassociation,
)
from crowdclust.agreement import AgreementProfile
from crowdclust.bench import ExperimentConfig, emit_report, run_experiment, sweep_ill, sweep_time
from crowdclust.bench.datasets import SEEDS_ENV, resolve_dataset
from crowdclust.exceptions import IngestError
from crowdclust.generators import build_pool
from crowdclust.gpmgla import ConsensusGraph
from oracles import agglomerate_naive, full_graph_ncut, nmi_bruteforce, sact_naive, same_grouping

SEED = 1
POOL = {"kmeans": 100, "rpcl": 100}
RUNS = 100
RESULTS: list[str] = []


def verdict(number: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _rng(tag: int) -> np.random.Generator:
    return np.random.default_rng([SEED, tag])


def _random_labels(rng, n, k_max=6):
    return rng.integers(0, rng.integers(1, k_max + 1), size=n)


# 1 ---------------------------------------------------------------------------


def test_criterion_1_nmi_oracle():
    rng = _rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 31))
        p, q = _random_labels(rng, n), _random_labels(rng, n)
        got = nmi(partition_from_labels(p), partition_from_labels(q))
        worst = max(worst, abs(got - nmi_bruteforce(p.tolist(), q.tolist())))
    elapsed = time.perf_counter() - t0
    verdict(1, worst <= 1e-12 and elapsed < 10, f"max |nmi - oracle| = {worst:.2e} over 1000 pairs in {elapsed:.2f}s")


# 2 ---------------------------------------------------------------------------


def test_criterion_2_eac_reduction():
    rng = _rng(2)
    exact = 0
    for _ in range(100):
        n = int(rng.integers(2, 201))
        M = int(rng.integers(2, 9))
        e = Ensemble.from_labels([_random_labels(rng, n, 10) for _ in range(M)])
        plain = sum(member_similarity(p) for p in e) / M
        exact += np.array_equal(weighted_coassociation(e, beta=0.0).values, plain)
    verdict(2, exact == 100, f"{exact}/100 ensembles match the plain co-association mean exactly")


# 3 ---------------------------------------------------------------------------


def test_criterion_3_linkage_oracle():
    rng = _rng(3)
    t0 = time.perf_counter()
    equal = 0
    for t in range(100):
        n = int(rng.integers(1, 51))
        S = rng.random((n, n)) if t % 2 else rng.integers(0, 5, (n, n)) / 4
        S = np.triu(S, 1)
        S = S + S.T + np.eye(n)
        k = int(rng.integers(1, n + 1))
        equal += all(
            np.array_equal(agglomerate(S, kind, k).labels, agglomerate_naive(S, kind, k))
            for kind in ("single", "average", "complete")
        )
    elapsed = time.perf_counter() - t0
    verdict(3, equal == 100 and elapsed < 30, f"{equal}/100 matrices equal under SL/AL/CL in {elapsed:.2f}s")


# 4 ---------------------------------------------------------------------------


def test_criterion_4_sact_oracle():
    rng = _rng(4)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 21))
        M = int(rng.integers(2, 5))
        rows = [_random_labels(rng, n, 5).tolist() for _ in range(M)]
        infl = rng.random(M)
        prof = AgreementProfile(np.ones(M), np.ones(M), infl, 1.0, np.zeros((M, M)))
        got = sact(build_registry(Ensemble.from_labels(rows)), prof).toarray()
        worst = max(worst, float(np.abs(got - sact_naive(rows, infl)[1]).max()))
    ex = [[0, 0, 1, 1], [0, 0, 0, 1]]
    prof = AgreementProfile(np.ones(2), np.ones(2), np.ones(2), 1.0, np.zeros((2, 2)))
    sim = sact(build_registry(Ensemble.from_labels(ex)), prof).toarray()
    example = (sim[0, 1], sim[0, 2], sim[1, 3]) == (0.1875, 1.0, 0.75)
    verdict(
        4,
        worst <= 1e-12 and example,
        f"max |sact - oracle| = {worst:.2e} on 50 ensembles; worked example "
        f"({sim[0, 1]}, {sim[0, 2]}, {sim[1, 3]})",
    )


# 5 ---------------------------------------------------------------------------


def test_criterion_5_tcut_oracle():
    import scipy.sparse as sp

    rng = _rng(5)
    hits = 0
    for t in range(100):
        while True:
            u = int(rng.integers(3, 15))
            v = int(rng.integers(2, 21 - u))
            n_inst = int(rng.integers(2, u + 1))
            B = rng.random((u, v)) * (rng.random((u, v)) < 0.6)
            if B.sum(axis=1).min() > 0 and B.sum(axis=0).min() > 0:
                break
        k = int(rng.integers(2, min(n_inst, u, v) + 1))
        res = tcut(ConsensusGraph(sp.csr_matrix(B), n_inst), k, random_state=t)
        mine = np.concatenate([res.u_labels, res.v_labels])
        hits += same_grouping(mine, full_graph_ncut(B, n_inst, k, seed=t))
    verdict(5, hits >= 95, f"{hits}/100 random bipartite graphs grouped like the full-graph normalized cut")


# 6, 7, 8 ---------------------------------------------------------------------


@lru_cache(maxsize=None)
def _dataset(name):
    return resolve_dataset(name)


@lru_cache(maxsize=None)
def _pool(name, ill):
    return build_pool(_dataset(name), POOL, ill, SEED)


@lru_cache(maxsize=None)
def _report(name, methods, beta=2.0, alpha=0.5, ill=0.0, k_mode="best-k"):
    cfg = ExperimentConfig(
        name, SEED, pool=POOL, ill_ratio=ill, runs=RUNS, methods=methods, alpha=alpha, beta=beta, k_mode=k_mode
    )
    return run_experiment(cfg, _dataset(name), _pool(name, ill))


def _available(name):
    try:
        _dataset(name)
    except IngestError as exc:
        return str(exc)
    return None


def test_criterion_6_consensus_beats_base():
    t0 = time.perf_counter()
    ok, parts = True, []
    for name in ("iris", "wine", "seeds"):
        missing = _available(name)
        if missing:
            ok = False
            parts.append(f"{name}: unavailable ({missing})")
            continue
        rep = _report(name, ("weac-al", "eac-al", "gpmgla"))
        base = rep.value("base_avg", "base")
        for m in ("gpmgla", "weac-al"):
            best = next(a for a in rep.aggregates if a.metric == "best_k_nmi" and a.method == m)
            win = rep.value("win_same_k", m)
            good_a = best.value >= base + 0.03
            good_b = win >= 60.0
            ok &= good_a and good_b
            parts.append(
                f"{name}/{m}: best-k NMI {best.value:.3f} (k={best.k}) vs Avg(base)+0.03 {base + 0.03:.3f} "
                f"[{'ok' if good_a else 'short'}], same-k wins {win:.1f}% [{'ok' if good_b else 'short'}]"
            )
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    verdict(6, ok, "; ".join(parts) + f"; {elapsed:.0f}s")


def test_criterion_7_ill_robustness():
    t0 = time.perf_counter()
    methods = ("weac-al", "eac-al", "gpmgla")
    clean = _report("iris", methods, ill=0.0, k_mode="true-k")
    ill = _report("iris", methods, ill=0.5, k_mode="true-k")
    v = {(m, r): rep.value("true_k_nmi", m, rep.scope.true_k) for m in methods for r, rep in ((0, clean), (5, ill))}
    gp_drop = v[("gpmgla", 0)] - v[("gpmgla", 5)]
    eac_drop = v[("eac-al", 0)] - v[("eac-al", 5)]
    a = v[("weac-al", 5)] > v[("eac-al", 5)]
    b = abs(gp_drop) <= 0.15
    c = eac_drop > gp_drop
    elapsed = time.perf_counter() - t0
    verdict(
        7,
        a and b and c and elapsed < 300,
        f"at ratio 0.5 WEAC-AL {v[('weac-al', 5)]:.3f} vs EAC-AL {v[('eac-al', 5)]:.3f}; "
        f"GP-MGLA drop {gp_drop:.3f} (limit 0.15); EAC-AL drop {eac_drop:.3f}; {elapsed:.0f}s",
    )


def test_criterion_8_parameter_stability():
    ok, parts = True, []
    for name in ("iris", "seeds"):
        missing = _available(name)
        if missing:
            ok = False
            parts.append(f"{name}: unavailable ({missing})")
            continue
        for m in ("weac-al", "gpmgla"):
            vals = [_best(name, m, beta=b) for b in (1.0, 2.0, 4.0)]
            spread = max(vals) - min(vals)
            ok &= spread < 0.05
            parts.append(f"{name}/{m} beta spread {spread:.3f}")
        vals = [_best(name, "gpmgla", alpha=a) for a in (0.1, 0.5, 1.0)]
        spread = max(vals) - min(vals)
        ok &= spread < 0.05
        parts.append(f"{name}/gpmgla alpha spread {spread:.3f}")
    verdict(8, ok, "; ".join(parts))


def _best(name, method, beta=2.0, alpha=0.5):
    rep = _report(name, ("weac-al", "eac-al", "gpmgla"), beta=beta, alpha=alpha)
    return next(a.value for a in rep.aggregates if a.metric == "best_k_nmi" and a.method == method)


# 9 ---------------------------------------------------------------------------


def test_criterion_9_scaling_shape():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(
        "gmm:n=8000,d=10,k=8,seed=0",
        SEED,
        pool={"kmeans": 5, "rpcl": 5},
        runs=1,
        methods=("weac-al", "gpmgla"),
        k_mode="true-k",
    )
    sw = sweep_time(cfg, [1000, 2000, 4000, 8000], repeats=3)
    slope = sw.extra["slopes"]["weac-al"]
    med = {m: dict(v) for m, v in sw.extra["medians"].items()}
    faster = med["gpmgla"][8000] < med["weac-al"][8000]
    elapsed = time.perf_counter() - t0
    verdict(
        9,
        slope is not None and 1.7 <= slope <= 2.3 and faster and elapsed < 900,
        f"WEAC-AL log-log slope {slope:.3f}; at n=8000 GP-MGLA {med['gpmgla'][8000]:.3f}s "
        f"vs WEAC-AL {med['weac-al'][8000]:.3f}s; {elapsed:.0f}s",
    )


# 10 --------------------------------------------------------------------------


def _bytes(prefix):
    return {s: prefix.with_name(prefix.name + s).read_bytes() for s in (".rows.csv", ".agg.csv", ".json")}


def test_criterion_10_determinism(tmp_path):
    cfg = ExperimentConfig("iris", 7, pool={"kmeans": 20, "rpcl": 20}, runs=5)
    jobs = {
        "run": lambda: run_experiment(cfg),
        "sweep-ill": lambda: sweep_ill(cfg, [0.0, 0.3]),
        "sweep-time": lambda: sweep_time(
            ExperimentConfig("gmm:n=600,k=3", 7, pool={"kmeans": 4, "rpcl": 4}, runs=1, k_mode="true-k"),
            [300, 600],
            repeats=1,
        ),
    }
    same = {}
    for name, job in jobs.items():
        emit_report(job(), tmp_path / f"{name}-a")
        emit_report(job(), tmp_path / f"{name}-b")
        same[name] = _bytes(tmp_path / f"{name}-a") == _bytes(tmp_path / f"{name}-b")
    verdict(10, all(same.values()), ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items()))


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
