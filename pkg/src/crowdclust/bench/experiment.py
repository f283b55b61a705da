"""Experiment protocol: repeated ensemble draws, consensus at several k, scoring.

Every random choice is drawn from a stream derived from the master seed and a
purpose tag (see :func:`~crowdclust.generators.sub_rng`), so adding a method
or a run never changes what the other runs see.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..agreement import nmi
from ..core import Ensemble, partition_from_labels
from ..exceptions import CrowdClustError, InvalidSpec, MemoryGuardError
from ..generators import Dataset, Pool, build_pool, sample_member_ids, sub_rng, sub_seed
from ..gpmgla import build_graph, gpmgla_for_ks, tcut
from ..weac import DEFAULT_MEMORY_LIMIT, linkage_tree, weac_for_ks, weighted_coassociation
from .datasets import resolve_dataset

METHODS = ("weac-al", "weac-cl", "weac-sl", "eac-al", "eac-cl", "eac-sl", "gpmgla")
DEFAULT_METHODS = ("weac-al", "eac-al", "gpmgla")
K_MODES = ("true-k", "best-k")
TIE_TOL = 1e-12

_LINKAGE = {"al": "average", "cl": "complete", "sl": "single"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a report, apart from the dataset file contents."""

    dataset: str
    seed: int
    pool: dict = field(default_factory=lambda: {"kmeans": 100, "rpcl": 100})
    ill_ratio: float = 0.0
    M: int = 5
    runs: int = 100
    methods: tuple = DEFAULT_METHODS
    alpha: float = 0.5
    beta: float = 2.0
    k_mode: str = "best-k"
    k_range: tuple | None = None
    has_header: bool | None = None
    label_column: int | str | None = -1
    normalize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "pool", {str(k): int(v) for k, v in dict(self.pool).items()})
        if self.k_range is not None:
            object.__setattr__(self, "k_range", tuple(int(k) for k in self.k_range))
        if self.runs < 1:
            raise InvalidSpec(f"runs must be at least 1, got {self.runs}")
        if self.M < 2:
            raise InvalidSpec(f"ensemble size M must be at least 2, got {self.M}")
        if not self.methods:
            raise InvalidSpec("methods must not be empty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise InvalidSpec(f"unknown methods {bad}; expected a subset of {METHODS}")
        if len(set(self.methods)) != len(self.methods):
            raise InvalidSpec("methods must not repeat")
        if self.k_mode not in K_MODES:
            raise InvalidSpec(f"k_mode must be one of {K_MODES}, got {self.k_mode!r}")
        if self.k_range is not None and (len(self.k_range) != 2 or self.k_range[0] > self.k_range[1]):
            raise InvalidSpec(f"k_range must be (lo, hi) with lo <= hi, got {self.k_range}")
        if not 0.0 <= self.ill_ratio <= 1.0:
            raise InvalidSpec(f"ill_ratio must lie in [0, 1], got {self.ill_ratio}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["k_range"] = None if self.k_range is None else list(self.k_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(**d)

    def load(self) -> Dataset:
        return resolve_dataset(
            self.dataset,
            has_header=self.has_header,
            label_column=self.label_column,
            normalize=self.normalize,
        )


@dataclass(frozen=True)
class Row:
    """One NMI cell. Base rows carry the pool id in ``member``; method rows use -1."""

    run: int
    name: str
    member: int
    k: int
    nmi: float | None
    error: str = ""


@dataclass(frozen=True)
class Aggregate:
    metric: str
    method: str
    k: int | None
    value: float | None
    count: int


@dataclass(frozen=True)
class Scope:
    """Dataset facts the aggregates depend on."""

    true_k: int
    k_lo: int
    k_hi: int

    @property
    def ks(self) -> list[int]:
        return sorted(set(range(self.k_lo, self.k_hi + 1)) | {self.true_k})


@dataclass(eq=False)
class ExperimentReport:
    config: ExperimentConfig
    scope: Scope
    dataset: dict
    pool: dict
    rows: list[Row]
    aggregates: list[Aggregate]
    timings: list[tuple[int, str, float]] = field(default_factory=list)

    def value(self, metric: str, method: str = "", k: int | None = None):
        for a in self.aggregates:
            if a.metric == metric and a.method == method and a.k == k:
                return a.value
        raise KeyError((metric, method, k))


def default_k_range(true_k: int, n: int) -> tuple[int, int]:
    hi = min(2 * true_k, math.isqrt(n) + 1)
    return 2, max(2, min(hi, n))


def make_scope(config: ExperimentConfig, data: Dataset) -> Scope:
    if data.true_labels is None:
        raise InvalidSpec(f"dataset {data.name!r} has no class labels to score against")
    true_k = data.n_classes
    lo, hi = config.k_range if config.k_range is not None else default_k_range(true_k, data.n)
    if not 2 <= lo <= hi <= data.n:
        raise InvalidSpec(f"k_range must lie within [2, {data.n}], got ({lo}, {hi})")
    return Scope(true_k, lo, hi)


def consensus_for_ks(method: str, ensemble: Ensemble, ks, alpha, beta, random_state):
    """Map each k to a Partition or to an error message for that cell."""
    ks = sorted(set(ks))
    if method == "gpmgla":
        v_count = sum(p.n_clusters for p in ensemble)
        ok = [k for k in ks if k <= v_count]
        out = {k: f"k={k} exceeds the {v_count} cluster nodes" for k in ks if k > v_count}
        try:
            out.update(gpmgla_for_ks(ensemble, ok, alpha, beta, random_state=random_state))
        except CrowdClustError as exc:
            out.update({k: f"{type(exc).__name__}: {exc}" for k in ok})
        return out
    family, link = method.split("-")
    b = beta if family == "weac" else 0.0
    try:
        return weac_for_ks(ensemble, ks, b, _LINKAGE[link])
    except (CrowdClustError, MemoryError) as exc:
        return {k: f"{type(exc).__name__}: {exc}" for k in ks}


_WORKER: dict = {}


def _init_worker(state):
    _WORKER.clear()
    _WORKER.update(state)


def _one_run(r: int):
    cfg, pool, truth, scope = _WORKER["config"], _WORKER["pool"], _WORKER["truth"], _WORKER["scope"]
    ids = sample_member_ids(len(pool), cfg.M, sub_rng(cfg.seed, "run", r))
    ensemble = Ensemble(tuple(pool.partitions[i] for i in ids))
    rows = []
    base_ks = []
    for i, p in zip(ids, ensemble):
        rows.append(Row(r, "base", int(i), p.n_clusters, nmi(p, truth)))
        base_ks.append(p.n_clusters)
    ks = sorted(set(scope.ks) | set(base_ks))
    timings = []
    for m in cfg.methods:
        t0 = time.perf_counter()
        cells = consensus_for_ks(m, ensemble, ks, cfg.alpha, cfg.beta, sub_seed(cfg.seed, m, r))
        timings.append((r, m, time.perf_counter() - t0))
        for k in ks:
            c = cells[k]
            if isinstance(c, str):
                rows.append(Row(r, m, -1, k, None, c))
            else:
                rows.append(Row(r, m, -1, k, nmi(c, truth)))
    return rows, timings


def run_experiment(
    config: ExperimentConfig,
    data: Dataset | None = None,
    pool: Pool | None = None,
    n_jobs: int = 1,
) -> ExperimentReport:
    """Run the protocol ``config.runs`` times and aggregate.

    ``data`` and ``pool`` may be passed in to skip loading and generation;
    they must be what ``config`` would produce for the report to be
    replayable.
    """
    if data is None:
        data = config.load()
    scope = make_scope(config, data)
    if pool is None:
        pool = build_pool(data, config.pool, config.ill_ratio, config.seed)
    if config.M > len(pool):
        raise InvalidSpec(f"M={config.M} exceeds the pool size {len(pool)}")
    state = {"config": config, "pool": pool, "truth": data.truth(), "scope": scope}
    if n_jobs == 1:
        _init_worker(state)
        results = [_one_run(r) for r in range(config.runs)]
    else:
        with ProcessPoolExecutor(n_jobs, initializer=_init_worker, initargs=(state,)) as ex:
            results = list(ex.map(_one_run, range(config.runs)))
    rows = [row for rs, _ in results for row in rs]
    timings = [t for _, ts in results for t in ts]
    return ExperimentReport(
        config=config,
        scope=scope,
        dataset={"name": data.name, "n": data.n, "d": data.d, "n_classes": data.n_classes},
        pool=pool_summary(pool),
        rows=rows,
        aggregates=compute_aggregates(rows, config, scope),
        timings=timings,
    )


def pool_summary(pool: Pool) -> dict:
    gens: dict[str, int] = {}
    for p in pool.provenance:
        gens[p["generator"]] = gens.get(p["generator"], 0) + 1
    return {"size": len(pool), "ill": int(pool.ill_flags.sum()), "generators": gens}


def winning_percentage(method_nmi, base_nmi, tol: float = TIE_TOL) -> float:
    """Percentage of pairwise comparisons won; a tie counts as half a win."""
    a = np.asarray(method_nmi, dtype=float)
    b = np.asarray(base_nmi, dtype=float)
    if a.shape != b.shape or a.size == 0:
        raise ValueError(f"need two equal-length non-empty sequences, got {a.shape} and {b.shape}")
    tie = np.abs(a - b) <= tol
    wins = (a > b) & ~tie
    return float(100.0 * (wins.sum() + 0.5 * tie.sum()) / a.size)


def _mean(vals):
    return float(np.mean(vals)) if vals else None


def _cells(rows):
    cells: dict[tuple[str, int, int], float | None] = {}
    for row in rows:
        if row.name != "base":
            cells[(row.name, row.run, row.k)] = row.nmi
    return cells


def best_k(rows, method: str, scope: Scope) -> tuple[int | None, float | None]:
    """Dataset-level best k: the k in range with the highest mean NMI over runs.

    Ties go to the smaller k.
    """
    by_k: dict[int, list[float]] = {}
    for row in rows:
        if row.name == method and scope.k_lo <= row.k <= scope.k_hi and row.nmi is not None:
            by_k.setdefault(row.k, []).append(row.nmi)
    best = (None, None)
    for k in sorted(by_k):
        m = _mean(by_k[k])
        if best[1] is None or m > best[1]:
            best = (k, m)
    return best


def paired_comparisons(rows, method: str, k_mode: str, scope: Scope):
    """``(method NMI, base NMI)`` pairs; same-k pairs use each base's own k."""
    cells = _cells(rows)
    bk = best_k(rows, method, scope)[0]
    pairs = []
    for row in rows:
        if row.name != "base":
            continue
        k = row.k if k_mode == "same-k" else bk
        v = cells.get((method, row.run, k))
        if v is not None:
            pairs.append((v, row.nmi))
    return pairs


def compute_aggregates(rows, config: ExperimentConfig, scope: Scope) -> list[Aggregate]:
    """Summary table derived purely from ``rows``."""
    out = []
    base = [r for r in rows if r.name == "base"]
    per_run: dict[int, list[float]] = {}
    for r in base:
        per_run.setdefault(r.run, []).append(r.nmi)
    runs = sorted(per_run)
    out.append(Aggregate("base_max", "base", None, _mean([max(per_run[r]) for r in runs]), len(runs)))
    out.append(Aggregate("base_min", "base", None, _mean([min(per_run[r]) for r in runs]), len(runs)))
    out.append(Aggregate("base_avg", "base", None, _mean([r.nmi for r in base]), len(base)))
    for m in config.methods:
        mine = [r for r in rows if r.name == m]
        for k in scope.ks:
            vals = [r.nmi for r in mine if r.k == k and r.nmi is not None]
            out.append(Aggregate("mean_nmi", m, k, _mean(vals), len(vals)))
        k_best, v_best = best_k(rows, m, scope)
        out.append(Aggregate("best_k_nmi", m, k_best, v_best, len(runs)))
        true_vals = [r.nmi for r in mine if r.k == scope.true_k and r.nmi is not None]
        out.append(Aggregate("true_k_nmi", m, scope.true_k, _mean(true_vals), len(true_vals)))
        for mode in ("same-k", "best-k"):
            pairs = paired_comparisons(rows, m, mode, scope)
            v = winning_percentage(*zip(*pairs)) if pairs else None
            out.append(Aggregate(f"win_{mode.replace('-', '_')}", m, None, v, len(pairs)))
        failed = sum(1 for r in mine if r.nmi is None)
        out.append(Aggregate("failed_cells", m, None, float(failed), len(mine)))
    return out


def headline(report: ExperimentReport, method: str) -> float | None:
    """Mean NMI of ``method`` under the config's k-mode."""
    metric = "best_k_nmi" if report.config.k_mode == "best-k" else "true_k_nmi"
    for a in report.aggregates:
        if a.metric == metric and a.method == method:
            return a.value
    raise KeyError(method)


def method_values(report: ExperimentReport, method: str, k_mode: str | None = None) -> list[float]:
    """Per-run NMIs of ``method`` at the k the mode selects."""
    k_mode = k_mode or report.config.k_mode
    if k_mode == "true-k":
        k = report.scope.true_k
    else:
        k = best_k(report.rows, method, report.scope)[0]
    return [r.nmi for r in report.rows if r.name == method and r.k == k and r.nmi is not None]


def _stderr(vals) -> float:
    if len(vals) < 2:
        return 0.0
    return float(np.std(vals, ddof=1) / math.sqrt(len(vals)))


@dataclass(eq=False)
class SweepReport:
    kind: str
    config: ExperimentConfig
    xs: list
    reports: list = field(default_factory=list)
    series: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)


def ill_series(xs, reports, k_mode: str | None = None) -> list[tuple]:
    """Plot series ``(x, method, mean, stderr)``; ``base`` is the Avg(base) line."""
    out = []
    for x, rep in zip(xs, reports):
        base = [r.nmi for r in rep.rows if r.name == "base"]
        out.append((x, "base", _mean(base), _stderr(base)))
        for m in rep.config.methods:
            vals = method_values(rep, m, k_mode)
            out.append((x, m, _mean(vals), _stderr(vals)))
    return out


def sweep_ill(
    config: ExperimentConfig, ratios, data: Dataset | None = None, n_jobs: int = 1
) -> SweepReport:
    """Re-run the protocol with the pool rebuilt at each ill-clustering ratio."""
    ratios = [float(r) for r in ratios]
    if not ratios or any(not 0.0 <= r <= 1.0 for r in ratios):
        raise InvalidSpec(f"ratios must be a non-empty subset of [0, 1], got {ratios}")
    if data is None:
        data = config.load()
    reports = [run_experiment(replace(config, ill_ratio=r), data, n_jobs=n_jobs) for r in ratios]
    return SweepReport("ill", config, ratios, reports, ill_series(ratios, reports))


def _time_method(method, ensemble, k, alpha, beta, random_state, memory_limit):
    if method == "gpmgla":
        graph = build_graph(ensemble, alpha, beta)
        return tcut(graph, k, random_state).u_labels[: ensemble.n]
    family, link = method.split("-")
    A = weighted_coassociation(
        ensemble, beta if family == "weac" else 0.0, memory_limit=memory_limit
    )
    return linkage_tree(A, _LINKAGE[link]).cut(k).labels


def loglog_slope(sizes, seconds) -> float | None:
    pts = [(s, t) for s, t in zip(sizes, seconds) if t is not None and t > 0]
    if len(pts) < 2:
        return None
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


def sweep_time(
    config: ExperimentConfig,
    sizes,
    data: Dataset | None = None,
    repeats: int = 3,
    memory_limit: int | None = DEFAULT_MEMORY_LIMIT,
) -> SweepReport:
    """Wall-clock of each method on prefixes of the dataset.

    For each size a pool is built on the prefix and one ensemble drawn; each
    method is run once to warm up and then ``repeats`` times, and the median
    is kept. The consensus NMI at the true k and the drawn member ids are
    recorded as ordinary rows; timings live only in ``extra``.
    """
    sizes = [int(s) for s in sizes]
    if repeats < 1:
        raise InvalidSpec(f"repeats must be at least 1, got {repeats}")
    if data is None:
        data = config.load()
    if not sizes or any(not 2 <= s <= data.n for s in sizes):
        raise InvalidSpec(f"sizes must lie in [2, {data.n}], got {sizes}")
    reports, times = [], []
    for size in sizes:
        sub = data.head(size)
        pool = build_pool(sub, config.pool, config.ill_ratio, sub_seed(config.seed, "time-pool", size))
        ids = sample_member_ids(len(pool), config.M, sub_rng(config.seed, "time", size))
        ensemble = Ensemble(tuple(pool.partitions[i] for i in ids))
        truth = sub.truth()
        k = sub.n_classes
        rows = [Row(0, "base", int(i), p.n_clusters, nmi(p, truth)) for i, p in zip(ids, ensemble)]
        for m in config.methods:
            rs = sub_seed(config.seed, m, "time", size)
            secs = []
            try:
                _time_method(m, ensemble, k, config.alpha, config.beta, rs, memory_limit)
                for _ in range(repeats):
                    t0 = time.perf_counter()
                    labels = _time_method(m, ensemble, k, config.alpha, config.beta, rs, memory_limit)
                    secs.append(time.perf_counter() - t0)
            except MemoryGuardError as exc:
                rows.append(Row(0, m, -1, k, None, f"skipped: {exc}"))
                times.append((size, m, [], "skipped"))
                continue
            rows.append(Row(0, m, -1, k, nmi(partition_from_labels(labels), truth)))
            times.append((size, m, secs, "ok"))
        scope = Scope(k, k, k)
        reports.append(
            ExperimentReport(
                config=replace(config, runs=1, k_mode="true-k"),
                scope=scope,
                dataset={"name": sub.name, "n": sub.n, "d": sub.d, "n_classes": sub.n_classes},
                pool=pool_summary(pool),
                rows=rows,
                aggregates=compute_aggregates(rows, replace(config, runs=1), scope),
            )
        )
    series, medians = [], {}
    for size, m, secs, status in times:
        med = float(np.median(secs)) if secs else None
        medians.setdefault(m, []).append((size, med))
        series.append((size, m, _mean(secs), _stderr(secs) if secs else None))
    slopes = {m: loglog_slope([s for s, _ in v], [t for _, t in v]) for m, v in medians.items()}
    extra = {"times": times, "medians": medians, "slopes": slopes, "repeats": repeats}
    return SweepReport("time", config, sizes, reports, series, extra)
