"""Command-line entry point: ``crowdclust <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..agreement import nmi
from ..core import partition_from_labels
from ..exceptions import CrowdClustError
from ..generators import build_pool
from .datasets import load_dataset
from .experiment import (
    DEFAULT_METHODS,
    K_MODES,
    METHODS,
    ExperimentConfig,
    run_experiment,
    sweep_ill,
    sweep_time,
)
from .report import emit_report, load_document, recompute


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(t) for t in text.split(",") if t.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return parse


def _label_column(text):
    try:
        return int(text)
    except ValueError:
        return None if text.lower() == "none" else text


def _add_dataset(p):
    p.add_argument("--dataset", required=True, help="path, or one of iris, wine, seeds, gmm[:n=..,d=..,k=..,seed=..]")
    p.add_argument("--header", dest="has_header", action="store_true", default=None)
    p.add_argument("--no-header", dest="has_header", action="store_false")
    p.add_argument("--label-column", type=_label_column, default=-1, help="index, header name, or 'none'")
    p.add_argument("--no-normalize", dest="normalize", action="store_false")


def _add_pool(p):
    p.add_argument("--kmeans", type=int, default=100, help="k-means members in the pool")
    p.add_argument("--rpcl", type=int, default=100, help="RPCL members in the pool")
    p.add_argument("--ill-ratio", type=float, default=0.0)


def _add_experiment(p):
    _add_dataset(p)
    _add_pool(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("-M", "--ensemble-size", dest="M", type=int, default=5)
    p.add_argument("--methods", type=_csv_list(str), default=list(DEFAULT_METHODS), help=f"subset of {','.join(METHODS)}")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--k-mode", choices=K_MODES, default="best-k")
    p.add_argument("--k-range", type=int, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--out", required=True, help="output prefix NAME; writes NAME.rows.csv, NAME.agg.csv, NAME.json")
    p.add_argument("--format", dest="formats", type=_csv_list(str), default=["csv", "json"])
    p.add_argument("--jobs", type=int, default=1)


def _config(args) -> ExperimentConfig:
    return ExperimentConfig(
        dataset=args.dataset,
        seed=args.seed,
        pool={"kmeans": args.kmeans, "rpcl": args.rpcl},
        ill_ratio=args.ill_ratio,
        M=args.M,
        runs=args.runs,
        methods=tuple(args.methods),
        alpha=args.alpha,
        beta=args.beta,
        k_mode=args.k_mode,
        k_range=args.k_range,
        has_header=args.has_header,
        label_column=args.label_column,
        normalize=args.normalize,
    )


def _summary(report) -> None:
    for a in report.aggregates:
        if a.metric in ("base_avg", "best_k_nmi", "true_k_nmi", "win_same_k", "win_best_k"):
            k = "" if a.k is None else f" k={a.k}"
            v = "n/a" if a.value is None else f"{a.value:.4f}"
            print(f"{a.method:>8} {a.metric:<11}{k:<6} {v}")


def cmd_pool_build(args):
    cfg = _config_for_pool(args)
    data = cfg.load()
    pool = build_pool(data, cfg.pool, cfg.ill_ratio, cfg.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    labels = pool.label_matrix()
    header = ",".join(f"m{i}" for i in range(labels.shape[1]))
    np.savetxt(out.with_name(out.name + ".pool.csv"), labels, fmt="%d", delimiter=",", header=header, comments="")
    doc = {"config": cfg.to_dict(), "n": pool.n, "provenance": list(pool.provenance), "ill_flags": pool.ill_flags.tolist()}
    out.with_name(out.name + ".pool.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    print(f"pool of {len(pool)} clusterings over {pool.n} instances ({int(pool.ill_flags.sum())} ill)")


def _config_for_pool(args):
    return ExperimentConfig(
        dataset=args.dataset,
        seed=args.seed,
        pool={"kmeans": args.kmeans, "rpcl": args.rpcl},
        ill_ratio=args.ill_ratio,
        has_header=args.has_header,
        label_column=args.label_column,
        normalize=args.normalize,
    )


def cmd_run(args):
    report = run_experiment(_config(args), n_jobs=args.jobs)
    for p in emit_report(report, args.out, args.formats):
        print(f"wrote {p}")
    _summary(report)


def cmd_sweep_ill(args):
    report = sweep_ill(_config(args), args.ratios, n_jobs=args.jobs)
    for p in emit_report(report, args.out, args.formats):
        print(f"wrote {p}")


def cmd_sweep_time(args):
    limit = None if args.memory_limit_mb <= 0 else int(args.memory_limit_mb * 1024**2)
    cfg = replace(_config(args), runs=1, k_mode="true-k")
    report = sweep_time(cfg, args.sizes, repeats=args.repeats, memory_limit=limit)
    for p in emit_report(report, args.out, args.formats):
        print(f"wrote {p}")
    for m, s in report.extra["slopes"].items():
        print(f"{m:>8} log-log slope {'n/a' if s is None else f'{s:.3f}'}")


def _read_labels(path, column):
    if column is None:
        ds = load_dataset(path, has_header=None, label_column=None, normalize=False)
        if ds.d != 1:
            raise CrowdClustError(f"{path} has {ds.d} columns; pick one with --column")
        return partition_from_labels(ds.features[:, 0])
    ds = load_dataset(path, label_column=column, normalize=False)
    return partition_from_labels(ds.true_labels)


def cmd_eval(args):
    a = _read_labels(args.a, args.column)
    b = _read_labels(args.b, args.column)
    print(repr(nmi(a, b)))


def cmd_report_recompute(args):
    prefix = Path(args.name)
    text = recompute(prefix)
    agg = prefix.with_name(prefix.name + ".agg.csv")
    if args.check:
        same = agg.exists() and agg.read_text() == text
        print("aggregates match" if same else "aggregates differ")
        return 0 if same else 1
    agg.write_text(text)
    print(f"wrote {agg}")
    return 0


def cmd_report_replay(args):
    doc = load_document(args.name)
    cfg = ExperimentConfig.from_dict(doc["config"])
    kind = doc["kind"]
    if kind == "run":
        report = run_experiment(cfg)
    elif kind == "sweep-ill":
        report = sweep_ill(cfg, doc["sweep"]["xs"])
    else:
        report = sweep_time(cfg, doc["sweep"]["xs"], repeats=doc["sweep"]["repeats"])
    for p in emit_report(report, args.out):
        print(f"wrote {p}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crowdclust", description="Consensus clustering experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    pool = sub.add_parser("pool", help="base-clustering pools").add_subparsers(dest="pool_command", required=True)
    pb = pool.add_parser("build", help="generate a pool and write it as a label matrix")
    _add_dataset(pb)
    _add_pool(pb)
    pb.add_argument("--seed", type=int, required=True)
    pb.add_argument("--out", required=True)
    pb.set_defaults(func=cmd_pool_build)

    run = sub.add_parser("run", help="repeated-ensemble experiment")
    _add_experiment(run)
    run.set_defaults(func=cmd_run)

    ill = sub.add_parser("sweep-ill", help="experiment per ill-clustering ratio")
    _add_experiment(ill)
    ill.add_argument("--ratios", type=_csv_list(float), default=[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    ill.set_defaults(func=cmd_sweep_ill)

    tm = sub.add_parser("sweep-time", help="wall-clock per method over dataset prefixes")
    _add_experiment(tm)
    tm.add_argument("--sizes", type=_csv_list(int), required=True)
    tm.add_argument("--repeats", type=int, default=3)
    tm.add_argument("--memory-limit-mb", type=float, default=2048.0, help="0 disables the guard")
    tm.set_defaults(func=cmd_sweep_time)

    ev = sub.add_parser("eval", help="NMI between two label files")
    ev.add_argument("a")
    ev.add_argument("b")
    ev.add_argument("--column", type=_label_column, default=None, help="label column if the files have several")
    ev.set_defaults(func=cmd_eval)

    rep = sub.add_parser("report", help="report maintenance").add_subparsers(dest="report_command", required=True)
    rc = rep.add_parser("recompute", help="rebuild NAME.agg.csv from NAME.rows.csv")
    rc.add_argument("name")
    rc.add_argument("--check", action="store_true", help="compare instead of overwrite")
    rc.set_defaults(func=cmd_report_recompute)
    rr = rep.add_parser("replay", help="re-execute the config embedded in NAME.json")
    rr.add_argument("name")
    rr.add_argument("--out", required=True)
    rr.set_defaults(func=cmd_report_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args) or 0
    except CrowdClustError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
