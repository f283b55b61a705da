"""Report files: CSV tables, a JSON mirror, and plot-ready series.

A run named ``NAME`` produces ``NAME.rows.csv`` (one NMI cell per line),
``NAME.agg.csv`` (aggregates recomputable from the rows) and ``NAME.json``
(config, dataset facts, rows and aggregates). Sweeps prefix every row with
the swept value ``x`` and add ``NAME.series.csv``. Floats are written with
``repr`` so they read back exactly, which makes the files byte-stable.

Wall-clock measurements are not reproducible, so they never go into those
files: a time sweep writes them to ``NAME.times.csv``, ``NAME.series.csv``
and ``NAME.fit.csv`` instead.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .. import __version__
from ..exceptions import ReportIOError
from .experiment import (
    Aggregate,
    ExperimentConfig,
    ExperimentReport,
    Row,
    Scope,
    SweepReport,
    compute_aggregates,
)

SCHEMA_VERSION = 1
ROW_FIELDS = ("run", "name", "member", "k", "nmi", "error")
AGG_FIELDS = ("metric", "method", "k", "value", "count")
SERIES_FIELDS = ("x", "method", "mean", "stderr")
TIME_FIELDS = ("size", "method", "rep", "seconds", "status")
FIT_FIELDS = ("method", "loglog_slope")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _table(header, records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for rec in records:
        w.writerow([_cell(v) for v in rec])
    return buf.getvalue()


def _row_tuple(r: Row):
    return (r.run, r.name, r.member, r.k, r.nmi, r.error)


def _agg_tuple(a: Aggregate):
    return (a.metric, a.method, a.k, a.value, a.count)


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc}") from exc
    return path


def _x(v):
    return float(v) if isinstance(v, float) else v


def _report_doc(rep: ExperimentReport) -> dict:
    return {
        "scope": {"true_k": rep.scope.true_k, "k_lo": rep.scope.k_lo, "k_hi": rep.scope.k_hi},
        "dataset": rep.dataset,
        "pool": rep.pool,
        "rows": [dict(zip(ROW_FIELDS, _row_tuple(r))) for r in rep.rows],
        "aggregates": [dict(zip(AGG_FIELDS, _agg_tuple(a))) for a in rep.aggregates],
    }


def to_document(report) -> dict:
    """JSON-ready dict mirroring the CSV tables."""
    doc = {"schema_version": SCHEMA_VERSION, "package_version": __version__}
    if isinstance(report, ExperimentReport):
        doc.update(kind="run", config=report.config.to_dict(), **_report_doc(report))
        return doc
    doc.update(kind=f"sweep-{report.kind}", config=report.config.to_dict())
    doc["sweep"] = {"xs": list(report.xs)}
    if report.kind == "time":
        doc["sweep"]["repeats"] = report.extra["repeats"]
    else:
        doc["series"] = [dict(zip(SERIES_FIELDS, s)) for s in report.series]
    doc["reports"] = [dict(x=_x(x), **_report_doc(r)) for x, r in zip(report.xs, report.reports)]
    return doc


def emit_report(report, prefix, formats=("csv", "json")) -> list[Path]:
    """Write ``report`` next to ``prefix`` and return the paths written.

    Emitting the same report twice yields identical bytes.
    """
    prefix = Path(prefix)
    formats = set(formats)
    unknown = formats - {"csv", "json"}
    if unknown:
        raise ValueError(f"unknown formats {sorted(unknown)}")
    out = []
    if "csv" in formats:
        if isinstance(report, ExperimentReport):
            rows = [_row_tuple(r) for r in report.rows]
            aggs = [_agg_tuple(a) for a in report.aggregates]
            out.append(_write(prefix.with_name(prefix.name + ".rows.csv"), _table(ROW_FIELDS, rows)))
            out.append(_write(prefix.with_name(prefix.name + ".agg.csv"), _table(AGG_FIELDS, aggs)))
        else:
            rows = [(x, *_row_tuple(r)) for x, rep in zip(report.xs, report.reports) for r in rep.rows]
            aggs = [(x, *_agg_tuple(a)) for x, rep in zip(report.xs, report.reports) for a in rep.aggregates]
            out.append(_write(prefix.with_name(prefix.name + ".rows.csv"), _table(("x",) + ROW_FIELDS, rows)))
            out.append(_write(prefix.with_name(prefix.name + ".agg.csv"), _table(("x",) + AGG_FIELDS, aggs)))
            out.append(_write(prefix.with_name(prefix.name + ".series.csv"), _table(SERIES_FIELDS, report.series)))
            if report.kind == "time":
                out.extend(_emit_times(report, prefix))
    if "json" in formats:
        text = json.dumps(to_document(report), indent=1, sort_keys=True, allow_nan=False) + "\n"
        out.append(_write(prefix.with_name(prefix.name + ".json"), text))
    return out


def _emit_times(report: SweepReport, prefix: Path) -> list[Path]:
    recs = []
    for size, m, secs, status in report.extra["times"]:
        if not secs:
            recs.append((size, m, None, None, status))
        recs.extend((size, m, i, s, status) for i, s in enumerate(secs))
    fits = [(m, s) for m, s in report.extra["slopes"].items()]
    return [
        _write(prefix.with_name(prefix.name + ".times.csv"), _table(TIME_FIELDS, recs)),
        _write(prefix.with_name(prefix.name + ".fit.csv"), _table(FIT_FIELDS, fits)),
    ]


def _read(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as exc:
        raise ReportIOError(f"cannot read {path}: {exc}") from exc


def _parse_row(rec: dict) -> Row:
    return Row(
        run=int(rec["run"]),
        name=rec["name"],
        member=int(rec["member"]),
        k=int(rec["k"]),
        nmi=float(rec["nmi"]) if rec["nmi"] != "" else None,
        error=rec["error"],
    )


def read_rows(path) -> list[tuple[object, Row]]:
    """Rows of a rows file as ``(x, Row)``; ``x`` is None for a plain run."""
    text = _read(Path(path))
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        x = rec.pop("x", None)
        out.append((None if x is None else _parse_x(x), _parse_row(rec)))
    return out


def _parse_x(text: str):
    return int(text) if text.lstrip("-").isdigit() else float(text)


def load_document(prefix) -> dict:
    prefix = Path(prefix)
    doc = json.loads(_read(prefix.with_name(prefix.name + ".json")))
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ReportIOError(f"unsupported schema version {doc.get('schema_version')!r}")
    return doc


def _scope(d: dict) -> Scope:
    return Scope(d["true_k"], d["k_lo"], d["k_hi"])


def recompute(prefix) -> str:
    """Rebuild the aggregates table from ``NAME.rows.csv`` and ``NAME.json``.

    Returns the CSV text; it equals ``NAME.agg.csv`` whenever the rows file
    is the one the run wrote.
    """
    prefix = Path(prefix)
    doc = load_document(prefix)
    config = ExperimentConfig.from_dict(doc["config"])
    rows = read_rows(prefix.with_name(prefix.name + ".rows.csv"))
    if doc["kind"] == "run":
        aggs = compute_aggregates([r for _, r in rows], config, _scope(doc["scope"]))
        return _table(AGG_FIELDS, [_agg_tuple(a) for a in aggs])
    if doc["kind"] == "sweep-time":
        config = ExperimentConfig.from_dict({**doc["config"], "runs": 1})
    recs = []
    for sub in doc["reports"]:
        x = sub["x"]
        mine = [r for xx, r in rows if xx == x]
        for a in compute_aggregates(mine, config, _scope(sub["scope"])):
            recs.append((x, *_agg_tuple(a)))
    return _table(("x",) + AGG_FIELDS, recs)
