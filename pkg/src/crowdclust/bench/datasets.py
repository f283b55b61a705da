"""Dataset ingestion for the benchmark harness.

Text files are delimited numeric rows with an optional header and an optional
label column. A few names resolve to built-in datasets instead of paths:
``iris`` and ``wine`` (bundled with scikit-learn), ``seeds`` (read from the
file named by ``$CROWDCLUST_SEEDS``) and ``gmm`` (a seeded synthetic
Gaussian mixture, e.g. ``gmm:n=8000,d=10,k=8,seed=0``).
"""

from __future__ import annotations

import math
import os
from pathlib import Path

import numpy as np

from ..exceptions import IngestError
from ..generators import Dataset, standardize

SEEDS_ENV = "CROWDCLUST_SEEDS"
MISSING = {"", "?", "na", "nan", "null"}


def _sniff_delimiter(line: str) -> str | None:
    if "," in line:
        return ","
    if "\t" in line:
        return "\t"
    if ";" in line:
        return ";"
    return None  # runs of whitespace


def _split(line: str, delimiter: str | None) -> list[str]:
    if delimiter is None:
        return line.split()
    return [c.strip() for c in line.split(delimiter)]


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _canonical_labels(raw: list[str]) -> np.ndarray:
    # numeric labels sort numerically, anything else lexically
    if all(_is_number(c) for c in raw):
        keys = np.array([float(c) for c in raw])
    else:
        keys = np.array(raw, dtype=object).astype(str)
    _, inv = np.unique(keys, return_inverse=True)
    return inv.astype(np.intp)


def load_dataset(
    path,
    has_header: bool | None = None,
    label_column: int | str | None = -1,
    normalize: bool = True,
    delimiter: str | None = "auto",
    name: str | None = None,
) -> Dataset:
    """Read a delimited text file into a :class:`Dataset`.

    ``delimiter="auto"`` picks comma, tab or semicolon from the first data
    line and otherwise splits on whitespace runs (``delimiter=None`` forces
    the latter). ``has_header=None`` treats the first line as a header when
    any of its feature cells is non-numeric. ``label_column`` is a column
    index (negative counts from the end), a header name, or None for
    unlabelled data. Labels become 0-based class ids. Features are z-scored
    per column when ``normalize`` is true.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    lines = [(i + 1, ln.rstrip("\r\n")) for i, ln in enumerate(text.splitlines())]
    lines = [(no, ln) for no, ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise IngestError(f"{path} has no data rows")
    if delimiter == "auto":
        delimiter = _sniff_delimiter(lines[0][1])

    first = _split(lines[0][1], delimiter)
    width = len(first)
    if isinstance(label_column, str):
        if has_header is False:
            raise IngestError("a label column given by name needs a header row")
        has_header = True
        if label_column not in first:
            raise IngestError(f"no column named {label_column!r} in header", line=lines[0][0])
        label_idx = first.index(label_column)
    elif label_column is None:
        label_idx = None
    else:
        label_idx = int(label_column)
        if not -width <= label_idx < width:
            raise IngestError(f"label column {label_idx} out of range for {width} columns")
        label_idx %= width
    feature_idx = [j for j in range(width) if j != label_idx]
    if not feature_idx:
        raise IngestError("no feature columns left after removing the label column")
    if has_header is None:
        has_header = not all(_is_number(first[j]) for j in feature_idx)
    body = lines[1:] if has_header else lines
    if not body:
        raise IngestError(f"{path} has a header but no data rows")

    X = np.empty((len(body), len(feature_idx)))
    raw_labels = []
    for r, (no, ln) in enumerate(body):
        cells = _split(ln, delimiter)
        if len(cells) != width:
            raise IngestError(f"expected {width} columns, found {len(cells)}", line=no)
        for c, j in enumerate(feature_idx):
            cell = cells[j]
            if cell.lower() in MISSING:
                raise IngestError(f"missing value in column {j + 1}", line=no)
            try:
                v = float(cell)
            except ValueError:
                raise IngestError(f"non-numeric value {cell!r} in column {j + 1}", line=no) from None
            if not math.isfinite(v):
                raise IngestError(f"non-finite value {cell!r} in column {j + 1}", line=no)
            X[r, c] = v
        if label_idx is not None:
            cell = cells[label_idx]
            if cell.lower() in MISSING:
                raise IngestError("missing class label", line=no)
            raw_labels.append(cell)
    if X.shape[0] < 2:
        raise IngestError(f"need at least 2 data rows, found {X.shape[0]}")
    y = _canonical_labels(raw_labels) if label_idx is not None else None
    if normalize:
        X = standardize(X)
    return Dataset(X, y, name or path.stem)


def _builtin_sklearn(which: str, normalize: bool) -> Dataset:
    from sklearn import datasets

    bunch = {"iris": datasets.load_iris, "wine": datasets.load_wine}[which]()
    X = np.asarray(bunch.data, dtype=float)
    return Dataset(standardize(X) if normalize else X, bunch.target, which)


def gaussian_mixture(
    n: int, d: int = 10, k: int = 8, spread: float = 6.0, seed: int = 0
) -> Dataset:
    """Isotropic unit-variance Gaussian blobs with means drawn from N(0, spread^2).

    Rows come out in random order, so any prefix is itself a fair sample of
    the mixture.
    """
    if n < 2 or d < 1 or k < 1:
        raise ValueError(f"need n >= 2, d >= 1, k >= 1; got n={n}, d={d}, k={k}")
    rng = np.random.default_rng(seed)
    means = rng.normal(0.0, spread, size=(k, d))
    y = rng.integers(k, size=n)
    X = means[y] + rng.normal(size=(n, d))
    return Dataset(X, y, f"gmm-n{n}-d{d}-k{k}-s{seed}")


def _parse_params(text: str) -> dict[str, int]:
    out = {}
    for item in filter(None, text.split(",")):
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {item!r}")
        out[key.strip()] = int(val)
    return out


def resolve_dataset(spec: str, **options) -> Dataset:
    """Turn a dataset name or path into a :class:`Dataset`.

    ``options`` are passed to :func:`load_dataset` for file paths; only
    ``normalize`` applies to the built-in names.
    """
    normalize = options.get("normalize", True)
    head, _, tail = spec.partition(":")
    if spec in ("iris", "wine"):
        return _builtin_sklearn(spec, normalize)
    if spec == "seeds":
        path = os.environ.get(SEEDS_ENV)
        if not path:
            raise IngestError(
                f"the seeds dataset is not bundled; point ${SEEDS_ENV} at seeds_dataset.txt"
            )
        ds = load_dataset(path, has_header=False, label_column=-1, normalize=normalize, delimiter=None)
        return Dataset(ds.features, ds.true_labels, "seeds")
    if head == "gmm":
        params = {"n": 8000, "d": 10, "k": 8, "seed": 0}
        params.update(_parse_params(tail))
        unknown = set(params) - {"n", "d", "k", "seed"}
        if unknown:
            raise ValueError(f"unknown gmm parameters {sorted(unknown)}")
        ds = gaussian_mixture(params["n"], params["d"], params["k"], seed=params["seed"])
        return Dataset(standardize(ds.features) if normalize else ds.features, ds.true_labels, spec)
    return load_dataset(spec, **options)
