"""Tabular ingestion: CSV loading, discretization, and binary feature encoding.

Numeric attributes are cut into a handful of bins (quantile edges by default,
3 bins per attribute), categorical attributes get one indicator per observed
category. Every raw row then maps to a 0/1 vector whose coordinates are the
interpretable features the rest of the package works with. Missing and unseen
values map to an all-zero block; the pipeline never rejects a row for them.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import ContractViolation, Instance

MISSING_MARKERS = {"", "na", "n/a", "nan", "null", "none", "?"}

DEFAULT_BIN_COUNT = 3
DEFAULT_STRATEGY = "quantile"
DEFAULT_SPLIT_RATIO = 0.7


class DataError(Exception):
    """Unusable input data; carries a line number when one is known."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def _is_missing(raw: str) -> bool:
    return raw.strip().lower() in MISSING_MARKERS


def _parse_numeric(raw: str) -> Optional[float]:
    try:
        value = float(raw)
    except ValueError:
        return None
    return value


@dataclass(frozen=True, eq=False)
class Column:
    name: str
    kind: str  # "numeric" | "categorical"
    # numeric: float with nan for missing; categorical: str or None
    values: tuple


@dataclass(frozen=True, eq=False)
class RawDataset:
    columns: Tuple[Column, ...]
    target_name: str
    target: Tuple[str, ...]
    n_rows: int

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)


def load_csv(
    path: Union[str, Path],
    *,
    target: str,
    kinds: Optional[Dict[str, str]] = None,
) -> RawDataset:
    """Load a header-equipped CSV into typed columns.

    Column kinds come from `kinds` when given, otherwise a column is numeric
    iff every non-missing value parses as a number. Missing markers (empty,
    NA, ?, ...) are recorded as missing without changing the column kind.
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}")
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("file is empty")
        header = [h.strip() for h in header]
        if target not in header:
            raise DataError(f"target column {target!r} not found in header {header}")
        rows: List[List[str]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"expected {len(header)} fields, got {len(row)}", line=lineno
                )
            rows.append([cell.strip() for cell in row])

    kinds = dict(kinds or {})
    for name in kinds:
        if name not in header:
            raise DataError(f"schema names unknown column {name!r}")
        if kinds[name] not in ("numeric", "categorical"):
            raise DataError(f"schema kind for {name!r} must be numeric or categorical")

    target_idx = header.index(target)
    target_values = tuple(row[target_idx] for row in rows)
    for lineno, value in enumerate(target_values, start=2):
        if _is_missing(value):
            raise DataError("target value is missing", line=lineno)

    columns = []
    for idx, name in enumerate(header):
        if idx == target_idx:
            continue
        raw_values = [row[idx] for row in rows]
        kind = kinds.get(name)
        if kind is None:
            parsed = [_parse_numeric(rv) for rv in raw_values if not _is_missing(rv)]
            kind = "numeric" if parsed and all(p is not None for p in parsed) else "categorical"
            if not parsed:
                kind = "categorical"
        if kind == "numeric":
            vals = []
            for lineno, rv in enumerate(raw_values, start=2):
                if _is_missing(rv):
                    vals.append(math.nan)
                    continue
                p = _parse_numeric(rv)
                if p is None:
                    raise DataError(
                        f"column {name!r} declared numeric but value {rv!r} does not parse",
                        line=lineno,
                    )
                vals.append(p)
            columns.append(Column(name=name, kind="numeric", values=tuple(vals)))
        else:
            vals = tuple(None if _is_missing(rv) else rv for rv in raw_values)
            columns.append(Column(name=name, kind="categorical", values=vals))
    return RawDataset(
        columns=tuple(columns),
        target_name=target,
        target=target_values,
        n_rows=len(rows),
    )


@dataclass(frozen=True)
class AttributeEncoding:
    """Per-attribute piece of a fitted binarizer."""

    name: str
    kind: str
    edges: Tuple[float, ...] = ()  # numeric: interior bin edges, strictly increasing
    categories: Tuple[str, ...] = ()  # categorical: observed categories, sorted

    @property
    def width(self) -> int:
        return len(self.edges) + 1 if self.kind == "numeric" else len(self.categories)

    def feature_names(self) -> List[str]:
        if self.kind == "categorical":
            return [f"{self.name} = {c}" for c in self.categories]
        e = self.edges
        if not e:
            return [f"{self.name}: any"]
        names = [f"{self.name} < {e[0]:.6g}"]
        for a, b in zip(e, e[1:]):
            names.append(f"{self.name} ∈ [{a:.6g},{b:.6g})")
        names.append(f"{self.name} ≥ {e[-1]:.6g}")
        return names


@dataclass(frozen=True, eq=False)
class Binarizer:
    attributes: Tuple[AttributeEncoding, ...]
    bin_count: int
    strategy: str

    @property
    def dimension(self) -> int:
        return sum(a.width for a in self.attributes)

    @property
    def feature_names(self) -> Tuple[str, ...]:
        names: List[str] = []
        for a in self.attributes:
            names.extend(a.feature_names())
        return tuple(names)


def _numeric_edges(values: np.ndarray, bin_count: int, strategy: str) -> Tuple[float, ...]:
    values = values[~np.isnan(values)]
    if values.size == 0:
        return ()
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return ()
    if strategy == "quantile":
        qs = [i / bin_count for i in range(1, bin_count)]
        edges = np.quantile(values, qs)
    elif strategy == "uniform":
        edges = np.linspace(lo, hi, bin_count + 1)[1:-1]
    else:
        raise ContractViolation(f"unknown binning strategy {strategy!r}")
    # Keep edges that actually separate values; collapsed quantiles degrade
    # the attribute to fewer bins instead of emitting dead indicators.
    kept = []
    for e in np.unique(edges):
        e = float(e)
        if lo < e <= hi:
            kept.append(e)
    return tuple(kept)


def fit_binarizer(
    ds: RawDataset,
    bin_count: int = DEFAULT_BIN_COUNT,
    strategy: str = DEFAULT_STRATEGY,
    row_indices: Optional[Sequence[int]] = None,
) -> Binarizer:
    """Fit bin edges / category maps, reading only `row_indices` (train rows)."""
    if bin_count < 2:
        raise ContractViolation(f"bin count must be >= 2, got {bin_count}")
    if ds.n_rows == 0:
        raise DataError("cannot fit a binarizer on an empty dataset")
    idx = list(range(ds.n_rows)) if row_indices is None else [int(i) for i in row_indices]
    if not idx:
        raise DataError("cannot fit a binarizer on an empty row selection")
    attrs = []
    for col in ds.columns:
        if col.kind == "numeric":
            vals = np.array([col.values[i] for i in idx], dtype=float)
            attrs.append(
                AttributeEncoding(
                    name=col.name,
                    kind="numeric",
                    edges=_numeric_edges(vals, bin_count, strategy),
                )
            )
        else:
            cats = sorted({col.values[i] for i in idx if col.values[i] is not None})
            attrs.append(
                AttributeEncoding(name=col.name, kind="categorical", categories=tuple(cats))
            )
    return Binarizer(attributes=tuple(attrs), bin_count=bin_count, strategy=strategy)


@dataclass(eq=False)
class BinaryDataset:
    dimension: int
    instances: np.ndarray  # (n, d) uint8
    labels: np.ndarray  # (n,) uint8
    feature_names: Tuple[str, ...]
    train_indices: np.ndarray
    test_indices: np.ndarray
    target_name: str = ""
    positive_class: str = ""
    class_names: Tuple[str, ...] = ()

    @property
    def n_rows(self) -> int:
        return int(self.instances.shape[0])

    def instance(self, i: int) -> Instance:
        return Instance.from_iterable(self.instances[i])


def choose_positive_class(target: Sequence[str], positive_class: Optional[str]) -> str:
    """Pick the class mapped to label 1: explicit choice, or the second of two
    sorted classes, or the majority class (ties lexicographic) beyond two."""
    classes = sorted(set(target))
    if positive_class is not None:
        if positive_class not in classes:
            raise DataError(f"positive class {positive_class!r} not among {classes}")
        return positive_class
    if len(classes) == 2:
        return classes[1]
    counts = {c: 0 for c in classes}
    for t in target:
        counts[t] += 1
    return min(classes, key=lambda c: (-counts[c], c))


def binarize(
    b: Binarizer,
    ds: RawDataset,
    *,
    positive_class: Optional[str] = None,
    train_indices: Optional[Sequence[int]] = None,
    test_indices: Optional[Sequence[int]] = None,
) -> BinaryDataset:
    """Encode every row as a 0/1 vector; labels become one-vs-rest binary."""
    fitted = {a.name for a in b.attributes}
    present = {c.name for c in ds.columns}
    if fitted != present:
        raise ContractViolation(
            f"binarizer fitted on columns {sorted(fitted)}, dataset has {sorted(present)}"
        )
    n = ds.n_rows
    d = b.dimension
    X = np.zeros((n, d), dtype=np.uint8)
    offset = 0
    for attr in b.attributes:
        col = ds.column(attr.name)
        if attr.kind == "numeric":
            vals = np.array(col.values, dtype=float)
            ok = ~np.isnan(vals)
            # searchsorted clamps out-of-range values into the edge bins
            bins = np.searchsorted(np.array(attr.edges), vals[ok], side="right")
            rows = np.nonzero(ok)[0]
            X[rows, offset + bins] = 1
        else:
            cat_index = {c: i for i, c in enumerate(attr.categories)}
            for i, value in enumerate(col.values):
                slot = cat_index.get(value) if value is not None else None
                if slot is not None:
                    X[i, offset + slot] = 1
        offset += attr.width

    pos = choose_positive_class(ds.target, positive_class)
    labels = np.array([1 if t == pos else 0 for t in ds.target], dtype=np.uint8)
    train = np.array(sorted(train_indices), dtype=np.int64) if train_indices is not None else np.arange(n, dtype=np.int64)
    test = np.array(sorted(test_indices), dtype=np.int64) if test_indices is not None else np.zeros(0, dtype=np.int64)
    return BinaryDataset(
        dimension=d,
        instances=X,
        labels=labels,
        feature_names=b.feature_names,
        train_indices=train,
        test_indices=test,
        target_name=ds.target_name,
        positive_class=pos,
        class_names=tuple(sorted(set(ds.target))),
    )


def split_indices(n: int, ratio: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Deterministic shuffled train/test split; both sides nonempty when n >= 2."""
    if not 0 < ratio < 1:
        raise ContractViolation(f"split ratio must be in (0,1), got {ratio}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(n * ratio))
    n_train = min(max(n_train, 1), n - 1) if n >= 2 else n
    train = np.sort(perm[:n_train])
    test = np.sort(perm[n_train:])
    return train.astype(np.int64), test.astype(np.int64)


# ---------------------------------------------------------------------------
# Manifest and on-disk artifacts
# ---------------------------------------------------------------------------


def load_manifest(path: Union[str, Path]) -> dict:
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except OSError as e:
        raise DataError(f"cannot read manifest {path}: {e}")
    except json.JSONDecodeError as e:
        raise DataError(f"manifest {path} is not valid JSON: {e}")
    if not isinstance(manifest, dict) or "target" not in manifest:
        raise DataError("manifest must be a JSON object with a 'target' key")
    return manifest


def prepare(csv_path: Union[str, Path], manifest: dict) -> Tuple[BinaryDataset, Binarizer]:
    """Full preparation: load, split, fit bins on the train rows, encode all rows."""
    ds = load_csv(
        csv_path,
        target=manifest["target"],
        kinds=manifest.get("columns"),
    )
    if ds.n_rows == 0:
        raise DataError("dataset has no rows")
    ratio = float(manifest.get("split_ratio", DEFAULT_SPLIT_RATIO))
    seed = int(manifest.get("split_seed", 0))
    train, test = split_indices(ds.n_rows, ratio, seed)
    binarizer = fit_binarizer(
        ds,
        bin_count=int(manifest.get("bin_count", DEFAULT_BIN_COUNT)),
        strategy=manifest.get("strategy", DEFAULT_STRATEGY),
        row_indices=train,
    )
    bds = binarize(
        binarizer,
        ds,
        positive_class=manifest.get("positive_class"),
        train_indices=train,
        test_indices=test,
    )
    return bds, binarizer


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False) + "\n")


def save_prepared(
    out_dir: Union[str, Path], bds: BinaryDataset, binarizer: Binarizer, effective_config: dict
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = {
        "dimension": bds.dimension,
        "feature_names": list(bds.feature_names),
        "instances": ["".join(str(int(x)) for x in row) for row in bds.instances],
        "labels": [int(y) for y in bds.labels],
        "split": {
            "train": [int(i) for i in bds.train_indices],
            "test": [int(i) for i in bds.test_indices],
        },
        "target": bds.target_name,
        "positive_class": bds.positive_class,
        "class_names": list(bds.class_names),
    }
    _dump_json(out / "dataset.json", dataset)
    desc = {
        "bin_count": binarizer.bin_count,
        "strategy": binarizer.strategy,
        "dimension": binarizer.dimension,
        "feature_names": list(binarizer.feature_names),
        "attributes": [
            {
                "name": a.name,
                "kind": a.kind,
                "edges": list(a.edges),
                "categories": list(a.categories),
            }
            for a in binarizer.attributes
        ],
    }
    _dump_json(out / "binarizer.json", desc)
    _dump_json(out / "effective_config.json", effective_config)


def load_prepared(in_dir: Union[str, Path]) -> Tuple[BinaryDataset, Binarizer]:
    folder = Path(in_dir)
    try:
        dataset = json.loads((folder / "dataset.json").read_text())
        desc = json.loads((folder / "binarizer.json").read_text())
    except OSError as e:
        raise DataError(f"cannot read prepared dataset in {folder}: {e}")
    X = np.array(
        [[int(c) for c in row] for row in dataset["instances"]], dtype=np.uint8
    )
    if X.size == 0:
        X = X.reshape(0, dataset["dimension"])
    bds = BinaryDataset(
        dimension=int(dataset["dimension"]),
        instances=X,
        labels=np.array(dataset["labels"], dtype=np.uint8),
        feature_names=tuple(dataset["feature_names"]),
        train_indices=np.array(dataset["split"]["train"], dtype=np.int64),
        test_indices=np.array(dataset["split"]["test"], dtype=np.int64),
        target_name=dataset.get("target", ""),
        positive_class=dataset.get("positive_class", ""),
        class_names=tuple(dataset.get("class_names", ())),
    )
    binarizer = Binarizer(
        attributes=tuple(
            AttributeEncoding(
                name=a["name"],
                kind=a["kind"],
                edges=tuple(a["edges"]),
                categories=tuple(a["categories"]),
            )
            for a in desc["attributes"]
        ),
        bin_count=int(desc["bin_count"]),
        strategy=desc["strategy"],
    )
    return bds, binarizer
