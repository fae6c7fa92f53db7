"""Feature matrices with labels and per-column provenance.

A dataset is a dense ``samples x features`` matrix of activations, one integer
class id per sample, and a block tag per column recording which upstream
representation produced the column (e.g. ``"material"`` or ``"object"``).

Text format
-----------
Comma-separated, UTF-8. The first non-comment line is the header; exactly one
column is named ``label`` and holds non-negative integers, every other column
holds decimal reals. Lines starting with ``#`` are comments, except that
``# class_count = N`` fixes the number of classes explicitly.
"""

from __future__ import annotations

import csv
import io
import math
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

LABEL_COLUMN = "label"
UNKNOWN_TAG = "unknown"

_CLASS_COUNT_RE = re.compile(r"^#\s*class_count\s*=\s*(\S+)\s*$")


class DatasetError(ValueError):
    """Base class for dataset loading and validation failures."""

    code = "E_DATA"


class ParseError(DatasetError):
    code = "E_PARSE"


class LabelError(DatasetError):
    code = "E_LABEL"


class SchemaError(DatasetError):
    code = "E_SCHEMA"


class AlignmentError(DatasetError):
    code = "E_ALIGN"


@dataclass(frozen=True)
class ProvenanceManifest:
    """Mapping from feature-name prefix to block tag."""

    prefixes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        keys = list(self.prefixes)
        for p in keys:
            if not p:
                raise SchemaError("manifest prefixes must be non-empty")
        for a in keys:
            for b in keys:
                if a != b and b.startswith(a):
                    raise SchemaError(
                        f"manifest prefixes overlap: {a!r} is a prefix of {b!r}"
                    )
        object.__setattr__(self, "prefixes", dict(self.prefixes))

    def tag_for(self, name: str) -> str:
        best = None
        for prefix in self.prefixes:
            if name.startswith(prefix) and (best is None or len(prefix) > len(best)):
                best = prefix
        return UNKNOWN_TAG if best is None else self.prefixes[best]

    def tags_for(self, names: Sequence[str]) -> tuple[str, ...]:
        return tuple(self.tag_for(n) for n in names)


class LabeledDataset:
    """Immutable feature matrix with integer labels.

    Parameters
    ----------
    features : array_like, shape (n_samples, n_features)
        Real activations. Stored column-major because every hot loop scans a
        single feature column.
    labels : array_like of int, shape (n_samples,)
        Class ids in ``[0, class_count)``.
    class_count : int, optional
        Number of classes ``C``. Defaults to ``1 + max(labels)``.
    feature_names : sequence of str, optional
        Unique column names. Defaults to ``f0, f1, ...``.
    provenance : sequence of str, optional
        Block tag per column. Defaults to ``"unknown"`` everywhere.
    class_names : mapping of str to int, optional
        Sidecar mapping from class name to id. Defaults to the decimal id.
    """

    __slots__ = (
        "_features",
        "_labels",
        "_class_count",
        "_feature_names",
        "_provenance",
        "_class_names",
    )

    def __init__(
        self,
        features,
        labels,
        class_count: int | None = None,
        feature_names: Sequence[str] | None = None,
        provenance: Sequence[str] | None = None,
        class_names: Mapping[str, int] | None = None,
    ):
        X = np.array(features, dtype=np.float64, order="F", copy=True)
        if X.ndim != 2:
            raise SchemaError(f"features must be 2-D, got shape {X.shape}")
        y_raw = np.asarray(labels)
        if y_raw.ndim != 1:
            raise LabelError("labels must be a 1-D vector")
        if y_raw.size and not np.issubdtype(y_raw.dtype, np.integer):
            if not np.all(np.equal(np.mod(y_raw, 1), 0)):
                raise LabelError("labels must be integers")
        y = y_raw.astype(np.int64)
        n, d = X.shape
        if n < 1:
            raise SchemaError("dataset needs at least one sample")
        if y.shape[0] != n:
            raise SchemaError(f"{n} feature rows but {y.shape[0]} labels")
        if not np.all(np.isfinite(X)):
            raise ParseError("feature values must be finite")
        if np.any(y < 0):
            raise LabelError("labels must be non-negative")
        observed = int(y.max()) + 1
        if class_count is None:
            class_count = max(observed, 2)
        class_count = int(class_count)
        if class_count < 2:
            raise LabelError("class_count must be at least 2")
        if observed > class_count:
            raise LabelError(
                f"label {observed - 1} outside [0, {class_count}) for class_count={class_count}"
            )

        if feature_names is None:
            feature_names = [f"f{j}" for j in range(d)]
        names = tuple(str(s) for s in feature_names)
        if len(names) != d:
            raise SchemaError(f"{len(names)} feature names for {d} columns")
        if len(set(names)) != d:
            dup = sorted({s for s in names if names.count(s) > 1})
            raise SchemaError(f"duplicate feature names: {dup}")
        if provenance is None:
            provenance = [UNKNOWN_TAG] * d
        tags = tuple(str(s) for s in provenance)
        if len(tags) != d:
            raise SchemaError(f"{len(tags)} provenance tags for {d} columns")
        if class_names is None:
            class_names = {str(c): c for c in range(class_count)}

        X.setflags(write=False)
        y.setflags(write=False)
        self._features = X
        self._labels = y
        self._class_count = class_count
        self._feature_names = names
        self._provenance = tags
        self._class_names = dict(class_names)

    features = property(lambda self: self._features)
    labels = property(lambda self: self._labels)
    class_count = property(lambda self: self._class_count)
    feature_names = property(lambda self: self._feature_names)
    provenance = property(lambda self: self._provenance)
    class_names = property(lambda self: dict(self._class_names))

    @property
    def n_samples(self) -> int:
        return self._features.shape[0]

    @property
    def n_features(self) -> int:
        return self._features.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self._features[:, j]

    def blocks(self) -> list[str]:
        """Distinct provenance tags in order of first appearance."""
        return list(dict.fromkeys(self._provenance))

    def columns_in_block(self, tag: str) -> list[int]:
        return [j for j, t in enumerate(self._provenance) if t == tag]

    def select_columns(self, columns: Sequence[int]) -> "LabeledDataset":
        cols = list(columns)
        return LabeledDataset(
            self._features[:, cols].reshape(self.n_samples, len(cols)),
            self._labels,
            class_count=self._class_count,
            feature_names=[self._feature_names[j] for j in cols],
            provenance=[self._provenance[j] for j in cols],
            class_names=self._class_names,
        )

    def select_rows(self, rows: Sequence[int]) -> "LabeledDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return LabeledDataset(
            self._features[rows, :],
            self._labels[rows],
            class_count=self._class_count,
            feature_names=self._feature_names,
            provenance=self._provenance,
            class_names=self._class_names,
        )

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self._class_count == other._class_count
            and self._feature_names == other._feature_names
            and self._provenance == other._provenance
            and np.array_equal(self._labels, other._labels)
            and np.array_equal(self._features, other._features)
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"LabeledDataset(n_samples={self.n_samples}, n_features={self.n_features}, "
            f"class_count={self._class_count})"
        )


def concatenate(a: LabeledDataset, b: LabeledDataset) -> LabeledDataset:
    """Join two datasets column-wise, ``a``'s columns first."""
    if a.n_samples != b.n_samples:
        raise AlignmentError(f"row counts differ: {a.n_samples} vs {b.n_samples}")
    mismatch = np.flatnonzero(a.labels != b.labels)
    if mismatch.size:
        raise AlignmentError(f"label vectors differ at row {int(mismatch[0])}")
    if a.class_count != b.class_count:
        raise AlignmentError(
            f"class counts differ: {a.class_count} vs {b.class_count}"
        )
    clash = sorted(set(a.feature_names) & set(b.feature_names))
    if clash:
        raise SchemaError(f"feature name collision across inputs: {clash}")
    return LabeledDataset(
        np.hstack([a.features, b.features]),
        a.labels,
        class_count=a.class_count,
        feature_names=a.feature_names + b.feature_names,
        provenance=a.provenance + b.provenance,
        class_names=a.class_names,
    )


def load_manifest(path) -> ProvenanceManifest:
    """Read ``prefix = tag`` lines; blank lines and ``#`` comments are skipped."""
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"{path}: line {lineno}: expected 'prefix = tag'")
            prefix, tag = (s.strip() for s in line.split("=", 1))
            if prefix in mapping:
                raise SchemaError(f"{path}: line {lineno}: duplicate prefix {prefix!r}")
            mapping[prefix] = tag
    return ProvenanceManifest(mapping)


def load_dataset(
    features_path,
    manifest: ProvenanceManifest | None = None,
    class_count: int | None = None,
) -> LabeledDataset:
    """Parse a columnar text file into a validated :class:`LabeledDataset`.

    Row numbers in error messages count data rows from 1, header excluded.
    An explicit ``class_count`` argument wins over a ``# class_count`` line.
    """
    path = Path(features_path)
    if not path.is_file():
        raise FileNotFoundError(f"no such features file: {path}")
    manifest = manifest or ProvenanceManifest()

    file_class_count = None
    lines = []
    with open(path, encoding="utf-8", newline="") as fh:
        for raw in fh:
            stripped = raw.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                m = _CLASS_COUNT_RE.match(stripped)
                if m:
                    try:
                        file_class_count = int(m.group(1))
                    except ValueError:
                        raise ParseError(f"{path}: bad class_count {m.group(1)!r}")
                continue
            lines.append(stripped)
    if not lines:
        raise ParseError(f"{path}: missing header")

    rows = list(csv.reader(lines))
    header = [h.strip() for h in rows[0]]
    n_label = header.count(LABEL_COLUMN)
    if n_label != 1:
        raise SchemaError(f"{path}: expected exactly one '{LABEL_COLUMN}' column, found {n_label}")
    label_at = header.index(LABEL_COLUMN)
    names = [h for i, h in enumerate(header) if i != label_at]
    if len(set(names)) != len(names):
        dup = sorted({s for s in names if names.count(s) > 1})
        raise SchemaError(f"{path}: duplicate feature names: {dup}")

    width = len(header)
    values = np.empty((len(rows) - 1, width - 1), dtype=np.float64)
    labels = np.empty(len(rows) - 1, dtype=np.int64)
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != width:
            raise ParseError(
                f"{path}: row {r}: expected {width} fields, got {len(row)}"
            )
        cells = [c.strip() for c in row]
        lab = cells.pop(label_at)
        try:
            lab_int = int(lab)
        except ValueError:
            raise LabelError(f"{path}: row {r}: label {lab!r} is not an integer")
        if lab_int < 0:
            raise LabelError(f"{path}: row {r}: label {lab_int} is negative")
        labels[r - 1] = lab_int
        for c, cell in enumerate(cells):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: row {r}: non-numeric value {cell!r}")
            if not math.isfinite(v):
                raise ParseError(f"{path}: row {r}: non-finite value {cell!r}")
            values[r - 1, c] = v

    if class_count is None:
        class_count = file_class_count
    return LabeledDataset(
        values,
        labels,
        class_count=class_count,
        feature_names=names,
        provenance=manifest.tags_for(names),
    )


def format_dataset(ds: LabeledDataset) -> str:
    """Render ``ds`` in the columnar text format; floats use shortest repr."""
    buf = io.StringIO()
    buf.write(f"# class_count = {ds.class_count}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(ds.feature_names) + [LABEL_COLUMN])
    X = ds.features
    for i in range(ds.n_samples):
        writer.writerow([repr(float(v)) for v in X[i]] + [int(ds.labels[i])])
    return buf.getvalue()


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_dataset(ds: LabeledDataset, path) -> None:
    atomic_write_text(path, format_dataset(ds))


def format_manifest(manifest: ProvenanceManifest) -> str:
    return "".join(f"{p} = {t}\n" for p, t in manifest.prefixes.items())
