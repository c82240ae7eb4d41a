"""Dataset container, CSV ingestion and the row/column preprocessing steps.

Every transformation here returns a new :class:`Dataset`; arrays held by a
dataset are read-only so instances can be shared between workers.
"""

from __future__ import annotations

import csv
import dataclasses
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    DataError,
    IngestionError,
    InvalidTargetError,
    MissingColumnError,
    SplitError,
)

CONTINUOUS = "continuous"
BINARY = "binary"
CATEGORICAL = "categorical"
KINDS = (CONTINUOUS, BINARY, CATEGORICAL)

CLASSIFICATION = "classification"
REGRESSION = "regression"

MISSING_TOKENS = frozenset({"", "na", "n/a", "nan", "null", "none"})


class AuditWarning(UserWarning):
    """Non-fatal condition worth surfacing to the user."""


def _frozen(a, dtype=float, ndim=None):
    arr = np.array(a, dtype=dtype, copy=True)
    if ndim == 2 and arr.ndim == 1:
        arr = arr.reshape(-1, 1) if arr.size else arr.reshape(0, 0)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Features, target and confounds for one audit.

    Classification targets are stored coded 0/1; ``target_labels`` keeps the
    original label for each code. ``strata`` optionally overrides the labels
    used to stratify fold assignment, and ``row_ids`` tracks the rows of the
    originating dataset through subsetting.
    """

    features: np.ndarray
    feature_names: tuple
    feature_kinds: tuple
    target: np.ndarray
    target_kind: str
    confounds: np.ndarray
    confound_names: tuple
    confound_kinds: tuple = None
    target_labels: Optional[tuple] = None
    target_name: str = "target"
    feature_levels: tuple = None
    strata: Optional[np.ndarray] = None
    row_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        x = _frozen(self.features, ndim=2)
        n = x.shape[0]
        set_("features", x)
        set_("target", _frozen(self.target))
        c = np.asarray(self.confounds, dtype=float)
        if c.size == 0:
            c = np.zeros((n, 0))
        set_("confounds", _frozen(c, ndim=2))
        set_("feature_names", tuple(self.feature_names))
        set_("feature_kinds", tuple(self.feature_kinds))
        set_("confound_names", tuple(self.confound_names))
        if self.confound_kinds is None:
            set_("confound_kinds", tuple(_infer_numeric_kind(col) for col in self.confounds.T))
        else:
            set_("confound_kinds", tuple(self.confound_kinds))
        if self.feature_levels is None:
            set_("feature_levels", tuple(
                _default_levels(col) if k == CATEGORICAL else None
                for k, col in zip(self.feature_kinds, self.features.T)
            ))
        else:
            set_("feature_levels", tuple(
                None if lv is None else tuple(lv) for lv in self.feature_levels))
        if self.target_labels is not None:
            set_("target_labels", tuple(self.target_labels))
        if self.strata is not None:
            set_("strata", _frozen(self.strata, dtype=np.int64))
        ids = np.arange(n) if self.row_ids is None else self.row_ids
        set_("row_ids", _frozen(ids, dtype=np.int64))
        self._validate()

    def _validate(self):
        n, p = self.features.shape
        if n < 2:
            raise DataError(f"dataset needs at least 2 rows, got {n}")
        if p < 1:
            raise DataError("dataset needs at least one feature column")
        if len(self.feature_names) != p or len(self.feature_kinds) != p:
            raise DataError("feature names/kinds do not match the feature matrix")
        for name, kind in zip(self.feature_names, self.feature_kinds):
            if kind not in KINDS:
                raise DataError(f"unknown kind {kind!r} for column {name!r}")
        q = self.confounds.shape[1]
        if len(self.confound_names) != q or len(self.confound_kinds) != q:
            raise DataError("confound names/kinds do not match the confound matrix")
        if self.target.shape != (n,) or self.confounds.shape[0] != n or self.row_ids.shape != (n,):
            raise DataError("row counts of features, target and confounds differ")
        if self.strata is not None and self.strata.shape != (n,):
            raise DataError("strata length differs from row count")
        if not (np.isfinite(self.features).all() and np.isfinite(self.target).all()
                and np.isfinite(self.confounds).all()):
            raise DataError("dataset contains missing or non-finite values")
        if self.target_kind == CLASSIFICATION:
            if not np.isin(self.target, (0.0, 1.0)).all():
                raise InvalidTargetError("classification target must be coded 0/1")
        elif self.target_kind != REGRESSION:
            raise DataError(f"unknown target kind {self.target_kind!r}")
        for j, kind in enumerate(self.feature_kinds):
            if kind == CATEGORICAL:
                col = self.features[:, j]
                if (col < 0).any() or (col != np.round(col)).any():
                    raise DataError(
                        f"categorical column {self.feature_names[j]!r} must hold "
                        "non-negative integer codes")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def p(self):
        return self.features.shape[1]

    @property
    def q(self):
        return self.confounds.shape[1]

    @property
    def is_classification(self):
        return self.target_kind == CLASSIFICATION

    def replace(self, **changes) -> "Dataset":
        return dataclasses.replace(self, **changes)

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return self.replace(
            features=self.features[rows],
            target=self.target[rows],
            confounds=self.confounds[rows],
            strata=None if self.strata is None else self.strata[rows],
            row_ids=self.row_ids[rows],
        )

    def with_features(self, x, names=None, kinds=None) -> "Dataset":
        x = np.asarray(x, dtype=float)
        if names is None:
            names, kinds = self.feature_names, self.feature_kinds
            levels = self.feature_levels
        else:
            levels = None
        return self.replace(features=x, feature_names=names, feature_kinds=kinds,
                            feature_levels=levels)

    def class_counts(self):
        if not self.is_classification:
            raise InvalidTargetError("class counts need a classification target")
        pos = int(self.target.sum())
        return self.n - pos, pos

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for arr in (self.features, self.target, self.confounds):
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        h.update("|".join(self.feature_names + self.confound_names).encode())
        return h.hexdigest()[:16]


def _default_levels(col):
    k = int(col.max()) + 1 if col.size else 0
    return tuple(str(i) for i in range(k))


def _infer_numeric_kind(values):
    return BINARY if len(np.unique(values)) <= 2 else CONTINUOUS


# --------------------------------------------------------------------------
# CSV ingestion


def _parse_float(cell):
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if np.isfinite(v) else None


def _is_missing(cell):
    return cell.strip().lower() in MISSING_TOKENS


class _Column:
    """Raw string cells of one CSV column plus its resolved kind."""

    def __init__(self, name, cells):
        self.name = name
        self.cells = cells
        self.kind = None
        self.numeric = None
        self.bad = set()  # row indices with missing/unparseable cells

    def resolve(self, override=None):
        present = [i for i, c in enumerate(self.cells) if not _is_missing(c)]
        self.bad.update(i for i, c in enumerate(self.cells) if _is_missing(c))
        parsed = {i: _parse_float(self.cells[i]) for i in present}
        n_numeric = sum(v is not None for v in parsed.values())
        if override == CATEGORICAL or (override is None and n_numeric * 2 <= len(present)):
            self.kind = CATEGORICAL
            self.numeric = False
            return
        self.numeric = True
        for i, v in parsed.items():
            if v is None:
                self.bad.add(i)
        if override is not None:
            self.kind = override
        else:
            good = {v for v in parsed.values() if v is not None}
            self.kind = BINARY if len(good) <= 2 else CONTINUOUS

    def values(self, rows):
        if self.numeric:
            return np.array([float(self.cells[i]) for i in rows])
        raise TypeError("categorical column has no numeric values")

    def codes(self, rows):
        levels = sorted({self.cells[i].strip() for i in rows})
        index = {lv: k for k, lv in enumerate(levels)}
        return np.array([index[self.cells[i].strip()] for i in rows], dtype=float), tuple(levels)


def load_csv(
    path,
    target_col: str,
    confound_cols: Sequence[str] = (),
    kind_overrides: Optional[Mapping[str, str]] = None,
    missing_policy: str = "reject_file",
    exclude_cols: Sequence[str] = (),
    strata_col: Optional[str] = None,
) -> Dataset:
    """Read a header-first CSV into a :class:`Dataset`.

    Every column that is not the target, a confound, excluded, or the strata
    column becomes a feature. Column kinds are inferred (two or fewer distinct
    numeric values is binary, mostly non-numeric is categorical, else
    continuous) unless named in ``kind_overrides``. The target may be
    overridden with ``continuous`` (regression) or ``binary``/``categorical``
    (classification).

    ``missing_policy`` is ``reject_file`` (raise on the first missing or
    unparseable cell) or ``drop_rows`` (drop such rows with a warning).
    """
    if missing_policy not in ("reject_file", "drop_rows"):
        raise ValueError(f"unknown missing_policy {missing_policy!r}")
    kind_overrides = dict(kind_overrides or {})
    for name, kind in kind_overrides.items():
        if kind not in KINDS:
            raise DataError(f"unknown kind {kind!r} for column {name!r}")
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError("empty file, header row required") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise IngestionError(
                    f"expected {len(header)} fields, found {len(row)}", row=lineno)
            rows.append((lineno, row))
    if len(set(header)) != len(header):
        raise IngestionError("duplicate column names in header")
    confound_cols = list(confound_cols)
    for name in [target_col, *confound_cols, *exclude_cols] + ([strata_col] if strata_col else []):
        if name not in header:
            raise MissingColumnError(name)
    if target_col in confound_cols:
        raise DataError("target column cannot also be a confound")

    linenos = [ln for ln, _ in rows]
    columns = {name: _Column(name, [r[j] for _, r in rows]) for j, name in enumerate(header)}
    skip = {target_col, *confound_cols, *exclude_cols} | ({strata_col} if strata_col else set())
    feature_cols = [h for h in header if h not in skip]
    if not feature_cols:
        raise DataError("no feature columns left after removing target and confounds")

    target_override = kind_overrides.pop(target_col, None)
    for name in [target_col, *confound_cols, *feature_cols] + ([strata_col] if strata_col else []):
        override = target_override if name == target_col else kind_overrides.get(name)
        if name == strata_col:
            override = CATEGORICAL
        columns[name].resolve(override)

    bad_rows = set()
    for name in [target_col, *confound_cols, *feature_cols] + ([strata_col] if strata_col else []):
        col = columns[name]
        if col.bad and missing_policy == "reject_file":
            i = min(col.bad)
            what = "missing value" if _is_missing(col.cells[i]) else (
                f"unparseable numeric value {col.cells[i]!r}")
            raise IngestionError(what, row=linenos[i], column=name)
        bad_rows |= col.bad
    keep = [i for i in range(len(rows)) if i not in bad_rows]
    if bad_rows:
        warnings.warn(f"dropped {len(bad_rows)} row(s) with missing or unparseable cells",
                      AuditWarning, stacklevel=2)

    # target
    tcol = columns[target_col]
    if target_override in (BINARY, CATEGORICAL) or not tcol.numeric or tcol.kind == BINARY:
        target_kind = CLASSIFICATION
        raw = [tcol.cells[i].strip() for i in keep]
        if tcol.numeric:
            labels = sorted(set(raw), key=lambda s: (float(s), s))
        else:
            labels = sorted(set(raw))
        if len(labels) != 2:
            raise InvalidTargetError(
                f"classification target {target_col!r} needs exactly 2 classes, "
                f"found {len(labels)}")
        code = {lv: float(k) for k, lv in enumerate(labels)}
        target = np.array([code[v] for v in raw])
        target_labels = tuple(labels)
    else:
        target_kind = REGRESSION
        target = tcol.values(keep)
        target_labels = None
        if np.ptp(target) == 0:
            raise InvalidTargetError(f"regression target {target_col!r} is constant")

    # features
    xs, kinds, levels = [], [], []
    for name in feature_cols:
        col = columns[name]
        if col.kind == CATEGORICAL:
            codes, lv = col.codes(keep)
            xs.append(codes)
            levels.append(lv)
        else:
            vals = col.values(keep)
            if col.kind == BINARY and len(np.unique(vals)) > 2:
                raise IngestionError("binary column has more than two distinct values",
                                     column=name)
            xs.append(vals)
            levels.append(None)
        kinds.append(col.kind)

    # confounds; categorical confounds are expanded to indicators right away
    cs, cnames, ckinds = [], [], []
    for name in confound_cols:
        col = columns[name]
        if col.kind == CATEGORICAL:
            codes, lv = col.codes(keep)
            for k, level in enumerate(lv):
                cs.append((codes == k).astype(float))
                cnames.append(f"{name}={level}")
                ckinds.append(BINARY)
        else:
            cs.append(col.values(keep))
            cnames.append(name)
            ckinds.append(col.kind)

    strata = None
    if strata_col:
        strata, _ = columns[strata_col].codes(keep)

    n = len(keep)
    return Dataset(
        features=np.column_stack(xs) if xs else np.zeros((n, 0)),
        feature_names=feature_cols,
        feature_kinds=kinds,
        target=target,
        target_kind=target_kind,
        confounds=np.column_stack(cs) if cs else np.zeros((n, 0)),
        confound_names=cnames,
        confound_kinds=ckinds,
        target_labels=target_labels,
        target_name=target_col,
        feature_levels=levels,
        strata=strata,
    )


def write_csv(d: Dataset, path, extra_columns: Optional[Mapping[str, Sequence]] = None):
    """Write a dataset back to CSV (features, confounds, extras, target)."""
    extra_columns = dict(extra_columns or {})
    header = list(d.feature_names) + list(d.confound_names) + list(extra_columns) + [d.target_name]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(d.n):
            row = [_fmt(v) for v in d.features[i]]
            row += [_fmt(v) for v in d.confounds[i]]
            row += [_fmt(col[i]) for col in extra_columns.values()]
            if d.is_classification and d.target_labels is not None:
                row.append(d.target_labels[int(d.target[i])])
            else:
                row.append(_fmt(d.target[i]))
            w.writerow(row)


def _fmt(v):
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


# --------------------------------------------------------------------------
# encoding and scaling


def one_hot_encode(d: Dataset) -> Dataset:
    """Replace every categorical column by one indicator column per level."""
    if CATEGORICAL not in d.feature_kinds:
        return d
    cols, names, kinds = [], [], []
    for j, (name, kind) in enumerate(zip(d.feature_names, d.feature_kinds)):
        col = d.features[:, j]
        if kind != CATEGORICAL:
            cols.append(col)
            names.append(name)
            kinds.append(kind)
            continue
        levels = d.feature_levels[j] or _default_levels(col)
        if len(levels) < 2:
            warnings.warn(f"categorical column {name!r} has a single level; "
                          "its indicator is constant", AuditWarning, stacklevel=2)
        for k, level in enumerate(levels):
            cols.append((col == k).astype(float))
            names.append(f"{name}={level}")
            kinds.append(BINARY)
    return d.replace(features=np.column_stack(cols), feature_names=names,
                     feature_kinds=kinds, feature_levels=None)


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-column mean and scale for the continuous features and confounds."""

    feature_cols: np.ndarray
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    confound_cols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    confound_mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    confound_scale: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _fit_columns(mat, cols, names):
    if len(cols) == 0:
        return np.zeros(0), np.zeros(0)
    sub = mat[:, cols]
    mean = sub.mean(axis=0)
    sd = sub.std(axis=0)
    degenerate = ~(sd > 0)
    for j in np.flatnonzero(degenerate):
        warnings.warn(f"column {names[cols[j]]!r} has zero variance on the fitting rows; "
                      "centering only", AuditWarning, stacklevel=3)
    return mean, np.where(degenerate, 1.0, sd)


def fit_standardizer(d: Dataset, rows=None) -> Standardizer:
    """Fit column means and standard deviations on ``rows`` only."""
    if rows is None:
        rows = np.arange(d.n)
    rows = np.asarray(rows)
    if rows.size == 0:
        raise ValueError("standardizer needs at least one fitting row")
    fcols = np.array([j for j, k in enumerate(d.feature_kinds) if k == CONTINUOUS], dtype=int)
    ccols = np.array([j for j, k in enumerate(d.confound_kinds) if k == CONTINUOUS], dtype=int)
    fm, fs = _fit_columns(d.features[rows], fcols, d.feature_names)
    cm, cs = _fit_columns(d.confounds[rows], ccols, d.confound_names)
    return Standardizer(fcols, fm, fs, ccols, cm, cs)


def apply_standardizer(s: Standardizer, d: Dataset) -> Dataset:
    x = np.array(d.features)
    if len(s.feature_cols):
        x[:, s.feature_cols] = (x[:, s.feature_cols] - s.feature_mean) / s.feature_scale
    c = np.array(d.confounds)
    if len(s.confound_cols):
        c[:, s.confound_cols] = (c[:, s.confound_cols] - s.confound_mean) / s.confound_scale
    return d.replace(features=x, confounds=c)


# --------------------------------------------------------------------------
# row operations


def balance_classes(d: Dataset, seed) -> Dataset:
    """Undersample the majority class, without replacement, to the minority count."""
    n0, n1 = d.class_counts()
    if n0 == n1:
        return d
    rng = np.random.default_rng(seed)
    major = 0.0 if n0 > n1 else 1.0
    major_rows = np.flatnonzero(d.target == major)
    kept = rng.choice(major_rows, size=min(n0, n1), replace=False)
    rows = np.sort(np.concatenate([np.flatnonzero(d.target != major), kept]))
    return d.subset(rows)


def _round_half_up(x):
    return int(np.floor(x + 0.5))


def _largest_remainder(counts, total):
    """Integer allocation of ``total`` proportional to ``counts``."""
    counts = np.asarray(counts, dtype=float)
    quota = counts * total / counts.sum()
    alloc = np.floor(quota).astype(int)
    rest = total - alloc.sum()
    order = np.argsort(-(quota - alloc), kind="stable")
    alloc[order[:rest]] += 1
    return alloc


def split_indices(d: Dataset, test_fraction: float, seed, stratify: bool = True):
    """Row indices ``(train, test)`` for a random holdout split."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    n = d.n
    n_test = _round_half_up(n * test_fraction)
    if n_test == 0 or n_test == n:
        raise SplitError(f"test fraction {test_fraction} leaves an empty part for n={n}")
    rng = np.random.default_rng(seed)
    if stratify and d.is_classification:
        groups = [np.flatnonzero(d.target == c) for c in (0.0, 1.0)]
        alloc = _largest_remainder([len(g) for g in groups], n_test)
        test = []
        for g, k in zip(groups, alloc):
            if len(g) - k < 1:
                raise SplitError("stratified split leaves a class empty in the training part")
            test.append(rng.permutation(g)[:k])
        test = np.sort(np.concatenate(test))
    else:
        test = np.sort(rng.permutation(n)[:n_test])
    train = np.setdiff1d(np.arange(n), test)
    return train, test


def train_test_split(d: Dataset, test_fraction: float, seed, stratify: bool = True):
    train, test = split_indices(d, test_fraction, seed, stratify)
    return d.subset(train), d.subset(test)


def shuffle_features(d: Dataset, seed) -> Dataset:
    """Permute every feature column independently; target and confounds stay put."""
    rng = np.random.default_rng(seed)
    x = np.array(d.features)
    for j in range(d.p):
        x[:, j] = x[rng.permutation(d.n), j]
    return d.replace(features=x)
