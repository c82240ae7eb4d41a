"""Seeded simulations of the confound-leakage mechanisms.

Every generator is a pure function of its arguments: the same seed gives
bit-identical datasets.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import BINARY, CLASSIFICATION, CONTINUOUS, REGRESSION, Dataset
from .errors import SimulationError

SIM_KINDS = (
    "walkthrough_regression",
    "opposing_extremes",
    "skewed_features",
    "binary_balanced",
    "rounded_feature",
)
KIND_ALIASES = {
    "walkthrough": "walkthrough_regression",
    "extremes": "opposing_extremes",
    "skewed": "skewed_features",
    "binary": "binary_balanced",
    "swap": "binary_balanced",
    "rounded": "rounded_feature",
}
SWAP_MODES = ("none", "train", "train_test")


@dataclass(frozen=True)
class SimSpec:
    """Parameters of one simulation; unused fields are ignored by a kind."""

    kind: str
    n: int
    seed: int
    p: int = 1
    dist: str = "normal"
    decimals: int = 1
    extreme_fraction: float = 0.05
    extreme_center: float = 4.0
    extreme_sd: float = 0.2
    exclude_extremes_test: bool = False
    peak_offset: float = 3.0
    peak_shift: float = 3.0
    peak_sd: float = 0.5
    target_sd: float = 0.5
    swap: str = "none"

    def __post_init__(self):
        kind = KIND_ALIASES.get(self.kind, self.kind)
        if self.kind == "swap" and self.swap == "none":
            object.__setattr__(self, "swap", "train")
        object.__setattr__(self, "kind", kind)
        if kind not in SIM_KINDS:
            raise SimulationError(f"unknown simulation kind {self.kind!r}")
        if self.n < 20:
            raise SimulationError("simulations need n >= 20")
        if kind == "skewed_features":
            if not 1 <= self.p <= 100:
                raise SimulationError("skewed_features needs 1 <= p <= 100")
            if self.dist not in ("normal", "chi2_df3"):
                raise SimulationError("dist must be 'normal' or 'chi2_df3'")
        if kind == "binary_balanced" and self.n % 4:
            raise SimulationError("binary_balanced needs n divisible by 4")
        if kind == "opposing_extremes" and not 0 < self.extreme_fraction < 0.5:
            raise SimulationError("extreme_fraction must lie in (0, 0.5)")
        if self.swap not in SWAP_MODES:
            raise SimulationError(f"swap must be one of {SWAP_MODES}")
        if self.decimals < 0:
            raise SimulationError("decimals must be non-negative")

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, obj):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise SimulationError(f"unknown SimSpec fields: {sorted(unknown)}")
        return cls(**obj)


@dataclass
class SimOutput:
    """Generated datasets keyed by role (``main``, ``rounded``, ``test_no_extremes``)
    plus per-row extras for the main dataset."""

    spec: SimSpec
    datasets: dict
    extras: dict = field(default_factory=dict)

    @property
    def main(self):
        return self.datasets["main"]


def _regression(x, y, names, kinds, confounds=None, confound_names=(), strata=None):
    n = len(y)
    return Dataset(
        features=x, feature_names=names, feature_kinds=kinds,
        target=y, target_kind=REGRESSION,
        confounds=np.zeros((n, 0)) if confounds is None else confounds,
        confound_names=confound_names, strata=strata,
    )


def gen_walkthrough_regression(n, seed, peak_offset=3.0, peak_shift=3.0, peak_sd=0.5,
                               target_sd=0.5) -> Dataset:
    """Binary confound driving both a regression target and one feature.

    The confound is Bernoulli(0.5) and is added to a N(0, target_sd) target.
    The feature is N(0, 1) when the confound is 0 and an even mixture of
    N(peak_shift - peak_offset, peak_sd) and N(peak_shift + peak_offset,
    peak_sd) when it is 1.
    """
    if n < 20:
        raise SimulationError("n must be at least 20")
    rng = np.random.default_rng(seed)
    c = rng.integers(0, 2, size=n).astype(float)
    y = c + rng.normal(0.0, target_sd, size=n)
    side = np.where(rng.integers(0, 2, size=n) == 1, 1.0, -1.0)
    bulk = rng.standard_normal(n)
    peaks = peak_shift + side * peak_offset + rng.normal(0.0, peak_sd, size=n)
    x = np.where(c == 1, peaks, bulk)
    return _regression(x[:, None], y, ("feature",), (CONTINUOUS,), c[:, None],
                       ("confound",))


def _balanced_labels(n, rng):
    y = np.zeros(n)
    y[n // 2:] = 1.0
    return rng.permutation(y)


def gen_opposing_extremes(n, seed, extreme_fraction=0.05, extreme_center=4.0,
                          extreme_sd=0.2, exclude_extremes_test=False, n_test=None):
    """Uninformative N(0, 1) feature with small opposite clusters per class.

    A fraction of class 0 is redrawn around ``-extreme_center`` and the same
    fraction of class 1 around ``+extreme_center``. Returns ``(dataset,
    extreme_mask, test)`` where ``test`` is an independently drawn balanced
    set without extreme rows (``None`` unless requested).
    """
    if not 0 < extreme_fraction < 0.5:
        raise SimulationError("extreme_fraction must lie in (0, 0.5)")
    rng = np.random.default_rng(seed)
    y = _balanced_labels(n, rng)
    x = rng.standard_normal(n)
    extreme = np.zeros(n, dtype=bool)
    for cls, sign in ((0.0, -1.0), (1.0, 1.0)):
        rows = np.flatnonzero(y == cls)
        k = int(np.floor(extreme_fraction * rows.size + 0.5))
        picked = rng.choice(rows, size=k, replace=False)
        x[picked] = rng.normal(sign * extreme_center, extreme_sd, size=k)
        extreme[picked] = True
    d = Dataset(features=x[:, None], feature_names=("feature",), feature_kinds=(CONTINUOUS,),
                target=y, target_kind=CLASSIFICATION, confounds=np.zeros((n, 0)),
                confound_names=(), target_labels=("0", "1"))
    test = None
    if exclude_extremes_test:
        m = n if n_test is None else n_test
        yt = _balanced_labels(m, rng)
        xt = rng.standard_normal(m)
        test = d.replace(features=xt[:, None], target=yt, confounds=np.zeros((m, 0)),
                         row_ids=None)
    return d, extreme, test


def gen_skewed_features(n, p, dist, seed) -> Dataset:
    """``p`` i.i.d. normal or chi-square(3) features, independent N(0, 1) target."""
    if not 1 <= p <= 100:
        raise SimulationError("p must lie in [1, 100]")
    rng = np.random.default_rng(seed)
    if dist == "normal":
        x = rng.standard_normal((n, p))
    elif dist == "chi2_df3":
        x = rng.chisquare(3, size=(n, p))
    else:
        raise SimulationError(f"unknown dist {dist!r}")
    y = rng.standard_normal(n)
    names = tuple(f"x{j}" for j in range(p))
    return _regression(x, y, names, (CONTINUOUS,) * p)


def gen_binary_balanced(n, seed) -> Dataset:
    """Binary feature with exactly n/4 rows in every feature-by-class cell.

    ``strata`` encodes the cell so that stratified folds keep every training
    part balanced as well.
    """
    if n % 4:
        raise SimulationError("n must be divisible by 4")
    rng = np.random.default_rng(seed)
    y = np.repeat([0.0, 0.0, 1.0, 1.0], n // 4)
    x = np.tile(np.repeat([0.0, 1.0], n // 4), 2)
    order = rng.permutation(n)
    y, x = y[order], x[order]
    return Dataset(features=x[:, None], feature_names=("feature",), feature_kinds=(BINARY,),
                   target=y, target_kind=CLASSIFICATION, confounds=np.zeros((n, 0)),
                   confound_names=(), target_labels=("0", "1"),
                   strata=(2 * y + x).astype(np.int64))


def swap_two_values(column, rows, seed, groups=None):
    """Exchange the values of two rows of ``column`` that hold different values.

    The pair is drawn uniformly among eligible pairs inside ``rows``. With
    ``groups`` the two rows must also belong to different groups, so the
    swap changes the distribution of the column within each group while the
    marginal distribution stays exactly the same. Returns a new array.
    """
    col = np.array(column, dtype=float, copy=True)
    rows = np.asarray(rows)
    vals = col[rows]
    grp = None if groups is None else np.asarray(groups)[rows]

    def eligible(i, j):
        return vals[i] != vals[j] and (grp is None or grp[i] != grp[j])

    # existence check on the (value, group) combinations present
    keys = set(zip(vals.tolist(), [None] * len(vals) if grp is None else grp.tolist()))
    if not any(a[0] != b[0] and (grp is None or a[1] != b[1]) for a in keys for b in keys):
        raise SimulationError("no two rows with distinct values available for a swap")
    rng = np.random.default_rng(seed)
    m = rows.size
    while True:
        i, j = rng.integers(0, m, size=2)
        if eligible(i, j):
            break
    a, b = rows[i], rows[j]
    col[a], col[b] = col[b], col[a]
    return col


def gen_rounded_feature(n, seed, decimals=1):
    """Normal feature and independent normal target; returns ``(raw, rounded)``
    where the second copy rounds the feature half-to-even."""
    if n < 20:
        raise SimulationError("n must be at least 20")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    y = rng.standard_normal(n)
    raw = _regression(x[:, None], y, ("feature",), (CONTINUOUS,))
    return raw, raw.replace(features=np.round(x, decimals)[:, None])


def generate(spec: SimSpec) -> SimOutput:
    k = spec.kind
    if k == "walkthrough_regression":
        d = gen_walkthrough_regression(spec.n, spec.seed, spec.peak_offset, spec.peak_shift,
                                       spec.peak_sd, spec.target_sd)
        return SimOutput(spec, {"main": d})
    if k == "opposing_extremes":
        d, extreme, test = gen_opposing_extremes(
            spec.n, spec.seed, spec.extreme_fraction, spec.extreme_center, spec.extreme_sd,
            spec.exclude_extremes_test)
        sets = {"main": d}
        if test is not None:
            sets["test_no_extremes"] = test
        return SimOutput(spec, sets, {"extreme": extreme.astype(int)})
    if k == "skewed_features":
        return SimOutput(spec, {"main": gen_skewed_features(spec.n, spec.p, spec.dist, spec.seed)})
    if k == "binary_balanced":
        d = gen_binary_balanced(spec.n, spec.seed)
        return SimOutput(spec, {"main": d}, {"stratum": d.strata})
    raw, rounded = gen_rounded_feature(spec.n, spec.seed, spec.decimals)
    return SimOutput(spec, {"main": raw, "rounded": rounded})
