"""Out-of-sample scores and association coefficients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import UndefinedMetricError


@dataclass(frozen=True)
class ScoreSummary:
    mean: float
    sd: float
    scores: tuple = field(default_factory=tuple)

    @classmethod
    def from_scores(cls, scores):
        s = np.asarray([v for v in np.ravel(scores) if np.isfinite(v)], dtype=float)
        if s.size == 0:
            return cls(float("nan"), float("nan"), ())
        sd = float(s.std(ddof=1)) if s.size > 1 else 0.0
        return cls(float(s.mean()), sd, tuple(float(v) for v in s))

    def to_dict(self):
        return {"mean": self.mean, "sd": self.sd, "n": len(self.scores)}


def aucroc(labels, scores) -> float:
    """Area under the ROC curve via the Mann-Whitney statistic with midranks.

    Tied scores between a positive and a negative count as half a correctly
    ordered pair.
    """
    y = np.asarray(labels, dtype=float).ravel()
    s = np.asarray(scores, dtype=float).ravel()
    if y.shape != s.shape:
        raise ValueError("labels and scores differ in length")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUCROC needs both classes present")
    ranks = rankdata(s, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def r2(y_true, y_pred) -> float:
    """Coefficient of determination; negative when worse than the mean."""
    y = np.asarray(y_true, dtype=float).ravel()
    f = np.asarray(y_pred, dtype=float).ravel()
    if y.shape != f.shape:
        raise ValueError("y_true and y_pred differ in length")
    if y.size < 2:
        raise UndefinedMetricError("R2 needs at least two observations")
    ss_tot = np.sum((y - y.mean()) ** 2)
    if not ss_tot > 0:
        raise UndefinedMetricError("R2 is undefined for a constant y_true")
    return float(1.0 - np.sum((y - f) ** 2) / ss_tot)


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("inputs differ in length")
    da = a - a.mean()
    db = b - b.mean()
    saa = np.dot(da, da)
    sbb = np.dot(db, db)
    if not (saa > 0 and sbb > 0):
        raise UndefinedMetricError("correlation is undefined for a constant input")
    # one square root of the product keeps pearson(a, a) exactly 1
    return float(np.clip(np.dot(da, db) / np.sqrt(saa * sbb), -1.0, 1.0))


def point_biserial(g, b) -> float:
    """Pearson correlation of a 0/1-coded group vector with a continuous one."""
    g = np.asarray(g, dtype=float).ravel()
    levels = np.unique(g)
    if levels.size != 2:
        raise UndefinedMetricError("point-biserial needs exactly two groups")
    return pearson((g == levels[1]).astype(float), b)


def score(task, y_true, y_pred) -> float:
    return aucroc(y_true, y_pred) if task == "classification" else r2(y_true, y_pred)
