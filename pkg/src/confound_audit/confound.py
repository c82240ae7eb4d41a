"""Featurewise linear confound regression.

Each feature column is regressed on ``[1 | confounds]`` using the training
rows only; the fitted model then maps any rows to the confound-predicted
features ``x_hat`` and the residualized features ``x_cr = x - x_hat``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, UnderdeterminedDesignError

RCOND = 1e-10


def pinv(a, rcond=RCOND, return_rank=False):
    """Moore-Penrose pseudoinverse via SVD, dropping singular values below
    ``rcond * s_max``."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        out = np.zeros(a.shape[::-1])
        return (out, 0) if return_rank else out
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    keep = s > rcond * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    out = (vt.T * inv_s) @ u.T
    return (out, int(keep.sum())) if return_rank else out


@dataclass(frozen=True, eq=False)
class ConfoundModel:
    """Per-feature intercepts (shape ``p``) and coefficients (shape ``q x p``)."""

    intercepts: np.ndarray
    coefficients: np.ndarray
    n_fit: int
    confound_names: tuple = ()
    feature_names: tuple = ()
    rank: int = 0

    @property
    def p(self):
        return self.intercepts.shape[0]

    @property
    def q(self):
        return self.coefficients.shape[0]

    def to_dict(self):
        return {
            "n_fit": self.n_fit,
            "rank": self.rank,
            "confound_names": list(self.confound_names),
            "feature_names": list(self.feature_names),
            "intercepts": self.intercepts.tolist(),
            "coefficients": self.coefficients.tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj):
        coef = np.asarray(obj["coefficients"], dtype=float)
        icpt = np.asarray(obj["intercepts"], dtype=float)
        return cls(icpt, coef.reshape(-1, icpt.shape[0]), int(obj["n_fit"]),
                   tuple(obj.get("confound_names", ())), tuple(obj.get("feature_names", ())),
                   int(obj.get("rank", 0)))


def fit_cr(features_train, confounds_train, confound_names=(), feature_names=()) -> ConfoundModel:
    """Least-squares fit of every feature on an intercept plus the confounds.

    Rank-deficient confound designs (constant or duplicated columns) get the
    minimum-norm solution. The intercept is handled by centering, so a
    confound block with zero variation yields exactly zero coefficients.
    """
    x = np.asarray(features_train, dtype=float)
    c = np.asarray(confounds_train, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if c.ndim == 1:
        c = c[:, None]
    n, q = c.shape
    if x.shape[0] != n:
        raise DimensionMismatchError("features and confounds have different row counts")
    if n <= q:
        raise UnderdeterminedDesignError(
            f"confound regression needs more rows than confounds (n={n}, q={q})")
    if not (np.isfinite(x).all() and np.isfinite(c).all()):
        raise ValueError("confound regression inputs must be finite")
    x_mean = x.mean(axis=0)
    c_mean = c.mean(axis=0)
    cc = c - c_mean
    cc_pinv, rank = pinv(cc, return_rank=True)
    coef = cc_pinv @ (x - x_mean)
    intercept = x_mean - c_mean @ coef
    coef.setflags(write=False)
    intercept.setflags(write=False)
    return ConfoundModel(intercept, coef, n, tuple(confound_names), tuple(feature_names), rank)


def transform_cr(m: ConfoundModel, features, confounds):
    """Return ``(x_cr, x_hat)`` for the given rows."""
    x = np.asarray(features, dtype=float)
    c = np.asarray(confounds, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if c.ndim == 1:
        c = c[:, None]
    if c.shape[1] != m.q:
        raise DimensionMismatchError(f"model expects {m.q} confounds, got {c.shape[1]}")
    if x.shape[1] != m.p:
        raise DimensionMismatchError(f"model expects {m.p} features, got {x.shape[1]}")
    if x.shape[0] != c.shape[0]:
        raise DimensionMismatchError("features and confounds have different row counts")
    x_hat = m.intercepts + c @ m.coefficients
    return x - x_hat, x_hat
