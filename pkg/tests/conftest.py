import numpy as np
import pytest

from confound_audit.data import BINARY, CLASSIFICATION, CONTINUOUS, REGRESSION, Dataset


def make_dataset(x, y, confounds=None, classification=None, kinds=None, **kw):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(y, dtype=float)
    n, p = x.shape
    if classification is None:
        classification = bool(np.isin(y, (0.0, 1.0)).all())
    c = np.zeros((n, 0)) if confounds is None else np.asarray(confounds, dtype=float)
    if c.ndim == 1:
        c = c[:, None]
    return Dataset(
        features=x,
        feature_names=tuple(f"x{j}" for j in range(p)),
        feature_kinds=tuple(kinds or (CONTINUOUS,) * p),
        target=y,
        target_kind=CLASSIFICATION if classification else REGRESSION,
        confounds=c,
        confound_names=tuple(f"c{k}" for k in range(c.shape[1])),
        **kw,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def linear_classification(rng):
    n, p = 300, 4
    x = rng.standard_normal((n, p))
    y = (x @ np.array([1.5, -1.0, 0.5, 0.0]) + 0.5 * rng.standard_normal(n) > 0).astype(float)
    c = rng.standard_normal(n)
    return make_dataset(x, y, c)


@pytest.fixture
def linear_regression(rng):
    n, p = 300, 3
    x = rng.standard_normal((n, p))
    y = x @ np.array([1.0, -2.0, 0.5]) + 0.5 * rng.standard_normal(n)
    return make_dataset(x, y, rng.standard_normal(n), classification=False)


__all__ = ["make_dataset", "BINARY"]
