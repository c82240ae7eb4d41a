import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confound_audit.errors import UndefinedMetricError
from confound_audit.metrics import ScoreSummary, aucroc, pearson, point_biserial, r2, score


def pair_count_auc(labels, scores):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    hits = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg)
    return hits / (len(pos) * len(neg))


def test_auc_examples():
    assert aucroc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0
    assert aucroc([0, 1, 0, 1], [0.3] * 4) == 0.5
    with pytest.raises(UndefinedMetricError):
        aucroc([1, 1, 1], [0.1, 0.2, 0.3])


def test_auc_matches_pair_counting_with_ties(rng):
    y = np.array([0, 1] * 10)
    s = rng.integers(0, 5, 20).astype(float)
    assert aucroc(y, s) == pair_count_auc(y, s)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 6)), min_size=2, max_size=50))
def test_auc_oracle_property(rows):
    y = [r[0] for r in rows]
    s = [float(r[1]) for r in rows]
    if len(set(y)) < 2:
        return
    assert aucroc(y, s) == pair_count_auc(y, s)


def test_auc_complement_and_monotone(rng):
    y = np.array([0, 1] * 15)
    s = rng.standard_normal(30)
    assert aucroc(y, s) + aucroc(y, -s) == pytest.approx(1.0, abs=1e-15)
    assert aucroc(y, np.exp(3 * s) + 1) == aucroc(y, s)


def test_r2_examples(rng):
    y = rng.standard_normal(20)
    assert r2(y, y) == 1.0
    assert r2(y, np.full(20, y.mean())) == pytest.approx(0.0, abs=1e-15)
    bad = -y
    direct = 1 - np.sum((y - bad) ** 2) / np.sum((y - y.mean()) ** 2)
    assert r2(y, bad) == pytest.approx(direct, abs=1e-12)
    assert r2(y, bad) < 0
    with pytest.raises(UndefinedMetricError):
        r2([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def test_pearson_examples(rng):
    a = rng.standard_normal(15)
    assert pearson(a, a) == 1.0
    assert pearson(a, -a) == -1.0
    b = rng.standard_normal(15)
    assert pearson(a, b) == pytest.approx(pearson(b, a), abs=1e-15)
    assert pearson(3 * a + 2, 0.5 * b - 1) == pytest.approx(pearson(a, b), abs=1e-12)
    with pytest.raises(UndefinedMetricError):
        pearson(a, np.ones(15))


def test_point_biserial_direct_formula():
    g = np.array([0, 0, 1, 1.0])
    b = np.array([1, 2, 3, 4.0])
    m1, m0 = b[g == 1].mean(), b[g == 0].mean()
    p = g.mean()
    direct = (m1 - m0) / b.std() * np.sqrt(p * (1 - p))
    assert point_biserial(g, b) == pytest.approx(direct, abs=1e-12)
    assert point_biserial(g, b) == pytest.approx(pearson(g, b), abs=1e-15)


def test_score_and_summary():
    assert score("classification", [0, 1], [0.2, 0.7]) == 1.0
    assert score("regression", [1.0, 2.0], [1.0, 2.0]) == 1.0
    s = ScoreSummary.from_scores([[0.5, 0.7], [np.nan, 0.6]])
    assert s.mean == pytest.approx(0.6)
    assert s.sd == pytest.approx(0.1)
    assert len(s.scores) == 3
