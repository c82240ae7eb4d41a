"""Bayesian correlated t-test with a region of practical equivalence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

MEANINGFULLY_HIGHER = "meaningfully_higher"
MEANINGFULLY_LOWER = "meaningfully_lower"
PRACTICALLY_EQUIVALENT = "practically_equivalent"
UNDECIDED = "undecided"


@dataclass(frozen=True)
class RopeResult:
    p_left: float
    p_rope: float
    p_right: float
    rope_halfwidth: float
    decision: str
    mean_difference: float = float("nan")
    n: int = 0

    def to_dict(self):
        return {
            "p_left": self.p_left,
            "p_rope": self.p_rope,
            "p_right": self.p_right,
            "rope_halfwidth": self.rope_halfwidth,
            "decision": self.decision,
            "mean_difference": self.mean_difference,
            "n": self.n,
        }


def posterior(scores_a, scores_b, test_fraction):
    """Location, scale and degrees of freedom of the Student-t posterior of
    the mean paired difference ``a - b``."""
    d = np.asarray(scores_a, dtype=float) - np.asarray(scores_b, dtype=float)
    n = d.size
    rho = test_fraction
    var = d.var(ddof=1)
    scale = np.sqrt((1.0 / n + rho / (1.0 - rho)) * var)
    return float(d.mean()), float(scale), n - 1


def rope_compare(scores_a, scores_b, rope_halfwidth=0.01, test_fraction=0.2,
                 decision_threshold=0.95) -> RopeResult:
    """Posterior masses below, inside and above ``[-rope, +rope]``.

    ``test_fraction`` is the correlation heuristic for overlapping training
    sets (one over the number of folds). A decision is made when one of the
    three masses exceeds ``decision_threshold``; ``p_right`` is the mass on
    ``a`` being meaningfully higher than ``b``.
    """
    a = np.ravel(np.asarray(scores_a, dtype=float))
    b = np.ravel(np.asarray(scores_b, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"paired score vectors differ in length ({a.size} vs {b.size})")
    if a.size < 2:
        raise ValueError("at least two paired scores are required")
    if not 0 <= test_fraction < 1:
        raise ValueError("test_fraction must lie in [0, 1)")
    r = float(rope_halfwidth)
    loc, scale, df = posterior(a, b, test_fraction)
    if not scale > 0:
        # all posterior mass sits on the observed mean difference
        p_left = 1.0 if loc < -r else 0.0
        p_right = 1.0 if loc > r else 0.0
        p_rope = 1.0 - (p_left + p_right)
    else:
        p_left = float(stats.t.cdf(-r, df, loc=loc, scale=scale))
        # upper tail via the survival function keeps precision near 1
        p_right = float(stats.t.sf(r, df, loc=loc, scale=scale))
        p_rope = 1.0 - (p_left + p_right)
    if p_right > decision_threshold:
        decision = MEANINGFULLY_HIGHER
    elif p_left > decision_threshold:
        decision = MEANINGFULLY_LOWER
    elif p_rope > decision_threshold:
        decision = PRACTICALLY_EQUIVALENT
    else:
        decision = UNDECIDED
    return RopeResult(p_left, p_rope, p_right, r, decision, loc, int(a.size))
