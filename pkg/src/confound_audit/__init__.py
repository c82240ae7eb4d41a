"""Confound-leakage auditing for tabular machine-learning pipelines.

Featurewise confound regression can inject target information into the
residualized features and inflate the scores of nonlinear models. This
package runs CV-consistent pipelines with and without confound regression
(optionally using the target itself as the confound), compares them with a
Bayesian correlated t-test and reports whether leakage is likely.
"""

from .audit import (
    ConfoundSource,
    RopeConfig,
    association_table,
    make_taco,
    run_audit,
    simulate_confound,
    verdict,
)
from .confound import ConfoundModel, fit_cr, transform_cr
from .cv import CVScheme, PipelineSpec, run_cv, run_holdout
from .data import Dataset, load_csv, write_csv
from .metrics import ScoreSummary, aucroc, pearson, point_biserial, r2
from .models import ModelSpec, fit, predict_scores, tree_structure
from .rope import rope_compare
from .simgen import SimSpec, generate

__version__ = "0.1.0"

__all__ = [
    "CVScheme",
    "ConfoundModel",
    "ConfoundSource",
    "Dataset",
    "ModelSpec",
    "PipelineSpec",
    "RopeConfig",
    "ScoreSummary",
    "SimSpec",
    "association_table",
    "aucroc",
    "fit",
    "fit_cr",
    "generate",
    "load_csv",
    "make_taco",
    "pearson",
    "point_biserial",
    "predict_scores",
    "r2",
    "rope_compare",
    "run_audit",
    "run_cv",
    "run_holdout",
    "simulate_confound",
    "transform_cr",
    "tree_structure",
    "verdict",
    "write_csv",
]
