"""CV-consistent pipeline evaluation: repeated k-fold and single holdout.

Inside every fold the standardizer, the confound model and the ML model are
fitted on the training rows only and then applied to the test rows.
"""

from __future__ import annotations

import dataclasses
import itertools
import os
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import data as data_mod
from .confound import ConfoundModel, fit_cr, transform_cr
from .data import AuditWarning, Dataset, Standardizer
from .errors import ConfoundAuditError, DataError
from .metrics import score as score_fn
from .models import FittedModel, ModelSpec, fit, predict_scores
from .simgen import SWAP_MODES, swap_two_values

CR_VARIANTS = ("none", "confounds", "taco")
SHUFFLE_MODES = ("none", "per_repeat", "once")

# stream tags keep the seeded random streams of different steps apart
_SHUFFLE, _SWAP, _MODEL, _INNER = 11, 13, 17, 19


@dataclass(frozen=True)
class PipelineSpec:
    """Preprocessing, confound treatment and model of one pipeline.

    ``x_hat_only`` feeds the confound-predicted features instead of the
    residuals to the model. ``shuffle`` permutes every feature column before
    anything is fitted. ``swap`` exchanges two cross-class values of every
    feature in the training rows (and the test rows for ``train_test``) of
    each fold.
    """

    model: ModelSpec
    cr_variant: str = "none"
    standardize: bool = True
    encode: bool = True
    x_hat_only: bool = False
    shuffle: str = "none"
    swap: str = "none"

    def __post_init__(self):
        if self.cr_variant not in CR_VARIANTS:
            raise ValueError(f"cr_variant must be one of {CR_VARIANTS}")
        if self.shuffle not in SHUFFLE_MODES:
            raise ValueError(f"shuffle must be one of {SHUFFLE_MODES}")
        if self.swap not in SWAP_MODES:
            raise ValueError(f"swap must be one of {SWAP_MODES}")
        if self.x_hat_only and self.cr_variant == "none":
            raise ValueError("x_hat_only needs a confound source")

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class InnerSearch:
    grid: dict
    inner_folds: int = 5


@dataclass(frozen=True)
class CVScheme:
    repeats: int = 10
    folds: int = 5
    stratified: Optional[bool] = None
    seed: int = 0
    inner_search: Optional[InnerSearch] = None

    def __post_init__(self):
        if self.folds < 2 or self.repeats < 1:
            raise ValueError("need folds >= 2 and repeats >= 1")

    @property
    def test_fraction(self):
        return 1.0 / self.folds


@dataclass
class CVResult:
    scores: np.ndarray  # repeats x folds, NaN for invalid folds
    fold_meta: list
    task: str
    warnings: list = field(default_factory=list)

    @property
    def flat_scores(self):
        return self.scores.ravel()

    @property
    def valid(self):
        return bool(np.isfinite(self.scores).any())


def resolve_jobs(jobs=None):
    if jobs is None:
        env = os.environ.get("CONFOUND_AUDIT_JOBS")
        jobs = int(env) if env else 1
    if jobs <= 0:
        jobs = os.cpu_count() or 1
    return jobs


def derive_seed(*parts):
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


# --------------------------------------------------------------------------
# fitted pipeline


def _confounds_for(d: Dataset, variant):
    if variant == "taco":
        return d.target[:, None]
    return d.confounds


@dataclass
class FittedPipeline:
    spec: PipelineSpec
    task: str
    standardizer: Optional[Standardizer]
    confound_model: Optional[ConfoundModel]
    model: FittedModel

    def model_input(self, d: Dataset):
        """Feature matrix handed to the model for the rows of ``d``."""
        if self.standardizer is not None:
            d = data_mod.apply_standardizer(self.standardizer, d)
        if self.confound_model is None:
            return d.features
        x_cr, x_hat = transform_cr(self.confound_model, d.features,
                                   _confounds_for(d, self.spec.cr_variant))
        return x_hat if self.spec.x_hat_only else x_cr

    def predict(self, d: Dataset):
        return predict_scores(self.model, self.model_input(d))

    def score(self, d: Dataset):
        return score_fn(self.task, d.target, self.predict(d))


def fit_pipeline(train: Dataset, spec: PipelineSpec, model_seed=None) -> FittedPipeline:
    """Fit standardizer, confound model and ML model on ``train``."""
    if spec.cr_variant == "confounds" and train.q == 0:
        raise DataError("cr_variant 'confounds' needs at least one confound column")
    st = None
    d = train
    if spec.standardize:
        st = data_mod.fit_standardizer(train)
        d = data_mod.apply_standardizer(st, train)
    cm = None
    x = d.features
    if spec.cr_variant != "none":
        cm = fit_cr(d.features, _confounds_for(d, spec.cr_variant),
                    confound_names=("target",) if spec.cr_variant == "taco" else d.confound_names,
                    feature_names=d.feature_names)
        x_cr, x_hat = transform_cr(cm, d.features, _confounds_for(d, spec.cr_variant))
        x = x_hat if spec.x_hat_only else x_cr
    mspec = spec.model if model_seed is None else spec.model.with_seed(model_seed)
    model = fit(mspec, x, train.target, train.target_kind)
    return FittedPipeline(spec, train.target_kind, st, cm, model)


def _apply_swap(d: Dataset, rows, seed):
    x = np.array(d.features)
    rng_seeds = np.random.SeedSequence(seed).spawn(d.p)
    for j in range(d.p):
        x[:, j] = swap_two_values(x[:, j], rows, rng_seeds[j], groups=d.target)
    return d.replace(features=x)


def prepare(d: Dataset, spec: PipelineSpec) -> Dataset:
    return data_mod.one_hot_encode(d) if spec.encode else d


# --------------------------------------------------------------------------
# fold assignment


def fold_assignment(d: Dataset, folds: int, seed, stratified: bool) -> np.ndarray:
    """Fold id per row; stratified assignment spreads every stratum evenly."""
    rng = np.random.default_rng(seed)
    n = d.n
    if n < folds:
        raise DataError(f"cannot split {n} rows into {folds} folds")
    if stratified:
        labels = d.strata if d.strata is not None else (
            d.target if d.is_classification else None)
    else:
        labels = None
    if labels is None:
        order = rng.permutation(n)
    else:
        order = np.concatenate([rng.permutation(np.flatnonzero(labels == g))
                                for g in np.unique(labels)])
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[order] = np.arange(n) % folds
    return fold_of


# --------------------------------------------------------------------------
# evaluation


def _inner_select(train: Dataset, spec: PipelineSpec, search: InnerSearch, seed):
    keys = sorted(search.grid)
    best, best_score = spec.model, -np.inf
    inner = CVScheme(repeats=1, folds=search.inner_folds, seed=seed)
    for values in itertools.product(*(search.grid[k] for k in keys)):
        cand = dataclasses.replace(spec.model, **dict(zip(keys, values)))
        res = run_cv(train, spec.replace(model=cand, shuffle="none", swap="none"), inner)
        s = np.nanmean(res.scores) if res.valid else -np.inf
        if s > best_score:
            best, best_score = cand, s
    return best


def _evaluate_fold(d: Dataset, spec: PipelineSpec, scheme: CVScheme, repeat, fold,
                   train_rows, test_rows, record_probe):
    meta = {"repeat": repeat, "fold": fold, "n_train": int(train_rows.size),
            "n_test": int(test_rows.size)}
    try:
        if spec.swap != "none":
            d = _apply_swap(d, train_rows, [scheme.seed, repeat, fold, _SWAP, 0])
            if spec.swap == "train_test":
                d = _apply_swap(d, test_rows, [scheme.seed, repeat, fold, _SWAP, 1])
        train, test = d.subset(train_rows), d.subset(test_rows)
        run_spec = spec
        if scheme.inner_search is not None:
            chosen = _inner_select(train, spec, scheme.inner_search,
                                   derive_seed(scheme.seed, repeat, fold, _INNER))
            run_spec = spec.replace(model=chosen)
            meta["selected"] = {k: getattr(chosen, k) for k in scheme.inner_search.grid}
        model_seed = derive_seed(scheme.seed, repeat, fold, _MODEL, spec.model.seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AuditWarning)
            fp = fit_pipeline(train, run_spec, model_seed)
        value = fp.score(test)
        if record_probe and fp.standardizer is not None:
            cols = fp.standardizer.feature_cols
            tr = data_mod.apply_standardizer(fp.standardizer, train).features[:, cols]
            te = data_mod.apply_standardizer(fp.standardizer, test).features[:, cols]
            meta["probe"] = {"train_means": tr.mean(axis=0).tolist(),
                             "test_means": te.mean(axis=0).tolist()}
        if fp.confound_model is not None:
            meta["confound_rank"] = fp.confound_model.rank
        meta["score"] = value
    except ConfoundAuditError as exc:
        value = float("nan")
        meta["error"] = f"{type(exc).__name__}: {exc}"
    return value, meta


def run_cv(d: Dataset, spec: PipelineSpec, scheme: CVScheme, jobs=1,
           record_probe=False) -> CVResult:
    """Repeated k-fold evaluation; fold partitions are seeded by (seed, repeat).

    Folds that cannot be scored (e.g. a single class in a test fold) are kept
    as NaN with the reason in ``fold_meta``.
    """
    d = prepare(d, spec)
    stratified = scheme.stratified if scheme.stratified is not None else d.is_classification
    tasks = []
    for r in range(scheme.repeats):
        dr = d
        if spec.shuffle == "per_repeat":
            dr = data_mod.shuffle_features(d, [scheme.seed, r, _SHUFFLE])
        elif spec.shuffle == "once":
            dr = data_mod.shuffle_features(d, [scheme.seed, 0, _SHUFFLE])
        fold_of = fold_assignment(dr, scheme.folds, [scheme.seed, r], stratified)
        for k in range(scheme.folds):
            tasks.append((dr, r, k, np.flatnonzero(fold_of != k), np.flatnonzero(fold_of == k)))

    jobs = resolve_jobs(jobs)
    if jobs == 1 or len(tasks) == 1:
        results = [_evaluate_fold(dr, spec, scheme, r, k, tr, te, record_probe)
                   for dr, r, k, tr, te in tasks]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=jobs)(
            delayed(_evaluate_fold)(dr, spec, scheme, r, k, tr, te, record_probe)
            for dr, r, k, tr, te in tasks)

    scores = np.full((scheme.repeats, scheme.folds), np.nan)
    metas, notes = [], []
    for (_, r, k, _, _), (value, meta) in zip(tasks, results):
        scores[r, k] = value
        metas.append(meta)
        if "error" in meta:
            notes.append(f"repeat {r} fold {k} skipped: {meta['error']}")
    for note in notes:
        warnings.warn(note, AuditWarning, stacklevel=2)
    return CVResult(scores, metas, d.target_kind, notes)


@dataclass
class HoldoutResult:
    score: float
    pipeline: FittedPipeline
    train_rows: np.ndarray
    test_rows: np.ndarray
    test_predictions: np.ndarray
    extra_score: Optional[float] = None


def run_holdout(d: Dataset, spec: PipelineSpec, test_fraction=0.3, seed=0,
                stratify=True, extra_test: Optional[Dataset] = None) -> HoldoutResult:
    """Single random split; ``extra_test`` is an additional held-out dataset
    scored with the same fitted pipeline."""
    d = prepare(d, spec)
    if spec.shuffle != "none":
        d = data_mod.shuffle_features(d, [seed, 0, _SHUFFLE])
    train_rows, test_rows = data_mod.split_indices(d, test_fraction, seed, stratify)
    if spec.swap != "none":
        d = _apply_swap(d, train_rows, [seed, 0, 0, _SWAP, 0])
        if spec.swap == "train_test":
            d = _apply_swap(d, test_rows, [seed, 0, 0, _SWAP, 1])
    test = d.subset(test_rows)
    fp = fit_pipeline(d.subset(train_rows), spec, derive_seed(seed, 0, 0, _MODEL, spec.model.seed))
    pred = fp.predict(test)
    extra = None
    if extra_test is not None:
        extra = fp.score(prepare(extra_test, spec))
    return HoldoutResult(score_fn(fp.task, test.target, pred), fp, train_rows, test_rows,
                         pred, extra)
