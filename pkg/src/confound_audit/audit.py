"""Confound-leakage audit: evaluation variants, ROPE evidence and verdict.

The five variants compare a model trained on the raw features with the same
model trained on residualized features, on shuffled features (with and
without confound regression) and on the confound-predicted features alone.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cv import CVScheme, PipelineSpec, resolve_jobs, run_cv
from .data import BINARY, CONTINUOUS, AuditWarning, Dataset, one_hot_encode
from .errors import ConfoundAuditError, InconclusiveError, SimulationError, UndefinedMetricError
from .metrics import ScoreSummary, pearson
from .models import ModelSpec
from .rope import MEANINGFULLY_HIGHER, rope_compare

SCHEMA_VERSION = 1

RAW_X = "raw_x"
X_CR = "x_cr"
SHUFFLED_X = "shuffled_x"
SHUFFLED_X_CR = "shuffled_x_cr"
X_HAT_ONLY = "x_hat_only"
VARIANTS = (RAW_X, X_CR, SHUFFLED_X, SHUFFLED_X_CR, X_HAT_ONLY)
NEEDS_CONFOUND = (X_CR, SHUFFLED_X_CR, X_HAT_ONLY)
CHANCE = "chance"

NO_EVIDENCE = "no_evidence"
LEAKAGE_SUSPECTED = "leakage_suspected"
LEAKAGE_STRONG = "leakage_strong"
VERDICT_ORDER = (NO_EVIDENCE, LEAKAGE_SUSPECTED, LEAKAGE_STRONG)

# (variant, reference) pairs compared per model
COMPARISONS = ((X_CR, RAW_X), (X_HAT_ONLY, RAW_X), (SHUFFLED_X_CR, CHANCE))


@dataclass(frozen=True)
class ConfoundSource:
    """Where the confound comes from: ``user`` columns, the target itself
    (``taco``) or a ``simulated`` confound at Pearson correlation ``r``."""

    mode: str
    r: Optional[float] = None
    seed: int = 0
    tolerance: float = 0.02
    max_retries: int = 100

    def __post_init__(self):
        if self.mode not in ("user", "taco", "simulated"):
            raise ValueError(f"unknown confound source {self.mode!r}")
        if self.mode == "simulated" and not (self.r is not None and 0 < self.r < 1):
            raise ValueError("simulated confounds need 0 < r < 1")

    def describe(self):
        return f"simulated(r={self.r})" if self.mode == "simulated" else self.mode


@dataclass(frozen=True)
class RopeConfig:
    halfwidth: float = 0.01
    decision_threshold: float = 0.95
    test_fraction: Optional[float] = None  # defaults to 1 / folds


# --------------------------------------------------------------------------
# confound construction


def make_taco(d: Dataset) -> Dataset:
    """Replace the confounds by one column holding the (coded) target."""
    kind = BINARY if d.is_classification else CONTINUOUS
    return d.replace(confounds=d.target[:, None], confound_names=("taco",),
                     confound_kinds=(kind,))


def simulate_confound(target, r, seed, tolerance=0.02, max_retries=100):
    """Confound with Pearson correlation ``r`` (within ``tolerance``) to ``target``.

    Draws ``r * z + sqrt(1 - r^2) * noise`` with ``z`` the standardized target
    and redraws the noise until the empirical correlation is close enough.
    """
    y = np.asarray(target, dtype=float)
    sd = y.std()
    if not sd > 0:
        raise SimulationError("cannot simulate a confound for a constant target")
    z = (y - y.mean()) / sd
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max_retries):
        c = r * z + np.sqrt(1.0 - r * r) * rng.standard_normal(y.size)
        achieved = pearson(c, y)
        if abs(achieved - r) <= tolerance:
            return c
        if best is None or abs(achieved - r) < abs(best - r):
            best = achieved
    raise SimulationError(
        f"no confound within {tolerance} of r={r} after {max_retries} draws "
        f"(closest achieved correlation {best:.4f})")


def apply_confound_source(d: Dataset, source: ConfoundSource) -> Dataset:
    if source.mode == "taco":
        return make_taco(d)
    if source.mode == "simulated":
        c = simulate_confound(d.target, source.r, source.seed, source.tolerance,
                              source.max_retries)
        return d.replace(confounds=c[:, None], confound_names=(f"simulated_r{source.r}",),
                         confound_kinds=(CONTINUOUS,))
    return d


# --------------------------------------------------------------------------
# association table


def _assoc(a, b):
    try:
        return pearson(a, b)
    except UndefinedMetricError:
        return None


def association_table(d: Dataset):
    """Correlation of every confound with the target and with each feature.

    Pearson correlation is used throughout; with a 0/1 column it equals the
    point-biserial coefficient. Degenerate (constant) columns give ``None``.
    """
    rows = []
    for k, name in enumerate(d.confound_names):
        c = d.confounds[:, k]
        feats = [_assoc(c, d.features[:, j]) for j in range(d.p)]
        defined = np.array([v for v in feats if v is not None])
        row = {
            "confound": name,
            "kind": d.confound_kinds[k],
            "target_association": _assoc(c, d.target),
            "undefined": bool(np.ptp(c) == 0),
            "n_features_undefined": int(sum(v is None for v in feats)),
        }
        if defined.size:
            q = np.quantile(defined, [0.0, 0.25, 0.5, 0.75, 1.0])
            row["feature_association"] = dict(zip(("min", "q1", "median", "q3", "max"),
                                                  map(float, q)))
            j = int(np.nanargmax([abs(v) if v is not None else -1 for v in feats]))
            row["strongest_feature"] = {"feature": d.feature_names[j], "r": feats[j]}
        else:
            row["feature_association"] = None
            row["strongest_feature"] = None
        rows.append(row)
    return rows


# --------------------------------------------------------------------------
# report types


@dataclass
class AuditCell:
    variant: str
    model: str
    fold_scores: Optional[list]  # repeats x folds, None entries for invalid folds
    summary: Optional[ScoreSummary]
    valid: bool = True
    reason: Optional[str] = None

    def flat(self):
        return np.array([np.nan if v is None else v for row in self.fold_scores for v in row],
                        dtype=float)

    def to_dict(self):
        return {
            "variant": self.variant,
            "model": self.model,
            "valid": self.valid,
            "reason": self.reason,
            "summary": None if self.summary is None else self.summary.to_dict(),
            "fold_scores": self.fold_scores,
        }

    @classmethod
    def from_dict(cls, obj):
        s = obj.get("summary")
        scores = obj.get("fold_scores")
        summary = None
        if s is not None:
            flat = [v for row in scores for v in row if v is not None]
            summary = ScoreSummary(s["mean"], s["sd"], tuple(flat))
        return cls(obj["variant"], obj["model"], scores, summary, obj["valid"], obj.get("reason"))


@dataclass
class Comparison:
    model: str
    variant: str
    reference: str
    result: object  # RopeResult

    @property
    def decision(self):
        return self.result.decision

    def to_dict(self):
        return {"model": self.model, "variant": self.variant, "reference": self.reference,
                **self.result.to_dict()}


@dataclass
class AuditReport:
    dataset: dict
    confound_source: str
    models: list
    scheme: dict
    variants: list
    cells: list
    chance: Optional[AuditCell]
    comparisons: list
    associations: list
    verdict: Optional[str]
    reasons: list
    config: dict = field(default_factory=dict)
    seed: int = 0
    schema_version: int = SCHEMA_VERSION

    def cell(self, variant, model):
        if variant == CHANCE:
            return self.chance
        for c in self.cells:
            if c.variant == variant and c.model == model:
                return c
        return None

    def comparison(self, model, variant, reference):
        for c in self.comparisons:
            if (c.model, c.variant, c.reference) == (model, variant, reference):
                return c
        return None

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "dataset": self.dataset,
            "confound_source": self.confound_source,
            "seed": self.seed,
            "config": self.config,
            "models": self.models,
            "scheme": self.scheme,
            "variants": self.variants,
            "cells": [c.to_dict() for c in self.cells],
            "chance": None if self.chance is None else self.chance.to_dict(),
            "comparisons": [c.to_dict() for c in self.comparisons],
            "associations": self.associations,
            "verdict": {"label": self.verdict, "reasons": self.reasons},
        }


# --------------------------------------------------------------------------
# verdict


def verdict(comparisons: Sequence[Comparison]):
    """Leakage verdict and the reasons behind it.

    Per model: residualized features meaningfully better than raw features
    raise suspicion; the suspicion becomes strong when shuffled features after
    confound regression beat chance or the confound-predicted features beat
    the raw features. The overall verdict is the strongest over models.
    """
    by_model = {}
    for c in comparisons:
        by_model.setdefault(c.model, {})[(c.variant, c.reference)] = c
    if not any((X_CR, RAW_X) in v for v in by_model.values()):
        raise InconclusiveError("verdict needs an x_cr vs raw_x comparison for some model")
    level = 0
    reasons = []

    def note(c):
        r = c.result
        return (f"{c.model}: {c.variant} {r.decision.replace('_', ' ')} than {c.reference} "
                f"(p_left={r.p_left:.3f}, p_rope={r.p_rope:.3f}, p_right={r.p_right:.3f})")

    for model, comps in by_model.items():
        main = comps.get((X_CR, RAW_X))
        if main is None or main.decision != MEANINGFULLY_HIGHER:
            continue
        model_level = 1
        reasons.append(note(main))
        for key in ((SHUFFLED_X_CR, CHANCE), (X_HAT_ONLY, RAW_X)):
            c = comps.get(key)
            if c is not None and c.decision == MEANINGFULLY_HIGHER:
                model_level = 2
                reasons.append(note(c))
        level = max(level, model_level)
    return VERDICT_ORDER[level], reasons


# --------------------------------------------------------------------------
# running


def _pipeline_for(variant, source: ConfoundSource, model: ModelSpec, shuffle_mode, swap):
    cr = "taco" if source.mode == "taco" else "confounds"
    base = PipelineSpec(model=model, swap=swap)
    if variant == RAW_X:
        return base
    if variant == X_CR:
        return base.replace(cr_variant=cr)
    if variant == SHUFFLED_X:
        return base.replace(shuffle=shuffle_mode)
    if variant == SHUFFLED_X_CR:
        return base.replace(cr_variant=cr, shuffle=shuffle_mode)
    if variant == X_HAT_ONLY:
        return base.replace(cr_variant=cr, x_hat_only=True)
    raise ValueError(f"unknown variant {variant!r}")


def _run_cell(d, variant, model, pipeline_kw, scheme, jobs):
    try:
        res = run_cv(d, _pipeline_for(variant, model=model, **pipeline_kw), scheme, jobs=jobs)
    except ConfoundAuditError as exc:
        return AuditCell(variant, model.name, None, None, False, f"{type(exc).__name__}: {exc}")
    fold_scores = [[None if not np.isfinite(v) else float(v) for v in row] for row in res.scores]
    if not res.valid:
        reason = res.warnings[0] if res.warnings else "no fold could be scored"
        return AuditCell(variant, model.name, fold_scores, None, False, reason)
    reason = "; ".join(res.warnings) if res.warnings else None
    return AuditCell(variant, model.name, fold_scores, ScoreSummary.from_scores(res.scores),
                     True, reason)


def _compare(a: AuditCell, b: AuditCell, model, variant, reference, rope_cfg, scheme):
    if a is None or b is None or not (a.valid and b.valid):
        return None
    x, y = a.flat(), b.flat()
    ok = np.isfinite(x) & np.isfinite(y)
    if ok.sum() < 2:
        return None
    tf = rope_cfg.test_fraction if rope_cfg.test_fraction is not None else scheme.test_fraction
    res = rope_compare(x[ok], y[ok], rope_cfg.halfwidth, tf, rope_cfg.decision_threshold)
    return Comparison(model, variant, reference, res)


def run_audit(d: Dataset, confound_source: ConfoundSource, models: Sequence[ModelSpec],
              scheme: CVScheme = CVScheme(), variants: Sequence[str] = VARIANTS,
              rope: RopeConfig = RopeConfig(), single_shuffle=False, swap="none",
              jobs=1, config: Optional[dict] = None) -> AuditReport:
    """Evaluate every (variant, model) cell under ``scheme`` and assemble the report.

    A dummy model on the raw features is always evaluated as the chance
    reference. Cells that fail are kept in the report, marked invalid.
    """
    variants = [v for v in VARIANTS if v in set(variants)]
    unknown = set(variants) - set(VARIANTS)
    if not variants or unknown:
        raise ValueError(f"variants must be a nonempty subset of {VARIANTS}")
    if not models:
        raise ValueError("at least one model is required")
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise ValueError(f"model names must be unique, got {names}")
    jobs = resolve_jobs(jobs)
    d = apply_confound_source(d, confound_source)
    pipeline_kw = {"source": confound_source,
                   "shuffle_mode": "once" if single_shuffle else "per_repeat",
                   "swap": swap}

    cells = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AuditWarning)
        for variant in variants:
            for m in models:
                if variant in NEEDS_CONFOUND and confound_source.mode == "user" and d.q == 0:
                    cells.append(AuditCell(variant, m.name, None, None, False,
                                           "no confound columns available"))
                    continue
                cells.append(_run_cell(d, variant, m, pipeline_kw, scheme, jobs))
        chance = _run_cell(d, RAW_X, ModelSpec("dummy", label="dummy"), pipeline_kw, scheme, jobs)
    chance.variant = CHANCE

    report = AuditReport(
        dataset={"fingerprint": d.fingerprint(), "n": d.n, "p": d.p,
                 "p_encoded": one_hot_encode(d).p, "q": d.q, "target_kind": d.target_kind,
                 "feature_names": list(d.feature_names),
                 "confound_names": list(d.confound_names)},
        confound_source=confound_source.describe(),
        models=[m.to_dict() for m in models],
        scheme={"repeats": scheme.repeats, "folds": scheme.folds,
                "stratified": scheme.stratified, "seed": scheme.seed,
                "inner_search": None if scheme.inner_search is None
                else dataclasses.asdict(scheme.inner_search)},
        variants=list(variants),
        cells=cells, chance=chance, comparisons=[],
        associations=association_table(d),
        verdict=None, reasons=[],
        config=dict(config or {}),
        seed=scheme.seed,
    )
    for m in models:
        if m.kind == "dummy":
            continue
        for variant, reference in COMPARISONS:
            c = _compare(report.cell(variant, m.name), report.cell(reference, m.name),
                         m.name, variant, reference, rope, scheme)
            if c is not None:
                report.comparisons.append(c)
    try:
        report.verdict, report.reasons = verdict(report.comparisons)
    except InconclusiveError as exc:
        report.verdict, report.reasons = None, [f"inconclusive: {exc}"]
    return report
