"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are printed even
when output capturing is on). Scores come from the package's own harness;
the oracles used for comparison are computed independently in this file.
"""

import json
import math
import time
import warnings

import numpy as np
import pytest

from confound_audit.audit import (
    CHANCE,
    LEAKAGE_STRONG,
    LEAKAGE_SUSPECTED,
    NO_EVIDENCE,
    RAW_X,
    SHUFFLED_X_CR,
    X_CR,
    X_HAT_ONLY,
    Comparison,
    verdict,
)
from confound_audit.cli import main as cli_main
from confound_audit.confound import fit_cr, transform_cr
from confound_audit.cv import CVScheme, PipelineSpec, run_cv, run_holdout
from confound_audit.data import AuditWarning
from confound_audit.metrics import aucroc, pearson, r2
from confound_audit.models import ModelSpec, mlp
from confound_audit.rope import (
    MEANINGFULLY_HIGHER,
    MEANINGFULLY_LOWER,
    PRACTICALLY_EQUIVALENT,
    RopeResult,
    rope_compare,
)
from confound_audit.simgen import (
    gen_binary_balanced,
    gen_opposing_extremes,
    gen_rounded_feature,
    gen_skewed_features,
    gen_walkthrough_regression,
)

from conftest import make_dataset

TREE = ModelSpec("tree")
# 50 trees keep the 5-seed skewed-feature sweep inside its runtime budget
FOREST = ModelSpec("forest", n_trees=50)


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AuditWarning)
        yield


@pytest.fixture
def line(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number:02d} {'PASS' if ok else 'FAIL'} {title}: {detail}")
        return ok
    return emit


def cv_scores(d, spec, scheme):
    return run_cv(d, spec, scheme).scores.ravel()


# ---------------------------------------------------------------- 1


def test_01_cr_correctness(line):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    worst_orth = worst_rec = worst_group = 0.0
    for _ in range(100):
        x = rng.standard_normal((200, 10))
        c = rng.standard_normal((200, 3))
        x = x + c @ rng.standard_normal((3, 10))
        x_cr, x_hat = transform_cr(fit_cr(x, c), x, c)
        design = np.column_stack([np.ones(200), c])
        dots = np.abs(x_cr.T @ design) / np.outer(np.linalg.norm(x_cr, axis=0),
                                                    np.linalg.norm(design, axis=0))
        worst_orth = max(worst_orth, dots.max())
        worst_rec = max(worst_rec, np.abs(x_hat + x_cr - x).max())
        g = rng.integers(0, 2, 200).astype(float)
        g_cr, _ = transform_cr(fit_cr(x, g), x, g)
        means = np.where(g[:, None] == 1, x[g == 1].mean(axis=0), x[g == 0].mean(axis=0))
        worst_group = max(worst_group, np.abs(g_cr - (x - means)).max())
    elapsed = time.perf_counter() - start
    ok = worst_orth <= 1e-8 and worst_rec <= 1e-10 and worst_group <= 1e-12 and elapsed < 10
    line(1, "CR correctness", ok,
         f"max normalized dot {worst_orth:.1e} (<=1e-8), reconstruction {worst_rec:.1e} "
         f"(<=1e-10), group-mean gap {worst_group:.1e} (<=1e-12), {elapsed:.1f} s (<10 s)")
    assert ok


# ---------------------------------------------------------------- 2


def pair_count_auc(y, s):
    pos, neg = s[y == 1], s[y == 0]
    hits = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg)
    return hits / (len(pos) * len(neg))


def direct_r2(y, f):
    ybar = math.fsum(y) / len(y)
    return 1.0 - math.fsum((a - b) ** 2 for a, b in zip(y, f)) / math.fsum(
        (a - ybar) ** 2 for a in y)


def direct_pearson(a, b):
    n = len(a)
    ma, mb = math.fsum(a) / n, math.fsum(b) / n
    sab = math.fsum((u - ma) * (v - mb) for u, v in zip(a, b))
    saa = math.fsum((u - ma) ** 2 for u in a)
    sbb = math.fsum((v - mb) ** 2 for v in b)
    return sab / math.sqrt(saa * sbb)


def test_02_metric_oracles(line):
    rng = np.random.default_rng(2)
    auc_mismatch = 0
    worst_r2 = worst_r = 0.0
    for _ in range(200):
        n = int(rng.integers(4, 51))
        y = rng.integers(0, 2, n).astype(float)
        y[:2] = [0, 1]
        s = rng.integers(0, 6, n).astype(float)  # heavy ties
        auc_mismatch += aucroc(y, s) != pair_count_auc(y, s)
        a = rng.standard_normal(n)
        f = a + rng.standard_normal(n)
        worst_r2 = max(worst_r2, abs(r2(a, f) - direct_r2(a, f)))
        worst_r = max(worst_r, abs(pearson(a, f) - direct_pearson(a, f)))
    ok = auc_mismatch == 0 and worst_r2 <= 1e-12 and worst_r <= 1e-12
    line(2, "metric oracles", ok,
         f"AUC mismatches {auc_mismatch}/200 (exact), r2 gap {worst_r2:.1e}, "
         f"pearson gap {worst_r:.1e} (<=1e-12)")
    assert ok


# ---------------------------------------------------------------- 3


def test_03_rope_monte_carlo(line):
    rng = np.random.default_rng(3)
    worst = 0.0
    antisymmetric = True
    for i in range(20):
        n = int(rng.integers(5, 60))
        a = rng.normal(0.7, 0.05, n)
        b = a - rng.normal(rng.uniform(-0.03, 0.03), 0.03, n)
        r = rope_compare(a, b, 0.01, 0.2)
        d = a - b
        scale = math.sqrt((1 / n + 0.2 / 0.8) * d.var(ddof=1))
        draws = d.mean() + scale * np.random.default_rng(100 + i).standard_t(n - 1, 100_000)
        mc = (np.mean(draws < -0.01), np.mean(np.abs(draws) <= 0.01), np.mean(draws > 0.01))
        worst = max(worst, *(abs(u - v) for u, v in zip(mc, (r.p_left, r.p_rope, r.p_right))))
        s = rope_compare(b, a, 0.01, 0.2)
        antisymmetric &= (s.p_left == r.p_right and s.p_right == r.p_left
                          and s.p_rope == r.p_rope)
    ok = worst <= 0.01 and antisymmetric
    line(3, "ROPE vs Monte Carlo", ok,
         f"max |mass - MC| {worst:.4f} (<=0.01), antisymmetry exact: {antisymmetric}")
    assert ok


# ---------------------------------------------------------------- 4


def test_04_swap_mechanism(line):
    start = time.perf_counter()
    no_swap, swap, raw = [], [], []
    for seed in range(10):
        d = gen_binary_balanced(1000, seed)
        scheme = CVScheme(repeats=10, folds=5, seed=seed)
        taco = PipelineSpec(TREE, cr_variant="taco")
        no_swap.append(cv_scores(d, taco, scheme).mean())
        swap.append(cv_scores(d, taco.replace(swap="train"), scheme).mean())
        raw.append(cv_scores(d, PipelineSpec(TREE, swap="train"), scheme).mean())
    elapsed = time.perf_counter() - start
    m0, m1, mr = np.median(no_swap), np.median(swap), np.median(raw)
    ok = 0.45 <= m0 <= 0.55 and m1 >= 0.95 and 0.4 <= mr <= 0.6 and elapsed < 60
    line(4, "swap mechanism", ok,
         f"median AUCROC TaCo-CR no swap {m0:.3f} in [0.45,0.55], with swap {m1:.3f} >=0.95, "
         f"raw with swap {mr:.3f} in [0.4,0.6]; {elapsed:.1f} s (<60 s)")
    assert ok


# ---------------------------------------------------------------- 5 and 10


@pytest.fixture(scope="module")
def skewed_runs():
    start = time.perf_counter()
    rows = []
    scheme = CVScheme(repeats=1, folds=5, seed=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AuditWarning)
        for seed in range(5):
            for dist, p in (("chi2_df3", 1), ("chi2_df3", 10), ("chi2_df3", 100),
                            ("normal", 100)):
                d = gen_skewed_features(1000, p, dist, seed)
                s = CVScheme(repeats=scheme.repeats, folds=scheme.folds, seed=seed)
                raw = cv_scores(d, PipelineSpec(FOREST), s)
                taco = cv_scores(d, PipelineSpec(FOREST, cr_variant="taco"), s)
                rows.append((seed, dist, p, raw, taco, rope_compare(taco, raw, 0.01, 0.2)))
    return rows, time.perf_counter() - start


def test_05_skewed_feature_scaling(line, skewed_runs):
    rows, elapsed = skewed_runs
    med = {(dist, p): np.median([t.mean() for _, d_, p_, _, t, _ in rows
                                 if (d_, p_) == (dist, p)])
           for _, dist, p, _, _, _ in rows}
    higher = {(dist, p): sum(r.decision == MEANINGFULLY_HIGHER for _, d_, p_, _, _, r in rows
                             if (d_, p_) == (dist, p))
              for _, dist, p, _, _, _ in rows}
    c1, c10, c100 = med[("chi2_df3", 1)], med[("chi2_df3", 10)], med[("chi2_df3", 100)]
    ok = (c100 > c10 > c1 and higher[("chi2_df3", 100)] >= 3
          and higher[("normal", 100)] < 3 and elapsed < 600)
    line(5, "skewed-feature scaling", ok,
         f"median TaCo-CR R2 chi2 p=1 {c1:.3f} < p=10 {c10:.3f} < p=100 {c100:.3f}; "
         f"meaningfully higher than raw: chi2 p=100 in {higher[('chi2_df3', 100)]}/5 seeds, "
         f"normal p=100 in {higher[('normal', 100)]}/5 seeds; {elapsed:.0f} s (<600 s)")
    assert ok


def test_10_shuffle_diagnostic(line, skewed_runs):
    models = [TREE, FOREST, ModelSpec("mlp"), "lr"]
    details, ok = [], True
    swap_d = gen_binary_balanced(1000, 0)
    skew_d = gen_skewed_features(1000, 100, "chi2_df3", 0)
    for name, d, scheme, extra in (
            ("swap", swap_d, CVScheme(repeats=10, seed=0), {"swap": "train"}),
            ("skewed", skew_d, CVScheme(repeats=1, seed=0), {})):
        for m in models:
            if m == "lr":
                m = ModelSpec("logistic" if d.is_classification else "linear")
            s = cv_scores(d, PipelineSpec(m, shuffle="per_repeat", **extra), scheme).mean()
            within = 0.45 <= s <= 0.55 if d.is_classification else s <= 0.05
            ok &= within
            details.append(f"{name}/{m.kind} {s:.3f}")
    scheme = CVScheme(repeats=10, seed=0)
    tree_cr = cv_scores(swap_d, PipelineSpec(TREE, cr_variant="taco", shuffle="per_repeat",
                                             swap="train"), scheme)
    dummy = cv_scores(swap_d, PipelineSpec(ModelSpec("dummy"), swap="train"), scheme)
    above = rope_compare(tree_cr, dummy, 0.01, scheme.test_fraction).decision
    ok &= above == MEANINGFULLY_HIGHER
    line(10, "shuffle diagnostic", ok,
         "shuffled X without CR at chance: " + ", ".join(details)
         + f"; tree shuffled X after TaCo CR vs dummy on swap data: {above} "
         f"(mean {tree_cr.mean():.3f})")
    assert ok


# ---------------------------------------------------------------- 6


def test_06_rounding_mechanism(line):
    start = time.perf_counter()
    chance_ok, leak_ok = 0, 0
    worst_raw = worst_taco = -np.inf
    for seed in range(10):
        raw_d, rounded_d = gen_rounded_feature(20000, seed, decimals=1)
        scheme = CVScheme(repeats=2, folds=5, seed=seed)
        spec = PipelineSpec(TREE)
        r0 = cv_scores(raw_d, spec, scheme)
        t0 = cv_scores(raw_d, spec.replace(cr_variant="taco"), scheme)
        worst_raw, worst_taco = max(worst_raw, r0.mean()), max(worst_taco, t0.mean())
        chance_ok += r0.mean() <= 0.05 and t0.mean() <= 0.05
        r1 = cv_scores(rounded_d, spec, scheme)
        t1 = cv_scores(rounded_d, spec.replace(cr_variant="taco"), scheme)
        leak_ok += rope_compare(t1, r1, 0.01, 0.2).decision == MEANINGFULLY_HIGHER
    elapsed = time.perf_counter() - start
    ok = chance_ok == 10 and leak_ok == 10 and elapsed < 120
    line(6, "rounding mechanism", ok,
         f"non-rounded at chance in {chance_ok}/10 seeds (max mean R2 raw {worst_raw:.3f}, "
         f"TaCo-CR {worst_taco:.3f}, <=0.05); rounded TaCo-CR meaningfully higher in "
         f"{leak_ok}/10 seeds; {elapsed:.1f} s (<120 s)")
    assert ok


# ---------------------------------------------------------------- 7


def test_07_opposing_extremes(line):
    wins_full = wins_clean = 0
    tree = ModelSpec("tree", max_depth=4)
    for seed in range(10):
        d, _, clean = gen_opposing_extremes(2000, seed, exclude_extremes_test=True)
        raw = run_holdout(d, PipelineSpec(tree), 0.3, seed, extra_test=clean)
        cr = run_holdout(d, PipelineSpec(tree, cr_variant="taco"), 0.3, seed, extra_test=clean)
        wins_full += cr.score > raw.score
        wins_clean += cr.extra_score > raw.extra_score
    ok = wins_full >= 6 and wins_clean >= 6
    line(7, "opposing extremes", ok,
         f"TaCo-CR AUCROC above raw on the full test set in {wins_full}/10 seeds and on the "
         f"extreme-free test set in {wins_clean}/10 seeds (majority needed)")
    assert ok


# ---------------------------------------------------------------- 8


def test_08_walkthrough_regression(line):
    counts = {"cr": 0, "xhat": 0, "shuffled": 0}
    tree = ModelSpec("tree", max_depth=2)
    for seed in range(10):
        d = gen_walkthrough_regression(1000, seed)
        base = PipelineSpec(tree)
        s = {name: run_holdout(d, spec, 0.3, seed).score for name, spec in (
            ("raw", base),
            ("cr", base.replace(cr_variant="confounds")),
            ("xhat", base.replace(cr_variant="confounds", x_hat_only=True)),
            ("shuffled", base.replace(shuffle="once")),
            ("shuffled_cr", base.replace(shuffle="once", cr_variant="confounds")))}
        counts["cr"] += s["cr"] > s["raw"]
        counts["xhat"] += s["xhat"] > s["raw"]
        counts["shuffled"] += s["shuffled"] <= 0.05 and s["shuffled_cr"] <= 0.05
    ok = all(v >= 6 for v in counts.values())
    line(8, "walk-through regression", ok,
         f"R2(X_CR) > R2(X) in {counts['cr']}/10, R2(X_hat) > R2(X) in {counts['xhat']}/10, "
         f"shuffled with and without CR at chance (<=0.05) in {counts['shuffled']}/10")
    assert ok


# ---------------------------------------------------------------- 9


def test_09_linear_control(line):
    rng = np.random.default_rng(9)
    x = rng.standard_normal((500, 5))
    y = x @ np.array([1.0, -0.5, 0.8, 0.0, 0.3]) + 0.5 * rng.standard_normal(500)
    d = make_dataset(x, y, classification=False)
    scheme = CVScheme(repeats=10, folds=5, seed=9)
    lin = ModelSpec("linear")
    raw = cv_scores(d, PipelineSpec(lin), scheme)
    taco = cv_scores(d, PipelineSpec(lin, cr_variant="taco"), scheme)
    r = rope_compare(taco, raw, 0.01, scheme.test_fraction)
    ok = r.decision == MEANINGFULLY_LOWER
    line(9, "linear-model control", ok,
         f"linear R2 raw {raw.mean():.3f}, TaCo-CR {taco.mean():.3f}: {r.decision} "
         f"(p_left {r.p_left:.3f})")
    assert ok


# ---------------------------------------------------------------- 11


def test_11_mlp_gradient(line):
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        p, h, n = (int(v) for v in (rng.integers(1, 5), rng.integers(2, 8), rng.integers(3, 15)))
        x = rng.standard_normal((n, p))
        classification = seed % 2 == 0
        y = rng.integers(0, 2, n).astype(float) if classification else rng.standard_normal(n)
        params = mlp.init_params(p, h, rng)
        params["b1"] = 0.1 * rng.standard_normal(h)
        params["b2"] = 0.1 * rng.standard_normal(1)
        _, grad = mlp.loss_and_grad(params, x, y, classification, 0.01)
        for k, value in params.items():
            for idx in np.ndindex(value.shape):
                hi = {key: v.copy() for key, v in params.items()}
                lo = {key: v.copy() for key, v in params.items()}
                hi[k][idx] += 1e-6
                lo[k][idx] -= 1e-6
                num = (mlp.loss_and_grad(hi, x, y, classification, 0.01)[0]
                       - mlp.loss_and_grad(lo, x, y, classification, 0.01)[0]) / 2e-6
                ana = grad[k][idx]
                worst = max(worst, abs(num - ana) / max(abs(num), abs(ana), 1e-4))
    ok = worst <= 1e-4
    line(11, "MLP gradient check", ok, f"max relative error {worst:.2e} over 20 networks "
                                       f"(<=1e-4)")
    assert ok


# ---------------------------------------------------------------- 12


def test_12_determinism(line, tmp_path):
    sim = tmp_path / "swap.csv"
    cli_main(["simulate", "--kind", "swap", "--n", "1000", "--seed", "12", "--out", str(sim)])
    outs = []
    for i, jobs in enumerate(("1", "1", "2")):
        out = tmp_path / f"run{i}"
        args = ["audit", "--data", str(sim), "--target", "target", "--strata", "stratum",
                "--taco", "--models", "tree,forest,lr", "--n-trees", "10", "--repeats", "3",
                "--swap", "train", "--seed", "12", "--jobs", jobs, "--out-dir", str(out)]
        assert cli_main(args) == 0
        outs.append((out / "report.json").read_bytes())
    no_time = not any("time" in key for key in json.loads(outs[0]))
    ok = outs[0] == outs[1] == outs[2] and no_time
    line(12, "determinism", ok,
         f"report.json byte-identical across 2 runs with --jobs 1 and 1 run with --jobs 2: "
         f"{outs[0] == outs[1] == outs[2]}; no timestamp fields: {no_time}")
    assert ok


# ---------------------------------------------------------------- 13


def _comp(variant, reference, decision):
    probs = {MEANINGFULLY_HIGHER: (0.0, 0.02, 0.98), MEANINGFULLY_LOWER: (0.98, 0.02, 0.0),
             PRACTICALLY_EQUIVALENT: (0.0, 1.0, 0.0)}[decision]
    return Comparison("tree", variant, reference, RopeResult(*probs, 0.01, decision))


def test_13_verdict_logic(line):
    strong, _ = verdict([_comp(X_CR, RAW_X, MEANINGFULLY_HIGHER),
                         _comp(X_HAT_ONLY, RAW_X, MEANINGFULLY_HIGHER)])
    none, _ = verdict([_comp(X_CR, RAW_X, MEANINGFULLY_LOWER)])
    suspected, _ = verdict([_comp(X_CR, RAW_X, MEANINGFULLY_HIGHER),
                            _comp(X_HAT_ONLY, RAW_X, MEANINGFULLY_LOWER),
                            _comp(SHUFFLED_X_CR, CHANCE, PRACTICALLY_EQUIVALENT)])
    ok = (strong, none, suspected) == (LEAKAGE_STRONG, NO_EVIDENCE, LEAKAGE_SUSPECTED)
    line(13, "verdict logic", ok, f"strong -> {strong}, none -> {none}, "
                                  f"suspected -> {suspected}")
    assert ok
