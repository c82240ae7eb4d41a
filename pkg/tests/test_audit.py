import numpy as np
import pytest

from confound_audit.audit import (
    CHANCE,
    LEAKAGE_STRONG,
    LEAKAGE_SUSPECTED,
    NO_EVIDENCE,
    RAW_X,
    SHUFFLED_X,
    SHUFFLED_X_CR,
    VARIANTS,
    X_CR,
    X_HAT_ONLY,
    Comparison,
    ConfoundSource,
    apply_confound_source,
    association_table,
    make_taco,
    run_audit,
    simulate_confound,
    verdict,
)
from confound_audit.cv import CVScheme, PipelineSpec, run_cv
from confound_audit.errors import InconclusiveError, SimulationError
from confound_audit.metrics import pearson, point_biserial
from confound_audit.models import ModelSpec
from confound_audit.rope import (
    MEANINGFULLY_HIGHER,
    MEANINGFULLY_LOWER,
    PRACTICALLY_EQUIVALENT,
    RopeResult,
)
from confound_audit.simgen import gen_binary_balanced

from conftest import make_dataset


def comp(variant, reference, decision, model="tree"):
    probs = {MEANINGFULLY_HIGHER: (0.0, 0.01, 0.99), MEANINGFULLY_LOWER: (0.99, 0.01, 0.0),
             PRACTICALLY_EQUIVALENT: (0.0, 1.0, 0.0)}[decision]
    return Comparison(model, variant, reference, RopeResult(*probs, 0.01, decision))


# ------------------------------------------------------------------ verdict


def test_verdict_strong_via_x_hat():
    label, reasons = verdict([comp(X_CR, RAW_X, MEANINGFULLY_HIGHER),
                              comp(X_HAT_ONLY, RAW_X, MEANINGFULLY_HIGHER),
                              comp(SHUFFLED_X_CR, CHANCE, PRACTICALLY_EQUIVALENT)])
    assert label == LEAKAGE_STRONG
    assert len(reasons) == 2 and any("x_hat_only" in r for r in reasons)


def test_verdict_none_when_cr_lower():
    label, reasons = verdict([comp(X_CR, RAW_X, MEANINGFULLY_LOWER),
                              comp(X_HAT_ONLY, RAW_X, MEANINGFULLY_HIGHER)])
    assert label == NO_EVIDENCE and reasons == []


def test_verdict_suspected_without_secondary_evidence():
    label, reasons = verdict([comp(X_CR, RAW_X, MEANINGFULLY_HIGHER),
                              comp(X_HAT_ONLY, RAW_X, MEANINGFULLY_LOWER),
                              comp(SHUFFLED_X_CR, CHANCE, PRACTICALLY_EQUIVALENT)])
    assert label == LEAKAGE_SUSPECTED and len(reasons) == 1


def test_verdict_needs_main_comparison():
    with pytest.raises(InconclusiveError):
        verdict([comp(X_HAT_ONLY, RAW_X, MEANINGFULLY_HIGHER)])


def test_verdict_monotone_in_secondary_tests():
    decisions = (MEANINGFULLY_HIGHER, MEANINGFULLY_LOWER, PRACTICALLY_EQUIVALENT)
    order = [NO_EVIDENCE, LEAKAGE_SUSPECTED, LEAKAGE_STRONG]
    for main in decisions:
        for sec in decisions:
            base = [comp(X_CR, RAW_X, main), comp(X_HAT_ONLY, RAW_X, sec)]
            more = base + [comp(SHUFFLED_X_CR, CHANCE, MEANINGFULLY_HIGHER)]
            assert order.index(verdict(more)[0]) >= order.index(verdict(base)[0])


def test_verdict_strongest_over_models():
    label, _ = verdict([comp(X_CR, RAW_X, MEANINGFULLY_LOWER, "lr"),
                        comp(X_CR, RAW_X, MEANINGFULLY_HIGHER, "tree"),
                        comp(SHUFFLED_X_CR, CHANCE, MEANINGFULLY_HIGHER, "tree")])
    assert label == LEAKAGE_STRONG


# ------------------------------------------------------------------ confounds


def test_make_taco():
    d = make_dataset([1.0, 2.0, 3.0], [0.0, 1.0, 0.0])
    t = make_taco(d)
    assert t.confounds[:, 0].tolist() == [0, 1, 0]
    assert point_biserial(t.confounds[:, 0], t.target) == 1.0
    r = make_taco(make_dataset([1.0, 2.0, 3.0], [0.3, 1.7, 2.2], classification=False))
    assert r.confounds[:, 0].tolist() == [0.3, 1.7, 2.2]


def test_simulate_confound(rng):
    y = rng.integers(0, 2, 1000).astype(float)
    c = simulate_confound(y, 0.8, 3)
    assert 0.78 <= pearson(c, y) <= 0.82
    np.testing.assert_array_equal(c, simulate_confound(y, 0.8, 3))
    with pytest.raises(SimulationError):
        simulate_confound(np.ones(10), 0.5, 0)
    with pytest.raises(SimulationError, match="achieved"):
        simulate_confound(y[:20], 0.5, 0, tolerance=1e-9, max_retries=3)


def test_association_table(rng):
    n = 10000
    x = rng.standard_normal((n, 3))
    y = rng.standard_normal(n)
    c = np.column_stack([rng.standard_normal(n), np.ones(n)])
    rows = association_table(make_dataset(x, y, c, classification=False))
    assert abs(rows[0]["target_association"]) < 0.05
    assert abs(rows[0]["feature_association"]["max"]) < 0.05
    assert rows[1]["undefined"] and rows[1]["target_association"] is None
    taco = association_table(make_taco(make_dataset(x, y, classification=False)))
    assert taco[0]["target_association"] == 1.0


def test_simulated_r_approaches_taco():
    d = gen_binary_balanced(400, 0)
    scheme = CVScheme(repeats=2, seed=1)
    spec = PipelineSpec(ModelSpec("tree"), cr_variant="confounds", swap="train")
    taco = run_cv(d, spec.replace(cr_variant="taco"), scheme).scores.mean()
    scores = []
    for r in (0.8, 0.99):
        ds = apply_confound_source(d, ConfoundSource("simulated", r=r, seed=2))
        scores.append(run_cv(ds, spec, scheme).scores.mean())
    assert scores[0] < scores[1] <= taco
    assert taco - scores[1] < 0.02


# ------------------------------------------------------------------ run_audit


@pytest.fixture(scope="module")
def swap_report():
    d = gen_binary_balanced(400, 0)
    return run_audit(d, ConfoundSource("taco"), [ModelSpec("tree"), ModelSpec("logistic")],
                     CVScheme(repeats=2, seed=0), swap="train")


def test_swap_audit_strong(swap_report):
    r = swap_report
    assert r.verdict == LEAKAGE_STRONG
    assert r.comparison("tree", X_CR, RAW_X).decision == MEANINGFULLY_HIGHER
    assert r.comparison("tree", SHUFFLED_X_CR, CHANCE).decision == MEANINGFULLY_HIGHER


def test_report_complete_and_consistent(swap_report):
    r = swap_report
    assert [(c.variant, c.model) for c in r.cells] == [
        (v, m) for v in VARIANTS for m in ("tree", "logistic")]
    assert r.chance.model == "dummy"
    for c in r.comparisons:
        assert r.cell(c.variant, c.model) is not None and r.cell(c.reference, c.model)
    assert all(str(c.model) in " ".join(r.reasons) for c in r.comparisons
               if c.decision == MEANINGFULLY_HIGHER and c.variant == X_CR)
    shuffled = r.cell(SHUFFLED_X, "tree").summary.mean
    assert 0.4 <= shuffled <= 0.6


def test_linear_signal_taco_no_evidence(linear_regression):
    r = run_audit(linear_regression, ConfoundSource("taco"), [ModelSpec("linear")],
                  CVScheme(repeats=2), variants=[RAW_X, X_CR])
    assert r.comparison("linear", X_CR, RAW_X).decision == MEANINGFULLY_LOWER
    assert r.verdict == NO_EVIDENCE


def test_invalid_cells_marked(rng):
    d = make_dataset(rng.standard_normal((40, 2)), rng.standard_normal(40),
                     classification=False)
    r = run_audit(d, ConfoundSource("user"), [ModelSpec("linear")], CVScheme(repeats=1))
    cell = r.cell(X_CR, "linear")
    assert not cell.valid and "confound" in cell.reason
    assert r.cell(RAW_X, "linear").valid
    assert r.verdict is None and r.reasons[0].startswith("inconclusive")


def test_model_error_cell_invalid(linear_regression):
    r = run_audit(linear_regression, ConfoundSource("taco"), [ModelSpec("logistic")],
                  CVScheme(repeats=1), variants=[RAW_X])
    cell = r.cell(RAW_X, "logistic")
    assert not cell.valid and cell.reason


def test_shuffle_redrawn_per_repeat(rng):
    d = make_dataset(rng.standard_normal((60, 1)), (rng.uniform(size=60) > 0.5).astype(float))
    per = run_audit(d, ConfoundSource("taco"), [ModelSpec("tree")], CVScheme(repeats=2),
                    variants=[SHUFFLED_X])
    once = run_audit(d, ConfoundSource("taco"), [ModelSpec("tree")], CVScheme(repeats=2),
                     variants=[SHUFFLED_X], single_shuffle=True)
    assert per.cell(SHUFFLED_X, "tree").fold_scores != once.cell(SHUFFLED_X, "tree").fold_scores


def test_argument_validation(linear_regression):
    with pytest.raises(ValueError):
        run_audit(linear_regression, ConfoundSource("taco"), [], CVScheme())
    with pytest.raises(ValueError):
        run_audit(linear_regression, ConfoundSource("taco"), [ModelSpec("linear")], CVScheme(),
                  variants=[])
    with pytest.raises(ValueError):
        ConfoundSource("simulated", r=1.5)
