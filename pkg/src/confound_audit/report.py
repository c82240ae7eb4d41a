"""Serialization and rendering of audit reports, plus conditional histograms.

Renderers work on the plain dictionary form of a report so that a live
:class:`~confound_audit.audit.AuditReport` and a report read back from JSON
produce identical output.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .audit import SCHEMA_VERSION, AuditReport
from .confound import fit_cr, transform_cr
from .errors import DataError, SchemaVersionError

N_BINS = 30


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to ``None``."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def report_dict(report) -> dict:
    return _clean(report.to_dict() if isinstance(report, AuditReport) else report)


def to_json(report) -> str:
    """Deterministic JSON text (sorted keys, no timestamps, trailing newline)."""
    return json.dumps(report_dict(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def load_report(path) -> dict:
    """Read a report JSON file and check its schema version."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read report {path}: {exc}") from None
    version = obj.get("schema_version") if isinstance(obj, dict) else None
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"unsupported report schema_version {version!r} (expected {SCHEMA_VERSION})")
    return obj


# --------------------------------------------------------------------------
# markdown and CSV


def _num(v, digits=4):
    return "n/a" if v is None else f"{v:.{digits}f}"


def _table(header, rows):
    out = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    out += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return out


def _cell_row(cell):
    s = cell.get("summary")
    status = "ok" if cell["valid"] else "invalid"
    if cell.get("reason"):
        status += f": {cell['reason']}"
    return [cell["variant"], cell["model"],
            _num(s["mean"] if s else None), _num(s["sd"] if s else None),
            s["n"] if s else 0, status]


def render_markdown(report) -> str:
    r = report_dict(report)
    ds = r["dataset"]
    lines = ["# Confound-leakage audit", ""]
    lines += [f"- dataset fingerprint: `{ds['fingerprint']}`",
              f"- rows: {ds['n']}, features: {ds['p']}, target: {ds['target_kind']}",
              f"- confound source: {r['confound_source']}",
              f"- CV: {r['scheme']['repeats']} x {r['scheme']['folds']}-fold, seed {r['seed']}",
              ""]
    v = r["verdict"]
    lines += [f"**Verdict: {v['label'] or 'inconclusive'}**", ""]
    lines += [f"- {reason}" for reason in v["reasons"]] or ["- no triggering comparison"]
    lines += ["", "## Scores", ""]
    lines += _table(["variant", "model", "mean", "sd", "folds", "status"],
                    [_cell_row(c) for c in r["cells"]])
    if r.get("chance"):
        lines += ["", "## Chance reference", ""]
        lines += _table(["variant", "model", "mean", "sd", "folds", "status"],
                        [_cell_row(r["chance"])])
    lines += ["", "## ROPE comparisons", ""]
    if r["comparisons"]:
        lines += _table(
            ["model", "comparison", "p_left", "p_rope", "p_right", "decision"],
            [[c["model"], f"{c['variant']} vs {c['reference']}", _num(c["p_left"]),
              _num(c["p_rope"]), _num(c["p_right"]), c["decision"]]
             for c in r["comparisons"]])
    else:
        lines.append("No comparison could be computed.")
    lines += ["", "## Confound associations", ""]
    if r["associations"]:
        rows = []
        for a in r["associations"]:
            fa = a.get("feature_association") or {}
            sf = a.get("strongest_feature") or {}
            rows.append([a["confound"], _num(a["target_association"]),
                         _num(fa.get("min")), _num(fa.get("median")), _num(fa.get("max")),
                         f"{sf.get('feature', 'n/a')} ({_num(sf.get('r'))})",
                         "yes" if a["undefined"] else "no"])
        lines += _table(["confound", "r(target)", "min r(feature)", "median", "max",
                         "strongest feature", "undefined"], rows)
    else:
        lines.append("No confound columns.")
    return "\n".join(lines) + "\n"


def fold_rows(report):
    """``(repeat, fold, variant, model, score)`` for every cell and fold."""
    r = report_dict(report)
    cells = list(r["cells"]) + ([r["chance"]] if r.get("chance") else [])
    for cell in cells:
        for i, row in enumerate(cell.get("fold_scores") or []):
            for k, value in enumerate(row):
                yield i, k, cell["variant"], cell["model"], value


def render_fold_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["repeat", "fold", "variant", "model", "score"])
    for i, k, variant, model, value in fold_rows(report):
        w.writerow([i, k, variant, model, "" if value is None else repr(float(value))])
    return buf.getvalue()


# --------------------------------------------------------------------------
# conditional histograms


def conditional_histograms(feature, confound, bins=N_BINS):
    """Binned counts of ``feature`` per level of a binary ``confound``,
    before and after confound regression.

    The regression is fitted on all rows given (this is a descriptive view of
    the data, not an out-of-sample evaluation). Both conditions share one set
    of equal-width bins per phase. Returns a dict keyed by phase
    (``before_cr``, ``after_cr``) with ``edges``, ``levels``, ``counts``
    (levels x bins) and the ``overlap`` coefficient.
    """
    x = np.asarray(feature, dtype=float).ravel()
    c = np.asarray(confound, dtype=float).ravel()
    if x.shape != c.shape:
        raise DataError("feature and confound differ in length")
    levels = np.unique(c)
    if levels.size != 2:
        raise DataError(f"histograms need a binary confound, found {levels.size} levels")
    model = fit_cr(x[:, None], c[:, None])
    x_cr, _ = transform_cr(model, x[:, None], c[:, None])
    out = {}
    for phase, values in (("before_cr", x), ("after_cr", x_cr[:, 0])):
        lo, hi = float(values.min()), float(values.max())
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, bins + 1)
        counts = np.vstack([np.histogram(values[c == lv], bins=edges)[0] for lv in levels])
        out[phase] = {"edges": edges, "levels": levels, "counts": counts,
                      "overlap": overlap_coefficient(counts[0], counts[1])}
    return out


def overlap_coefficient(counts_a, counts_b):
    """Shared area of two binned distributions, each normalized to one."""
    a = np.asarray(counts_a, dtype=float)
    b = np.asarray(counts_b, dtype=float)
    return float(np.minimum(a / a.sum(), b / b.sum()).sum())


def render_histogram_csv(hists, feature_name, confound_name) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["phase", "feature", "confound", "level", "bin", "left", "right", "count"])
    for phase, h in hists.items():
        e = h["edges"]
        for li, level in enumerate(h["levels"]):
            for b in range(len(e) - 1):
                w.writerow([phase, feature_name, confound_name, _level(level), b,
                            repr(float(e[b])), repr(float(e[b + 1])), int(h["counts"][li, b])])
    return buf.getvalue()


def render_overlap_csv(hists) -> str:
    lines = ["phase,overlap"]
    lines += [f"{phase},{h['overlap']!r}" for phase, h in hists.items()]
    return "\n".join(lines) + "\n"


def _level(v):
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)
