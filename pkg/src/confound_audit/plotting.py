"""PNG figures written next to the CSV outputs of the ``report`` command.

Figures are rendered with the non-interactive Agg backend and saved without
the software/version metadata, so identical inputs give identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .report import fold_rows, report_dict  # noqa: E402

_PNG_META = {"Software": None}
_COLORS = ("#1f77b4", "#d62728")
_PHASES = {"before_cr": "before CR", "after_cr": "after CR"}


def _save(fig, path):
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)


def plot_histograms(hists, feature_name, confound_name, path):
    """Two panels (before and after confound regression) of the feature
    distribution per confound level, drawn as step histograms."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for ax, (phase, h) in zip(axes, hists.items()):
        e = h["edges"]
        for li, level in enumerate(h["levels"]):
            ax.stairs(h["counts"][li], e, color=_COLORS[li % 2], linewidth=1.5,
                      label=f"{confound_name} = {level:g}")
        ax.set_title(f"{_PHASES.get(phase, phase)} (overlap {h['overlap']:.2f})", fontsize=10)
        ax.set_xlabel(feature_name)
    axes[0].set_ylabel("count")
    axes[0].legend(fontsize=8, frameon=False)
    fig.tight_layout()
    _save(fig, path)


def plot_scores(report, path):
    """Fold scores per variant and model, one column of points per cell with
    the cell mean marked; the dashed line is the dummy-model mean."""
    r = report_dict(report)
    scores = {}
    for _, _, variant, model, value in fold_rows(r):
        if value is not None:
            scores.setdefault((variant, model), []).append(value)
    cells = [(c["variant"], c["model"]) for c in r["cells"]]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(cells) + 1.5), 3.5))
    for i, key in enumerate(cells):
        vals = np.asarray(scores.get(key, []))
        if vals.size:
            jitter = np.linspace(-0.15, 0.15, vals.size)
            ax.plot(i + jitter, vals, ".", color="0.6", markersize=3)
            ax.plot([i - 0.25, i + 0.25], [vals.mean()] * 2, color="k", linewidth=2)
    chance = scores.get(("chance", "dummy"))
    if chance:
        ax.axhline(float(np.mean(chance)), color="0.3", linestyle="--", linewidth=1)
    ax.set_xticks(range(len(cells)))
    ax.set_xticklabels([f"{v}\n{m}" for v, m in cells], fontsize=7)
    ax.set_ylabel("AUCROC" if r["dataset"]["target_kind"] == "classification" else "R$^2$")
    fig.tight_layout()
    _save(fig, path)
