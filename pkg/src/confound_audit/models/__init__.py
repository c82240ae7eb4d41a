"""Model zoo: dummy baselines, linear/logistic regression, CART tree, random
forest and a one-hidden-layer MLP, behind ``fit`` / ``predict_scores``."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit

from ..errors import DimensionMismatchError, ModelError
from . import _cart, linear, mlp

KINDS = ("dummy", "linear", "logistic", "tree", "forest", "mlp")
STOCHASTIC = ("forest", "mlp")


@dataclass(frozen=True)
class ModelSpec:
    """Model kind plus hyperparameters.

    ``mtry`` is the number of features tried per split in a forest: ``None``
    picks ``sqrt(p)`` for classification and ``p/3`` for regression; the
    strings ``"sqrt"``, ``"third"`` and ``"all"`` or an integer are also
    accepted.
    """

    kind: str
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    n_trees: int = 100
    mtry: object = None
    bootstrap: bool = True
    ridge_lambda: float = 1e-8
    max_iter: int = 2000
    tol: float = 1e-7
    hidden_units: int = 100
    epochs: int = 200
    learning_rate: float = 1e-3
    batch_size: int = 32
    alpha: float = 1e-4
    seed: int = 0
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}; choose from {KINDS}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ModelError("max_depth must be non-negative")
        for name in ("min_samples_leaf", "n_trees", "hidden_units", "epochs", "batch_size",
                     "max_iter"):
            if getattr(self, name) < 1:
                raise ModelError(f"{name} must be positive")
        if self.learning_rate <= 0 or self.ridge_lambda < 0 or self.alpha < 0:
            raise ModelError("learning_rate must be positive, penalties non-negative")

    @property
    def name(self):
        return self.label or self.kind

    def with_seed(self, seed):
        return dataclasses.replace(self, seed=int(seed))

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True, eq=False)
class TreeArrays:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    depth: np.ndarray
    impurity: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    @property
    def max_depth(self):
        return int(self.depth.max())

    def predict(self, x):
        return _cart.predict_tree(self.feature, self.threshold, self.left, self.right,
                                  self.value, x)

    def same_as(self, other):
        return all(np.array_equal(getattr(self, f.name), getattr(other, f.name))
                   for f in dataclasses.fields(self))


@dataclass(frozen=True, eq=False)
class FittedModel:
    spec: ModelSpec
    task: str
    n_features: int
    state: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def kind(self):
        return self.spec.kind


def _infer_task(y):
    return "classification" if np.isin(y, (0.0, 1.0)).all() else "regression"


def resolve_mtry(mtry, p, task):
    if mtry is None:
        mtry = "sqrt" if task == "classification" else "third"
    if mtry == "sqrt":
        return max(1, int(np.sqrt(p)))
    if mtry == "third":
        return max(1, p // 3)
    if mtry == "all":
        return p
    return max(1, min(int(mtry), p))


def _grow(x, y, rows, task, spec, mtry, rng_seed):
    state = np.array([rng_seed | 1], dtype=np.uint64)
    arrays = _cart.grow_tree(x, y, rows.astype(np.int64), task == "classification",
                             -1 if spec.max_depth is None else spec.max_depth,
                             spec.min_samples_leaf, mtry, state)
    return TreeArrays(*arrays)


def _tree_seed(seed, index):
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


def fit(spec: ModelSpec, x, y, task: Optional[str] = None) -> FittedModel:
    """Fit a model; ``task`` defaults to classification when ``y`` is 0/1."""
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float).ravel()
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DimensionMismatchError("x must be n x p with one target per row")
    if x.shape[0] < 2:
        raise ModelError("at least two training rows are required")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ModelError("non-finite values in model inputs")
    task = task or _infer_task(y)
    classification = task == "classification"
    if classification and not np.isin(y, (0.0, 1.0)).all():
        raise ModelError("classification targets must be coded 0/1")
    n, p = x.shape
    kind = spec.kind
    state, meta = {}, {}

    if kind == "dummy":
        state["constant"] = float(y.mean())
    elif kind == "linear":
        if classification:
            raise ModelError("use 'logistic' for classification targets")
        coef, icpt = linear.fit_linear(x, y, spec.ridge_lambda)
        state.update(coef=coef, intercept=icpt)
    elif kind == "logistic":
        if not classification:
            raise ModelError("logistic regression needs a classification target")
        if y.min() == y.max():
            raise ModelError("logistic regression needs both classes in the training data")
        coef, icpt, history, n_iter = linear.fit_logistic(
            x, y, spec.ridge_lambda, spec.max_iter, spec.tol)
        state.update(coef=coef, intercept=icpt)
        meta.update(loss_history=history, n_iter=n_iter)
    elif kind == "tree":
        state["tree"] = _grow(x, y, np.arange(n), task, spec, p, 1)
    elif kind == "forest":
        mtry = resolve_mtry(spec.mtry, p, task)
        trees = []
        for t in range(spec.n_trees):
            seed_t = _tree_seed(spec.seed, t)
            if spec.bootstrap:
                rows = np.random.default_rng(seed_t).integers(0, n, size=n)
            else:
                rows = np.arange(n)
            trees.append(_grow(x, y, rows, task, spec, mtry, seed_t))
        state["trees"] = trees
        meta["mtry"] = mtry
    elif kind == "mlp":
        if classification:
            y_fit, shift, scale = y, 0.0, 1.0
        else:
            shift = float(y.mean())
            scale = float(y.std()) or 1.0
            y_fit = (y - shift) / scale
        params = mlp.train(x, y_fit, classification, spec.hidden_units, spec.epochs,
                           spec.learning_rate, spec.batch_size, spec.alpha, spec.seed)
        state.update(params=params, shift=shift, scale=scale)
    return FittedModel(spec, task, p, state, meta)


def predict_scores(m: FittedModel, x) -> np.ndarray:
    """Positive-class probability (classification) or prediction (regression)."""
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != m.n_features:
        raise DimensionMismatchError(
            f"model was fit on {m.n_features} features, got shape {x.shape}")
    kind, st = m.kind, m.state
    if kind == "dummy":
        return np.full(x.shape[0], st["constant"])
    if kind == "linear":
        return x @ st["coef"] + st["intercept"]
    if kind == "logistic":
        return expit(x @ st["coef"] + st["intercept"])
    if kind == "tree":
        return st["tree"].predict(x)
    if kind == "forest":
        out = np.zeros(x.shape[0])
        for t in st["trees"]:
            out += t.predict(x)
        return out / len(st["trees"])
    if kind == "mlp":
        raw = mlp.forward(st["params"], x)
        if m.task == "classification":
            return expit(raw)
        return raw * st["scale"] + st["shift"]
    raise ModelError(f"unknown model kind {kind!r}")


def tree_structure(m: FittedModel, tree_index: int = 0):
    """Preorder list of nodes with depth, split, sample count and value.

    Node dicts carry ``id`` (preorder position), ``parent``, ``left`` and
    ``right`` (preorder ids, ``None`` for leaves).
    """
    if m.kind == "tree":
        t = m.state["tree"]
    elif m.kind == "forest":
        t = m.state["trees"][tree_index]
    else:
        raise ModelError(f"tree_structure needs a tree model, got {m.kind!r}")
    order = []
    stack = [(0, None)]
    while stack:
        node, parent = stack.pop()
        order.append((node, parent))
        if t.feature[node] >= 0:
            stack.append((int(t.right[node]), node))
            stack.append((int(t.left[node]), node))
    pre = {node: i for i, (node, _) in enumerate(order)}
    nodes = []
    for node, parent in order:
        leaf = t.feature[node] < 0
        nodes.append({
            "id": pre[node],
            "parent": None if parent is None else pre[parent],
            "depth": int(t.depth[node]),
            "feature": None if leaf else int(t.feature[node]),
            "threshold": None if leaf else float(t.threshold[node]),
            "left": None if leaf else pre[int(t.left[node])],
            "right": None if leaf else pre[int(t.right[node])],
            "samples": int(t.n_samples[node]),
            "value": float(t.value[node]),
        })
    return nodes


def format_tree(nodes, feature_names=None):
    """Indented text rendering of :func:`tree_structure` output."""
    lines = []
    for nd in nodes:
        pad = "  " * nd["depth"]
        if nd["feature"] is None:
            lines.append(f"{pad}leaf value={nd['value']:.6g} samples={nd['samples']}")
        else:
            name = feature_names[nd["feature"]] if feature_names else f"x[{nd['feature']}]"
            lines.append(f"{pad}{name} <= {nd['threshold']:.17g} samples={nd['samples']}")
    return "\n".join(lines)


def best_root_split(x, y, task=None, min_samples_leaf=1):
    """Best ``(feature, threshold, gain)`` at the root, or ``None``."""
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    task = task or _infer_task(y)
    out = _cart.root_split(x, y, task == "classification", min_samples_leaf)
    if out[1] < 0:
        return None
    return int(out[1]), float(out[2]), float(out[0])
