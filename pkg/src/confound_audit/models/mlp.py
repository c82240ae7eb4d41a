"""Single-hidden-layer ReLU network trained with mini-batch Adam."""

import numpy as np
from scipy.special import expit


def init_params(p, hidden, rng):
    """Weights drawn from N(0, 1/fan_in); zero biases."""
    return {
        "w1": rng.standard_normal((p, hidden)) / np.sqrt(p),
        "b1": np.zeros(hidden),
        "w2": rng.standard_normal(hidden) / np.sqrt(hidden),
        "b2": np.zeros(1),
    }


def forward(params, x):
    """Raw output (logit for classification) for every row of ``x``."""
    h = np.maximum(x @ params["w1"] + params["b1"], 0.0)
    return h @ params["w2"] + params["b2"][0]


def loss_and_grad(params, x, y, classification, alpha=0.0):
    """Mean loss plus ``alpha/2 * ||weights||^2`` and its gradient.

    Classification uses the logistic loss on the raw output, regression half
    the squared error.
    """
    n = x.shape[0]
    z1 = x @ params["w1"] + params["b1"]
    h = np.maximum(z1, 0.0)
    out = h @ params["w2"] + params["b2"][0]
    if classification:
        loss = np.mean(np.logaddexp(0.0, out) - y * out)
        d_out = (expit(out) - y) / n
    else:
        err = out - y
        loss = 0.5 * np.mean(err * err)
        d_out = err / n
    w1, w2 = params["w1"], params["w2"]
    loss += 0.5 * alpha * (np.sum(w1 * w1) + np.dot(w2, w2))
    grad = {
        "w2": h.T @ d_out + alpha * w2,
        "b2": np.array([d_out.sum()]),
    }
    d_z1 = np.outer(d_out, w2) * (z1 > 0)
    grad["w1"] = x.T @ d_z1 + alpha * w1
    grad["b1"] = d_z1.sum(axis=0)
    return float(loss), grad


def train(x, y, classification, hidden=100, epochs=200, learning_rate=1e-3,
          batch_size=32, alpha=1e-4, seed=0):
    rng = np.random.default_rng(seed)
    n, p = x.shape
    params = init_params(p, hidden, rng)
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(v) for k, v in params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    t = 0
    batch_size = min(batch_size, n)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            rows = order[start:start + batch_size]
            _, grad = loss_and_grad(params, x[rows], y[rows], classification,
                                    alpha * len(rows) / n)
            t += 1
            for k in params:
                m[k] = beta1 * m[k] + (1 - beta1) * grad[k]
                v[k] = beta2 * v[k] + (1 - beta2) * grad[k] ** 2
                m_hat = m[k] / (1 - beta1 ** t)
                v_hat = v[k] / (1 - beta2 ** t)
                params[k] = params[k] - learning_rate * m_hat / (np.sqrt(v_hat) + eps)
    return params
