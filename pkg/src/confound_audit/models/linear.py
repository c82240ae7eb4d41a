"""Ridge-conditioned least squares and gradient-descent logistic regression."""

import numpy as np
from scipy.special import expit


def fit_linear(x, y, ridge_lambda=1e-8):
    """Least squares with an unpenalized intercept; returns ``(coef, intercept)``."""
    x_mean = x.mean(axis=0)
    y_mean = y.mean()
    xc = x - x_mean
    gram = xc.T @ xc + ridge_lambda * np.eye(x.shape[1])
    coef = np.linalg.lstsq(gram, xc.T @ (y - y_mean), rcond=None)[0]
    return coef, float(y_mean - x_mean @ coef)


def logistic_loss(w, b, x, y, ridge_lambda):
    z = x @ w + b
    # log(1 + exp(z)) - y*z, computed without overflow
    nll = np.mean(np.logaddexp(0.0, z) - y * z)
    return float(nll + 0.5 * ridge_lambda * np.dot(w, w))


def fit_logistic(x, y, ridge_lambda=1e-8, max_iter=2000, tol=1e-7, checkpoint_every=10):
    """Full-batch gradient descent on the mean log loss.

    The step size is ``1/L`` with ``L`` the Lipschitz constant of the gradient,
    which makes every step non-increasing in the loss. Returns
    ``(coef, intercept, loss_history, n_iter)``; the history holds the loss at
    every ``checkpoint_every``-th iteration.
    """
    n, p = x.shape
    xa = np.column_stack([x, np.ones(n)])
    smax = np.linalg.norm(xa, 2)
    lipschitz = 0.25 * smax * smax / n + ridge_lambda
    step = 1.0 / lipschitz
    w = np.zeros(p)
    b = 0.0
    history = [logistic_loss(w, b, x, y, ridge_lambda)]
    it = 0
    for it in range(1, max_iter + 1):
        r = expit(x @ w + b) - y
        gw = x.T @ r / n + ridge_lambda * w
        gb = r.mean()
        w = w - step * gw
        b = b - step * gb
        if it % checkpoint_every == 0:
            history.append(logistic_loss(w, b, x, y, ridge_lambda))
        if np.sqrt(np.dot(gw, gw) + gb * gb) < tol:
            break
    return w, float(b), history, it

