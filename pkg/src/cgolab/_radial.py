"""Radial (Gauss-Legendre) interpolation and differentiation helpers.

All polynomial operations use barycentric Lagrange form with capacity-scaled
weights, which stays well conditioned on Gauss-Legendre nodes up to a few
hundred points.
"""
import numpy as np


def gauss_legendre(n, a=0.0, b=1.0):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * (x + 1.0) + a, 0.5 * (b - a) * w


def bary_weights(x):
    n = len(x)
    cap = (x.max() - x.min()) / 4.0  # logarithmic capacity of the interval
    logw = np.zeros(n)
    sgn = np.ones(n)
    for i in range(n):
        d = (x[i] - x[np.arange(n) != i]) / cap
        logw[i] = -np.sum(np.log(np.abs(d)))
        sgn[i] = np.prod(np.sign(d))
    logw -= logw.max()
    return sgn * np.exp(logw)


def diffmat(x, w=None):
    n = len(x)
    if w is None:
        w = bary_weights(x)
    D = np.zeros((n, n))
    for i in range(n):
        D[i] = (w / w[i]) / (x[i] - x + np.eye(1, n, i).ravel())
        D[i, i] = 0.0
        D[i, i] = -D[i].sum()
    return D


def eval_rows(x, w, targets):
    """Barycentric evaluation matrix: rows map node values to target values."""
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    diff = targets[:, None] - x[None, :]
    hit = np.abs(diff) < 1e-15 * max(1.0, np.abs(x).max())
    diff[hit] = 1.0
    rows = (w[None, :] / diff)
    rows /= rows.sum(axis=1)[:, None]
    rows[hit.any(axis=1)] = 0.0
    rows[hit] = 1.0
    return rows


def diff_row(x, w, t):
    """Row vector r with r @ f = p'(t) for the interpolating polynomial p."""
    n = len(x)
    i = np.argmin(np.abs(x - t))
    if abs(x[i] - t) < 1e-15 * max(1.0, np.abs(x).max()):
        row = np.zeros(n)
        d = (w / w[i]) / (t - x + np.eye(1, n, i).ravel())
        d[i] = 0.0
        row[:] = d
        row[i] = -d.sum()
        return row
    # off-node: differentiate the barycentric formula
    d = t - x
    q = w / d
    s = q.sum()
    qp = w / d ** 2
    sp = qp.sum()
    # p(t) = sum q_j f_j / s ; p'(t) = sum(-qp f)/s + (sum q f) sp / s^2
    return -qp / s + q * (sp / s ** 2)


def interp_at(x, w, vals, targets):
    """Interpolate vals (given at nodes x, bary weights w) at targets.

    vals may be (n,) or (n, m); targets any shape.
    """
    t = np.atleast_1d(np.asarray(targets, dtype=float)).ravel()
    rows = eval_rows(x, w, t)
    out = rows @ vals
    return out
