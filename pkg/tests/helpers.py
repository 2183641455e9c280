"""Shared test utilities: synthetic ridge experiments and column alignment."""

import numpy as np


class RidgeExperiment:
    """Experiment of the form q = exp(w . log q_vec) * fn(W^T log q_vec)."""

    def __init__(self, w, W, fn):
        self.w = np.asarray(w, dtype=float)
        self.W = np.asarray(W, dtype=float)
        self.fn = fn
        self.domain = "positive"

    def evaluate_batch(self, points):
        X = np.log(np.atleast_2d(np.asarray(points, dtype=float)))
        return np.exp(X @ self.w) * self.fn(X @ self.W)

    def __call__(self, q_vec):
        return float(self.evaluate_batch(np.asarray(q_vec, dtype=float)[None, :])[0])


def linear_g(a, c0=2.0):
    a = np.asarray(a, dtype=float)
    return lambda G: c0 + G @ a


def exp_g(a):
    a = np.asarray(a, dtype=float)
    return lambda G: np.exp(G @ a)


def quadratic_g(a, Q, c0=1.0):
    a = np.asarray(a, dtype=float)
    Q = np.asarray(Q, dtype=float)
    return lambda G: c0 + G @ a + 0.5 * np.einsum("ni,ij,nj->n", G, Q, G)


def align_columns(A, reference):
    """Flip column signs of A so each column best matches the reference."""
    out = np.array(A, dtype=float, copy=True)
    for j in range(out.shape[1]):
        if np.dot(out[:, j], reference[:, j]) < 0:
            out[:, j] = -out[:, j]
    return out


def max_column_diff(A, reference):
    reference = np.asarray(reference, dtype=float)
    return float(np.max(np.abs(align_columns(A, reference) - reference)))


def fit_slope(hs, values):
    x = np.log(np.asarray(hs, dtype=float))
    y = np.log(np.maximum(np.abs(np.asarray(values, dtype=float)), 1e-300))
    A = np.column_stack([x, np.ones_like(x)])
    return float(np.linalg.lstsq(A, y, rcond=None)[0][0])
