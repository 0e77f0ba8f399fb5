"""Independent reference computations used by the tests.

None of these share code with the package; they are deliberately naive.
"""

import math
from itertools import product

import numpy as np
import scipy.linalg


def trace_ridge(C, ridge):
    return C + ridge * np.trace(C) / C.shape[0] * np.eye(C.shape[0])


def cca_geneig(X, Y, ridge=0.0, center=True):
    """Canonical correlations from the block generalized eigenproblem.

    [[0, Cxy], [Cyx, 0]] w = rho [[Cxx, 0], [0, Cyy]] w, solved by
    scipy's symmetric-definite solver.
    """
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    if center:
        X = X - X.mean(0)
        Y = Y - Y.mean(0)
    n, p = X.shape
    q = Y.shape[1]
    Cxx = trace_ridge(X.T @ X / n, ridge)
    Cyy = trace_ridge(Y.T @ Y / n, ridge)
    Cxy = X.T @ Y / n
    A = np.zeros((p + q, p + q))
    A[:p, p:] = Cxy
    A[p:, :p] = Cxy.T
    B = scipy.linalg.block_diag(Cxx, Cyy)
    evals = scipy.linalg.eigh(A, B, eigvals_only=True)
    return np.sort(evals)[::-1][: min(p, q)]


def grid_first_correlation(X, Y, center=True, steps=3600):
    """Best correlation over unit direction pairs for 2-D views.

    For each x-direction angle the best y-direction is the regression one,
    so an exhaustive sweep over pairs reduces to a sweep over one angle pair
    grid; we still enumerate both angles, coarsely, then refine.
    """
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    if center:
        X = X - X.mean(0)
        Y = Y - Y.mean(0)

    def corr(a, b):
        u = X @ a
        v = Y @ b
        if center:
            return float(np.dot(u, v) / np.sqrt(np.dot(u, u) * np.dot(v, v)))
        # uncentered "correlation" as written with raw expectations
        return float(np.mean(u * v) / np.sqrt(np.mean(u * u) * np.mean(v * v)))

    angles = np.linspace(0, np.pi, 181)
    best = (-2.0, 0.0, 0.0)
    for t, s in product(angles, angles):
        c = abs(corr(np.array([np.cos(t), np.sin(t)]), np.array([np.cos(s), np.sin(s)])))
        if c > best[0]:
            best = (c, t, s)
    _, t0, s0 = best
    fine = np.linspace(-np.pi / 180, np.pi / 180, int(math.sqrt(steps)))
    for dt, ds in product(fine, fine):
        t, s = t0 + dt, s0 + ds
        c = abs(corr(np.array([np.cos(t), np.sin(t)]), np.array([np.cos(s), np.sin(s)])))
        best = max(best, (c, t, s))
    return best[0]


def gram_loops(X, sigma):
    """Gaussian Gram matrix, one entry at a time."""
    X = np.asarray(X, float)
    n = X.shape[0]
    K = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            dist2 = sum((X[a, k] - X[b, k]) ** 2 for k in range(X.shape[1]))
            K[a, b] = math.exp(-dist2 / (2.0 * sigma ** 2))
    return K


def kcca_dense(X, Y, sigma_x, sigma_y, kappa):
    """sqrt of the eigenvalues of (Kx + n k I)^-1 Ky (Ky + n k I)^-1 Kx.

    Gram matrices are centered with the explicit H K H product and the
    nonsymmetric matrix is eigen-solved directly.
    """
    n = len(X)
    H = np.eye(n) - np.ones((n, n)) / n
    Kx = H @ gram_loops(X, sigma_x) @ H
    Ky = H @ gram_loops(Y, sigma_y) @ H
    I = np.eye(n)
    M = np.linalg.solve(Kx + n * kappa * I, Ky) @ np.linalg.solve(Ky + n * kappa * I, Kx)
    ev = np.linalg.eigvals(M)
    ev = np.sort(np.clip(ev.real, 0, None))[::-1]
    return np.sqrt(ev), Kx, Ky


def auc_pairs(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else (0.5 if p == q else 0.0)
    return total / (len(pos) * len(neg))


def confusion(scores, labels, threshold=0.5):
    tp = fp = fn = tn = 0
    for s, y in zip(scores, labels):
        pred = 1 if s >= threshold else 0
        if pred and y:
            tp += 1
        elif pred and not y:
            fp += 1
        elif not pred and y:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def precision_f1(scores, labels, threshold=0.5):
    tp, fp, fn, _ = confusion(scores, labels, threshold)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, f1


def logistic_loss(theta, X, y, lam):
    """Mean log loss plus lam/2 ||w||^2, bias (last entry) unpenalized."""
    w, b = theta[:-1], theta[-1]
    total = 0.0
    for xi, yi in zip(X, y):
        z = float(np.dot(xi, w) + b)
        # log(1 + exp(-z)) for y=1, log(1 + exp(z)) for y=0
        total += math.log1p(math.exp(-z)) if yi == 1 else math.log1p(math.exp(z))
    return total / len(y) + 0.5 * lam * float(np.dot(w, w))


def central_difference(f, theta, h=1e-5):
    g = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


def combination_grid(P, Q, step=0.01):
    """Minimize sum ||a P + b Q - P||^2 + ||a P + b Q - Q||^2 over a grid."""
    grid = np.round(np.arange(0, 1 + step / 2, step), 10)
    PP, QQ, PQ = float(np.sum(P * P)), float(np.sum(Q * Q)), float(np.sum(P * Q))
    best = (np.inf, None, None)
    for a in grid:
        # expanded quadratic keeps the sweep cheap; identical to the direct sum
        for b in grid:
            f = (2 * a * a * PP + 2 * b * b * QQ + 4 * a * b * PQ
                 - 2 * a * (PP + PQ) - 2 * b * (PQ + QQ) + PP + QQ)
            if f < best[0] - 1e-15:
                best = (f, a, b)
    return best[1], best[2]


def principal_cosines(A, B):
    """Cosines of principal angles between column spaces of A and B."""
    qa, _ = np.linalg.qr(A)
    qb, _ = np.linalg.qr(B)
    return np.linalg.svd(qa.T @ qb, compute_uv=False)
