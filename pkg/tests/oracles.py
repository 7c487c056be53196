"""Pure-Python loop oracles for the evaluation metrics."""

import math

import numpy as np


def naive_mean(X):
    n, d = len(X), len(X[0])
    return [sum(X[i][j] for i in range(n)) / n for j in range(d)]


def naive_cov(X):
    n, d = len(X), len(X[0])
    mu = naive_mean(X)
    return np.array([[sum((X[i][a] - mu[a]) * (X[i][b] - mu[b]) for i in range(n)) / (n - 1)
                      for b in range(d)] for a in range(d)])


def naive_fid(X, Y):
    mx, my = naive_mean(X), naive_mean(Y)
    Sx, Sy = naive_cov(X), naive_cov(Y)
    mean_term = sum((a - b) ** 2 for a, b in zip(mx, my))
    # eigenvalues of the (non-symmetric) product are real and non-negative for PSD factors
    cross = sum(math.sqrt(max(ev.real, 0.0)) for ev in np.linalg.eigvals(Sx @ Sy))
    return mean_term + np.trace(Sx) + np.trace(Sy) - 2 * cross


def dist(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def naive_r_precision(M, T, top_k, pool, order):
    hits = [0] * top_k
    counted = 0
    for s in range(0, len(M) - pool + 1, pool):
        idx = order[s:s + pool]
        for i in idx:
            own = dist(M[i], T[i])
            rank = sum(1 for j in idx if dist(M[i], T[j]) < own)
            for k in range(top_k):
                hits[k] += rank < k + 1
            counted += 1
    return [h / counted for h in hits]


def naive_mm_dist(M, T):
    return sum(dist(a, b) for a, b in zip(M, T)) / len(M)


def naive_diversity(F, idx, s_dis):
    """``idx``: the 2 * s_dis distinct rows drawn by the metric, first half paired with the second."""
    return sum(dist(F[idx[i]], F[idx[s_dis + i]]) for i in range(s_dis)) / s_dis


def naive_mmodality(per_text, subset, rng):
    scores = []
    for feats in per_text:
        a = rng.choice(len(feats), size=subset, replace=False)
        b = rng.choice(len(feats), size=subset, replace=False)
        scores.append(sum(dist(feats[i], feats[j]) for i, j in zip(a, b)) / subset)
    return sum(scores) / len(scores)
