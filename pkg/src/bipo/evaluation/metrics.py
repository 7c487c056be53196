"""Distribution and retrieval metrics over feature vectors."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

COV_EPS = 1e-6
PSD_TOL = 1e-10


def matrix_sqrt_psd(A: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Principal square root of a symmetric positive semi-definite matrix.

    Eigenvalues within ``tol * max|eig|`` below zero are treated as rounding
    noise and clamped; anything more negative is an error.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix_sqrt_psd needs a square matrix")
    scale = max(np.abs(A).max(), 1e-300)
    if np.abs(A - A.T).max() > 1e-8 * scale:
        raise ValueError("matrix is not symmetric")
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    if w.min() < -tol * max(abs(w).max(), 1e-300) - 1e-14:
        raise ValueError(f"matrix is not positive semi-definite (min eigenvalue {w.min():.3g})")
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


@dataclass(frozen=True)
class FidResult:
    value: float
    regularized: bool        # eps * I added to both covariances
    clamped: bool            # a small negative result was clamped to 0


def fid_details(X: np.ndarray, Y: np.ndarray, eps: float = COV_EPS) -> FidResult:
    """Frechet distance between Gaussians fitted to the rows of ``X`` and ``Y``.

    ``|mu_x - mu_y|^2 + Tr(S_x + S_y - 2 (S_x S_y)^{1/2})``. The cross term is
    evaluated as ``Tr sqrt(S_x^{1/2} S_y S_x^{1/2})``, a symmetric PSD matrix with
    the same eigenvalues as ``S_x S_y``. When either set has no more rows than
    columns, ``eps * I`` is added to both covariances.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise ValueError("feature dimensions differ")
    if len(X) < 2 or len(Y) < 2:
        raise ValueError("need at least two samples per set")
    d = X.shape[1]
    mu_x, mu_y = X.mean(axis=0), Y.mean(axis=0)
    S_x = np.atleast_2d(np.cov(X, rowvar=False))
    S_y = np.atleast_2d(np.cov(Y, rowvar=False))
    regularized = min(len(X), len(Y)) <= d
    if regularized:
        S_x = S_x + eps * np.eye(d)
        S_y = S_y + eps * np.eye(d)
        log.info("fid: covariance regularized with eps=%g (n=%d, dim=%d)", eps, min(len(X), len(Y)), d)
    root_x = matrix_sqrt_psd(S_x)
    M = root_x @ S_y @ root_x
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    cross = float(np.sqrt(np.clip(w, 0.0, None)).sum())
    diff = mu_x - mu_y
    value = float(diff @ diff + np.trace(S_x) + np.trace(S_y) - 2.0 * cross)
    clamped = value < 0
    if clamped:
        log.info("fid: clamped negative residue %.3g to 0", value)
        value = 0.0
    return FidResult(value, regularized, clamped)


def fid(X: np.ndarray, Y: np.ndarray, eps: float = COV_EPS) -> float:
    return fid_details(X, Y, eps).value


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def r_precision(motion_feats: np.ndarray, text_feats: np.ndarray, top_k: int = 3, pool: int = 32,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """R-precision at ``1..top_k``.

    Pairs are shuffled and cut into pools of ``pool`` (a leftover partial pool is
    dropped). Inside a pool, a motion's rank is the number of texts strictly
    closer to it than its own text; a hit at ``k`` means rank < ``k``.
    """
    motion_feats = np.asarray(motion_feats, dtype=np.float64)
    text_feats = np.asarray(text_feats, dtype=np.float64)
    n = len(motion_feats)
    if n != len(text_feats):
        raise ValueError("motion and text feature counts differ")
    if n < pool:
        raise ValueError(f"need at least {pool} pairs, got {n}")
    order = rng.permutation(n) if rng is not None else np.arange(n)
    hits = np.zeros(top_k)
    counted = 0
    for s in range(0, n - pool + 1, pool):
        idx = order[s:s + pool]
        D = _pairwise(motion_feats[idx], text_feats[idx])
        rank = (D < np.diag(D)[:, None]).sum(axis=1)
        hits += (rank[:, None] < np.arange(1, top_k + 1)[None, :]).sum(axis=0)
        counted += pool
    return hits / counted


def mm_dist(motion_feats: np.ndarray, text_feats: np.ndarray) -> float:
    """Mean Euclidean distance between each motion and its own text."""
    diff = np.asarray(motion_feats, dtype=np.float64) - np.asarray(text_feats, dtype=np.float64)
    return float(np.sqrt((diff * diff).sum(axis=1)).mean())


def diversity(features: np.ndarray, s_dis: int = 300, rng: np.random.Generator | None = None) -> float:
    """Mean distance over ``s_dis`` pairs drawn from ``2 * s_dis`` distinct samples."""
    features = np.asarray(features, dtype=np.float64)
    if len(features) < 2 * s_dis:
        raise ValueError(f"diversity needs {2 * s_dis} features, got {len(features)}")
    rng = rng if rng is not None else np.random.default_rng(0)
    idx = rng.choice(len(features), size=2 * s_dis, replace=False)
    a, b = features[idx[:s_dis]], features[idx[s_dis:]]
    return float(np.sqrt(((a - b) ** 2).sum(axis=1)).mean())


def mmodality(per_text: list, subset: int = 10, rng: np.random.Generator | None = None) -> float:
    """Mean over texts of the mean distance between two random ``subset``-sized draws.

    ``per_text``: one ``(G, dim)`` array of generation features per text. The two
    subsets are drawn independently without replacement and compared element by
    element.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    if not per_text:
        raise ValueError("no generations")
    scores = []
    for feats in per_text:
        feats = np.asarray(feats, dtype=np.float64)
        if len(feats) < subset:
            raise ValueError(f"mmodality needs {subset} generations per text, got {len(feats)}")
        a = feats[rng.choice(len(feats), size=subset, replace=False)]
        b = feats[rng.choice(len(feats), size=subset, replace=False)]
        scores.append(np.sqrt(((a - b) ** 2).sum(axis=1)).mean())
    return float(np.mean(scores))


def mean_ci(values, z: float = 1.96) -> tuple[float, float]:
    """Mean and 95% half-width ``z * s / sqrt(n)`` (sample std), summed in sorted order."""
    v = sorted(float(x) for x in values)
    n = len(v)
    if n < 2:
        raise ValueError("a confidence interval needs at least two repetitions")
    mean = math.fsum(v) / n
    var = math.fsum((x - mean) ** 2 for x in v) / (n - 1)
    return mean, z * math.sqrt(var / n)
