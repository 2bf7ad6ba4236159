"""Evaluation metrics: Bhattacharyya distance, empirical Wasserstein-1,
pushforward comparisons, and ensemble sparsity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError

__all__ = [
    "GaussianSummary",
    "bhattacharyya",
    "wasserstein1",
    "wasserstein1_batch",
    "pushforward_w1",
    "sparsity_l1",
    "moving_average",
]

COV_REGULARIZATION = 1e-10


@dataclass(frozen=True)
class GaussianSummary:
    """Mean vector and covariance matrix, exact or sampled."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float)
        c = np.asarray(self.cov, dtype=float)
        if c.shape != (m.size, m.size):
            raise ShapeError(f"cov shape {c.shape} does not match mean size {m.size}")
        if not np.allclose(c, c.T, atol=1e-9):
            raise ShapeError("covariance must be symmetric")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", 0.5 * (c + c.T))

    @classmethod
    def from_samples(cls, samples) -> "GaussianSummary":
        S = np.atleast_2d(np.asarray(samples, dtype=float))
        cov = np.atleast_2d(np.cov(S, rowvar=False, ddof=1))
        return cls(S.mean(axis=0), cov)


def bhattacharyya(g1: GaussianSummary, g2: GaussianSummary,
                  reg: float = COV_REGULARIZATION) -> float:
    """Bhattacharyya distance between two Gaussian summaries.

    (1/8) dm' Sbar^-1 dm + (1/2) log(det Sbar / sqrt(det S1 det S2)) with
    Sbar = (S1 + S2)/2.  All three covariances get +reg*I before determinants
    and the inversion.
    """
    if g1.mean.size != g2.mean.size:
        raise ShapeError("summaries have different dimensions")
    eye = np.eye(g1.mean.size)
    s1 = g1.cov + reg * eye
    s2 = g2.cov + reg * eye
    sbar = 0.5 * (s1 + s2)
    sign, logdet_bar = np.linalg.slogdet(sbar)
    if sign <= 0:
        raise DomainError("averaged covariance is singular after regularization")
    sign1, logdet1 = np.linalg.slogdet(s1)
    sign2, logdet2 = np.linalg.slogdet(s2)
    if sign1 <= 0 or sign2 <= 0:
        raise DomainError("covariance is singular after regularization")
    dm = g1.mean - g2.mean
    quad = float(dm @ np.linalg.solve(sbar, dm))
    return 0.125 * quad + 0.5 * (logdet_bar - 0.5 * (logdet1 + logdet2))


def wasserstein1(samples_a, samples_b) -> float:
    """Empirical 1-D Wasserstein-1 distance: integral of |CDF_a - CDF_b|.

    Handles unequal sample counts via the piecewise-constant CDF integral;
    for equal counts it coincides with the mean absolute gap of the order
    statistics.
    """
    a = np.sort(np.asarray(samples_a, dtype=float).ravel())
    b = np.sort(np.asarray(samples_b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ShapeError("samples must be non-empty")
    v = np.concatenate([a, b])
    order = np.argsort(v, kind="stable")
    from_a = (order < a.size).astype(float)
    fa = np.cumsum(from_a) / a.size
    fb = np.cumsum(1.0 - from_a) / b.size
    dv = np.diff(v[order])
    return float(np.sum(np.abs(fa[:-1] - fb[:-1]) * dv))


def wasserstein1_batch(A, B) -> np.ndarray:
    """Row-wise Wasserstein-1 along the last axis: (..., n) vs (..., m)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[:-1] != B.shape[:-1]:
        raise ShapeError(f"batch shapes differ: {A.shape[:-1]} vs {B.shape[:-1]}")
    n, m = A.shape[-1], B.shape[-1]
    v = np.concatenate([A, B], axis=-1)
    order = np.argsort(v, axis=-1, kind="stable")
    v_sorted = np.take_along_axis(v, order, axis=-1)
    from_a = (order < n).astype(float)
    fa = np.cumsum(from_a, axis=-1) / n
    fb = np.cumsum(1.0 - from_a, axis=-1) / m
    dv = np.diff(v_sorted, axis=-1)
    return np.sum(np.abs(fa[..., :-1] - fb[..., :-1]) * dv, axis=-1)


def pushforward_w1(model_samples, reference_samples) -> tuple[np.ndarray, float]:
    """Componentwise W1 between pushforward clouds at each evaluation point.

    model_samples: (points, components, n_model), reference_samples:
    (points, components, n_reference).  Per point, the component W1 values
    are averaged; the scalar score is the sum over points.
    """
    M = np.asarray(model_samples, dtype=float)
    R = np.asarray(reference_samples, dtype=float)
    if M.ndim != 3 or R.ndim != 3 or M.shape[:2] != R.shape[:2]:
        raise ShapeError(f"incompatible pushforward shapes {M.shape} vs {R.shape}")
    per_point = wasserstein1_batch(M, R).mean(axis=-1)
    return per_point, float(per_point.sum())


def sparsity_l1(particles, coords) -> float:
    """Mean over particles of sum over the selected coordinates of |theta|."""
    P = np.atleast_2d(np.asarray(particles, dtype=float))
    coords = np.asarray(coords, dtype=int)
    if coords.size and (coords.min() < 0 or coords.max() >= P.shape[1]):
        raise ShapeError(f"coordinate index out of range for dim {P.shape[1]}")
    return float(np.abs(P[:, coords]).sum(axis=1).mean())


def moving_average(x, window: int = 11) -> np.ndarray:
    """Centered moving average with shrinking windows at the edges."""
    x = np.asarray(x, dtype=float)
    if window < 1:
        raise DomainError("window must be >= 1")
    half = window // 2
    c = np.cumsum(np.concatenate([[0.0], x]))
    n = x.size
    lo = np.maximum(np.arange(n) - half, 0)
    hi = np.minimum(np.arange(n) + half + 1, n)
    return (c[hi] - c[lo]) / (hi - lo)
