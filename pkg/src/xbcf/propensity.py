"""Propensity score estimation by logistic regression (IRLS)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass
class PropensityFit:
    pi: np.ndarray
    coef: np.ndarray
    converged: bool
    clipped: bool
    n_iter: int

    @property
    def warning(self) -> bool:
        return (not self.converged) or self.clipped


def estimate_propensity(X: np.ndarray, z: np.ndarray, max_iter: int = 50,
                        tol: float = 1e-8, ridge: float = 1e-6,
                        clip: tuple = (0.001, 0.999)) -> PropensityFit:
    """Logistic regression of z on X with intercept, fitted by iteratively
    reweighted least squares with a small ridge on the normal equations.

    Never fatal: non-convergence returns the last iterate with the warning
    flag set. Fitted probabilities are clipped to `clip`.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    z = np.asarray(z, dtype=float)
    if z.shape[0] != X.shape[0]:
        raise ValidationError("X and z must have the same number of rows")
    if z.sum() == 0 or z.sum() == z.size:
        raise ValidationError("both treatment groups must be non-empty")
    A = np.column_stack([np.ones(X.shape[0]), X])
    p_dim = A.shape[1]
    beta = np.zeros(p_dim)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = np.clip(A @ beta, -30, 30)
        p = 1.0 / (1.0 + np.exp(-eta))
        w = np.maximum(p * (1.0 - p), 1e-10)
        H = A.T @ (A * w[:, None]) + ridge * np.eye(p_dim)
        grad = A.T @ (z - p)
        delta = np.linalg.solve(H, grad)
        beta = beta + delta
        if np.max(np.abs(delta)) < tol:
            converged = True
            break
    raw = 1.0 / (1.0 + np.exp(-np.clip(A @ beta, -30, 30)))
    pi = np.clip(raw, clip[0], clip[1])
    clipped = bool((raw < clip[0]).any() or (raw > clip[1]).any())
    return PropensityFit(pi=pi, coef=beta, converged=converged,
                         clipped=clipped, n_iter=it)
