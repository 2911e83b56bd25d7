"""Learning primitives: conjugate normal beliefs, drift beliefs and recursive least squares.

Beliefs are stored as ``(mean, precision)``.  A precision of zero is a fully
diffuse prior and an infinite precision a point mass; both are handled
without producing ``0/0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_RLS_LAMBDA = 1e-4


class BeliefDomainError(ValueError):
    pass


class NumericalDegeneracyError(ArithmeticError):
    pass


@dataclass(frozen=True)
class GaussianBelief:
    mean: float
    precision: float

    def __post_init__(self):
        if not self.precision >= 0:
            raise BeliefDomainError(f"precision must be >= 0, got {self.precision}")

    @property
    def variance(self) -> float:
        if self.precision == 0:
            return math.inf
        return 1.0 / self.precision

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @classmethod
    def from_std(cls, mean: float, std: float) -> "GaussianBelief":
        if std < 0:
            raise BeliefDomainError("std must be >= 0")
        return cls(float(mean), math.inf if std == 0 else 1.0 / std**2)


@dataclass(frozen=True)
class GaussianDriftBelief:
    mean: float
    precision: float

    def __post_init__(self):
        if not self.precision >= 0:
            raise BeliefDomainError(f"precision must be >= 0, got {self.precision}")

    @property
    def std(self) -> float:
        return math.inf if self.precision == 0 else 1.0 / math.sqrt(self.precision)


def _combine(mean: float, precision: float, w: float, precision_w: float) -> tuple[float, float]:
    if not precision_w > 0:
        raise BeliefDomainError(f"observation precision must be > 0, got {precision_w}")
    if math.isinf(precision_w):
        if math.isinf(precision):
            # two point masses; keep the prior unless they agree
            return mean, precision
        return float(w), math.inf
    if math.isinf(precision):
        return mean, precision
    if precision == 0:
        return float(w), precision_w
    new_precision = precision + precision_w
    return (precision * mean + precision_w * w) / new_precision, new_precision


def conjugate_update(b: GaussianBelief, W: float, precision_w: float) -> GaussianBelief:
    """Normal-normal update of ``b`` with one observation ``W`` of precision ``precision_w``."""
    return GaussianBelief(*_combine(b.mean, b.precision, W, precision_w))


def conjugate_update_controlled(
    b: GaussianBelief, W: float | None, precision_w: float, control_shift: float
) -> GaussianBelief:
    """Update after a control that is believed to move the truth by ``-control_shift``.

    The prior mean is shifted first; if ``W`` is None (no observation made)
    only the shift is applied and the precision is unchanged.
    """
    shifted = GaussianBelief(b.mean - control_shift, b.precision)
    if W is None:
        return shifted
    return conjugate_update(shifted, W, precision_w)


def drift_update(d: GaussianDriftBelief, W_next: float, W_prev: float, precision_w: float) -> GaussianDriftBelief:
    """Update the drift belief with the increment ``W_next - W_prev``.

    The increment is weighted with the observation precision, as in the
    conjugate update; callers only pass consecutive observed pairs.
    """
    increment = W_next - W_prev
    return GaussianDriftBelief(*_combine(d.mean, d.precision, increment, precision_w))


def inflate(b: GaussianBelief, process_var: float) -> GaussianBelief:
    """Add process variance to a belief (prediction step for an evolving truth)."""
    if process_var < 0:
        raise BeliefDomainError("process variance must be >= 0")
    if process_var == 0 or b.precision == 0:
        return b
    if math.isinf(b.precision):
        return GaussianBelief(b.mean, 1.0 / process_var)
    return GaussianBelief(b.mean, 1.0 / (1.0 / b.precision + process_var))


# --------------------------------------------------------------------------
# recursive least squares


@dataclass(frozen=True)
class RlsState:
    """Coefficient vector and inverse-moment matrix of a recursive least-squares fit."""

    theta: np.ndarray
    M: np.ndarray

    @classmethod
    def initial(cls, d: int, lam: float = DEFAULT_RLS_LAMBDA, theta0=None) -> "RlsState":
        theta = np.zeros(d) if theta0 is None else np.asarray(theta0, dtype=float).copy()
        return cls(theta, np.eye(d) / lam)

    @property
    def dim(self) -> int:
        return self.theta.shape[0]

    def predict(self, p) -> float:
        return float(self.theta @ np.asarray(p, dtype=float))

    def is_valid(self, tol: float = 1e-9) -> bool:
        if not np.allclose(self.M, self.M.T, atol=tol, rtol=0):
            return False
        try:
            np.linalg.cholesky(self.M)
        except np.linalg.LinAlgError:
            return False
        return True


def rls_update(r: RlsState, p, y: float) -> tuple[RlsState, float]:
    """One recursive least-squares step with features ``p`` and target ``y``.

    Uses ``gamma = 1 + p'Mp`` and the residual ``y - theta'p``.  The printed
    variant ``gamma = 1 - p'Mp`` with the residual negated does not reproduce
    the batch least-squares solution, so it is not offered.

    Returns the new state and the prior residual.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (r.dim,):
        raise ValueError(f"feature vector has shape {p.shape}, expected ({r.dim},)")
    Mp = r.M @ p
    gamma = 1.0 + float(p @ Mp)
    if not gamma > 0:
        raise NumericalDegeneracyError(f"gamma = {gamma} <= 0")
    eps = float(y - r.theta @ p)
    theta = r.theta + Mp * (eps / gamma)
    M = r.M - np.outer(Mp, Mp) / gamma
    # keep M exactly symmetric against roundoff drift
    M = 0.5 * (M + M.T)
    return RlsState(theta, M), eps


def ridge_solution(P: np.ndarray, y: np.ndarray, lam: float, theta0=None) -> np.ndarray:
    """Regularized batch least squares ``argmin |P theta - y|^2 + lam |theta - theta0|^2``."""
    P = np.asarray(P, dtype=float)
    d = P.shape[1]
    t0 = np.zeros(d) if theta0 is None else np.asarray(theta0, dtype=float)
    A = P.T @ P + lam * np.eye(d)
    return np.linalg.solve(A, P.T @ np.asarray(y, dtype=float) + lam * t0)
