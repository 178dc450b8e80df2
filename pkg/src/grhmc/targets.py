"""Target distributions: unnormalized log-density kernels and their gradients.

Every target exposes only ``log pi~(q)`` and its gradient; normalizing
constants are never needed by the samplers. Where closed forms exist,
analytic reference moments are attached so tests can check stationarity
against ground truth.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class ReferenceMoments:
    """Analytic moments of a target, used as test oracles."""

    mean: Optional[np.ndarray] = None
    sd: Optional[np.ndarray] = None
    median: Optional[np.ndarray] = None


@dataclass(frozen=True)
class TargetModel:
    """A target distribution seen through its log-density kernel.

    Attributes:
        name: Short identifier used in reports.
        dim: Dimension of the position vector.
        eval: Maps a length-``dim`` position to ``(log_kernel, gradient)``.
        reference: Optional analytic moments for validation.
    """

    name: str
    dim: int
    eval: Callable[[np.ndarray], tuple[float, np.ndarray]]
    reference: Optional[ReferenceMoments] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")


@dataclass(frozen=True)
class GaussianSpec:
    """Mean vector and covariance matrix of a multivariate normal."""

    mu: np.ndarray
    Sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        Sigma = np.asarray(self.Sigma, dtype=float)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "Sigma", Sigma)
        if Sigma.shape != (mu.size, mu.size):
            raise ValueError("Sigma shape does not match mu")
        if not np.allclose(Sigma, Sigma.T):
            raise ValueError("Sigma must be symmetric")


@dataclass(frozen=True)
class LogisticRegressionData:
    """Design matrix (with intercept column), binary response, prior variance."""

    X: np.ndarray
    y: np.ndarray
    prior_variance: float = 100.0

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
            raise ValueError("X must be n x d and y length n")
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise ValueError("response must be binary 0/1")
        if self.prior_variance <= 0:
            raise ValueError("prior_variance must be positive")
        if np.linalg.matrix_rank(X) < X.shape[1]:
            raise ValueError("design matrix is rank deficient")


def make_gaussian(spec: GaussianSpec, name: str = "gaussian") -> TargetModel:
    """Multivariate normal kernel ``-1/2 (q-mu)' Sigma^-1 (q-mu)``.

    Raises:
        ValueError: if Sigma is not positive definite.
    """
    mu = spec.mu
    try:
        chol = np.linalg.cholesky(spec.Sigma)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Sigma is not positive definite") from exc
    prec = np.linalg.inv(spec.Sigma)

    def ev(q: np.ndarray) -> tuple[float, np.ndarray]:
        diff = q - mu
        grad = -(prec @ diff)
        return 0.5 * float(diff @ grad), grad

    ref = ReferenceMoments(mean=mu.copy(), sd=np.sqrt(np.diag(spec.Sigma)), median=mu.copy())
    del chol
    return TargetModel(name=name, dim=mu.size, eval=ev, reference=ref)


def make_student_t(mu, Sigma, nu: float, name: str = "student_t") -> TargetModel:
    """Multivariate t kernel with ``nu`` degrees of freedom.

    ``log pi~(q) = -(nu+d)/2 * log(1 + (q-mu)' Sigma^-1 (q-mu) / nu)``.
    The marginal variance is ``nu/(nu-2) * Sigma`` for ``nu > 2``.
    """
    mu = np.asarray(mu, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    if nu <= 0:
        raise ValueError("nu must be positive")
    d = mu.size
    try:
        prec = np.linalg.inv(Sigma)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Sigma is singular") from exc
    expo = 0.5 * (nu + d)

    def ev(q: np.ndarray) -> tuple[float, np.ndarray]:
        diff = q - mu
        pd = prec @ diff
        u = float(diff @ pd)
        lp = -expo * np.log1p(u / nu)
        grad = -(2.0 * expo / nu) / (1.0 + u / nu) * pd
        return lp, grad

    sd = np.sqrt(nu / (nu - 2.0) * np.diag(Sigma)) if nu > 2 else None
    ref = ReferenceMoments(mean=mu.copy() if nu > 1 else None, sd=sd, median=mu.copy())
    return TargetModel(name=name, dim=d, eval=ev, reference=ref)


def make_smiley(name: str = "smiley") -> TargetModel:
    """Banana-shaped target: ``q2 | q1 ~ N(q1^2, 1)``, ``q1 ~ N(0, 1)``."""

    def ev(q: np.ndarray) -> tuple[float, np.ndarray]:
        q1, q2 = q
        r = q2 - q1 * q1
        lp = -0.5 * q1 * q1 - 0.5 * r * r
        return lp, np.array([-q1 + 2.0 * q1 * r, -r])

    # E[q2] = 1, Var(q2) = Var(q1^2) + 1 = 3
    ref = ReferenceMoments(mean=np.array([0.0, 1.0]), sd=np.array([1.0, np.sqrt(3.0)]))
    return TargetModel(name=name, dim=2, eval=ev, reference=ref)


def make_bimodal(name: str = "bimodal") -> TargetModel:
    """Double-well target: ``log pi~ = -(1-q1^2)^2 - (q2-q1)^2 / 2``."""

    def ev(q: np.ndarray) -> tuple[float, np.ndarray]:
        q1, q2 = q
        w = 1.0 - q1 * q1
        r = q2 - q1
        lp = -w * w - 0.5 * r * r
        return lp, np.array([4.0 * q1 * w + r, -r])

    return TargetModel(name=name, dim=2, eval=ev, reference=ReferenceMoments(mean=None, sd=None))


def make_funnel(omega: float, name: Optional[str] = None) -> TargetModel:
    """Funnel target: ``q2 | q1 ~ N(0, exp(omega q1))``, ``q1 ~ N(0, 1)``.

    ``log pi~ = -q1^2/2 - omega q1 / 2 - q2^2 exp(-omega q1) / 2``.
    Marginally ``Var(q2) = exp(omega^2 / 2)``.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    om = float(omega)

    def ev(q: np.ndarray) -> tuple[float, np.ndarray]:
        q1, q2 = q
        e = np.exp(-om * q1)
        lp = -0.5 * q1 * q1 - 0.5 * om * q1 - 0.5 * q2 * q2 * e
        return lp, np.array([-q1 - 0.5 * om + 0.5 * om * q2 * q2 * e, -q2 * e])

    ref = ReferenceMoments(
        mean=np.array([0.0, 0.0]),
        sd=np.array([1.0, np.exp(om * om / 4.0)]),
        median=np.array([0.0, 0.0]),
    )
    return TargetModel(name=name or f"funnel_{om:g}", dim=2, eval=ev, reference=ref)


def make_logistic(data: LogisticRegressionData, name: str = "logistic") -> TargetModel:
    """Bayesian logistic regression posterior kernel.

    ``log pi~(b) = sum_i [y_i x_i'b - log(1 + exp(x_i'b))] - b'b / (2 v)``
    with gradient ``X'(y - p) - b / v``, ``p_i = logistic(x_i'b)``.
    """
    X, y, v = data.X, data.y, data.prior_variance
    d = X.shape[1]

    def ev(beta: np.ndarray) -> tuple[float, np.ndarray]:
        if beta.shape != (d,):
            raise ValueError(f"expected beta of length {d}, got shape {beta.shape}")
        eta = X @ beta
        lp = float(y @ eta - np.logaddexp(0.0, eta).sum()) - 0.5 * float(beta @ beta) / v
        grad = X.T @ (y - expit(eta)) - beta / v
        return lp, grad

    return TargetModel(name=name, dim=d, eval=ev, reference=None)


def gradient_error(target: TargetModel, q: np.ndarray) -> float:
    """Max relative error of the analytic gradient vs central differences.

    Uses per-coordinate steps ``1e-6 * max(1, |q_j|)``, which balances
    truncation against rounding error at the 1e-5 check level.
    """
    q = np.asarray(q, dtype=float)
    _, grad = target.eval(q)
    num = np.empty_like(grad)
    for j in range(target.dim):
        step = 1e-6 * max(1.0, abs(q[j]))
        qp = q.copy()
        qp[j] += step
        lp_hi, _ = target.eval(qp)
        qp[j] = q[j] - step
        lp_lo, _ = target.eval(qp)
        num[j] = (lp_hi - lp_lo) / (2.0 * step)
    scale = np.maximum(np.abs(grad), np.abs(num))
    scale[scale < 1e-8] = 1.0
    return float(np.max(np.abs(grad - num) / scale))
