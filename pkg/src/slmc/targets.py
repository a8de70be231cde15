"""Strongly log-concave target densities with gradient and Hessian oracles.

A target is minus the log of the density of interest: a twice
continuously differentiable f with an L-Lipschitz gradient and strong
convexity modulus m > 0. Both built-ins (Gaussian and logistic-ridge)
carry analytic constants, a known minimizer, and oracles for f, grad f
and the Hessian.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import InvalidInput, MinimizerNotFound
from .spd import SymMatrix, spd_apply_fn, sym_eig

_GRAD_AT_MIN_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class TargetModel:
    """A log-concave target with oracle access and known constants.

    ``value_oracle``, ``grad_oracle`` and ``hess_oracle`` evaluate f,
    grad f and the Hessian (as a SymMatrix) at a point. ``m`` and ``L``
    are the strong-convexity and gradient-Lipschitz constants,
    ``minimizer`` the unique minimum of f. ``hess_constant`` marks
    targets whose Hessian does not depend on the evaluation point.
    ``position_cov`` is the exact stationary covariance of the position
    marginal when it is known in closed form (Gaussian targets), used by
    diagnostics; it is None otherwise.
    """

    dim: int
    name: str
    value_oracle: Callable[[np.ndarray], float]
    grad_oracle: Callable[[np.ndarray], np.ndarray]
    hess_oracle: Callable[[np.ndarray], SymMatrix]
    m: float
    L: float
    minimizer: np.ndarray
    hess_constant: bool = False
    position_cov: SymMatrix | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInput("dimension must be positive")
        if not (self.m > 0.0 and np.isfinite(self.m)):
            raise InvalidInput("strong-convexity constant m must be positive")
        if not (self.L >= self.m and np.isfinite(self.L)):
            raise InvalidInput("smoothness constant L must satisfy L >= m")
        x_star = np.asarray(self.minimizer, dtype=float)
        if x_star.shape != (self.dim,):
            raise InvalidInput("minimizer has wrong shape")
        grad_norm = float(np.linalg.norm(self.grad_oracle(x_star)))
        if grad_norm > _GRAD_AT_MIN_TOL * (1.0 + self.L):
            raise InvalidInput(
                f"|grad f| = {grad_norm:.3e} at the claimed minimizer"
            )
        object.__setattr__(self, "minimizer", x_star)

    @property
    def kappa(self) -> float:
        return self.L / self.m


@dataclass(frozen=True, eq=False)
class InitSpec:
    """Deterministic chain start: position x0 and a bound D >= |x0 - x*|."""

    x0: np.ndarray
    dist_bound: float

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        if not np.all(np.isfinite(x0)):
            raise InvalidInput("x0 has non-finite entries")
        if not (self.dist_bound >= 0.0 and np.isfinite(self.dist_bound)):
            raise InvalidInput("distance bound must be a nonnegative real")
        object.__setattr__(self, "x0", x0)

    @classmethod
    def from_point(
        cls, target: TargetModel, x0: np.ndarray | None = None, dist_bound: float | None = None
    ) -> "InitSpec":
        """Build an init for a target, defaulting D to |x0 - x*| exactly."""
        x0 = target.minimizer if x0 is None else np.asarray(x0, dtype=float)
        if x0.shape != (target.dim,):
            raise InvalidInput("x0 has wrong dimension for this target")
        dist = float(np.linalg.norm(x0 - target.minimizer))
        if dist_bound is None:
            dist_bound = dist
        elif dist_bound < dist:
            raise InvalidInput(
                f"distance bound {dist_bound:g} below actual |x0 - x*| = {dist:g}"
            )
        return cls(x0=x0, dist_bound=float(dist_bound))


def make_gaussian(
    mean: np.ndarray, precision: SymMatrix, name: str | None = None
) -> TargetModel:
    """Gaussian target f(x) = (x-mean)^T P (x-mean) / 2 for SPD precision P.

    The Hessian is the constant P, so m and L are its extreme
    eigenvalues and the stationary position covariance is P^{-1}.
    """
    mean = np.asarray(mean, dtype=float)
    d = precision.dim
    if mean.shape != (d,):
        raise InvalidInput("mean has wrong dimension for the precision matrix")
    pair = sym_eig(precision)
    lo, hi = float(pair.values[0]), float(pair.values[-1])
    if lo <= 0.0:
        raise InvalidInput(f"precision matrix is not SPD (lambda_min = {lo:.3e})")
    p = precision.mat

    def value(x: np.ndarray) -> float:
        r = x - mean
        return 0.5 * float(r @ (p @ r))

    def grad(x: np.ndarray) -> np.ndarray:
        return p @ (x - mean)

    def hess(_: np.ndarray) -> SymMatrix:
        return precision

    return TargetModel(
        dim=d,
        name=name or f"gaussian-d{d}",
        value_oracle=value,
        grad_oracle=grad,
        hess_oracle=hess,
        m=lo,
        L=hi,
        minimizer=mean.copy(),
        hess_constant=True,
        position_cov=spd_apply_fn(precision, lambda w: 1.0 / w),
    )


def make_logistic_ridge(
    features: np.ndarray,
    labels: np.ndarray,
    ridge: float,
    name: str | None = None,
    max_newton_iter: int = 200,
) -> TargetModel:
    """Ridge-regularized logistic loss, a target with a nonconstant Hessian.

        f(x) = sum_i log(1 + exp(-y_i a_i^T x)) + ridge/2 |x|^2

    Constants are the analytic bounds m = ridge and
    L = ridge + max_eig(sum_i a_i a_i^T)/4; these are valid (conservative)
    and deterministic, unlike numerical estimates of the extremal Hessian
    eigenvalues. The minimizer is located by damped Newton iteration to
    gradient norm <= 1e-10.
    """
    a = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if a.ndim != 2:
        raise InvalidInput("features must be a 2-D array")
    n, d = a.shape
    if y.shape != (n,):
        raise InvalidInput("labels must match the number of feature rows")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("features contain non-finite entries")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidInput("labels must take values in {-1, +1}")
    if not (ridge > 0.0 and np.isfinite(ridge)):
        raise InvalidInput("ridge penalty must be positive")

    gram = a.T @ a
    gram_top = float(np.linalg.eigvalsh(0.5 * (gram + gram.T))[-1]) if n else 0.0
    m = float(ridge)
    big_l = float(ridge + 0.25 * gram_top)
    ya = a * y[:, None]  # rows y_i a_i; margins are ya @ x

    def value(x: np.ndarray) -> float:
        z = ya @ x
        return float(np.logaddexp(0.0, -z).sum() + 0.5 * ridge * (x @ x))

    def grad(x: np.ndarray) -> np.ndarray:
        z = ya @ x
        return -ya.T @ expit(-z) + ridge * x

    def hess(x: np.ndarray) -> SymMatrix:
        z = ya @ x
        w = expit(z) * expit(-z)
        h = (a * w[:, None]).T @ a + ridge * np.eye(d)
        return SymMatrix(0.5 * (h + h.T))

    minimizer = _newton_minimize(value, grad, hess, d, max_newton_iter)

    constant = not np.any(a)
    return TargetModel(
        dim=d,
        name=name or f"logistic-n{n}-d{d}",
        value_oracle=value,
        grad_oracle=grad,
        hess_oracle=hess,
        m=m,
        L=big_l,
        minimizer=minimizer,
        hess_constant=constant,
    )


def _newton_minimize(value, grad, hess, dim: int, max_iter: int) -> np.ndarray:
    x = np.zeros(dim)
    for _ in range(max_iter):
        g = grad(x)
        if np.linalg.norm(g) <= 1e-10:
            return x
        step = np.linalg.solve(hess(x).mat, g)
        # Backtracking keeps the iteration globally safe on skewed data.
        t, f0, slope = 1.0, value(x), float(g @ step)
        for _ in range(40):
            if value(x - t * step) <= f0 - 0.25 * t * slope:
                break
            t *= 0.5
        x = x - t * step
    if np.linalg.norm(grad(x)) <= 1e-10:
        return x
    raise MinimizerNotFound(
        f"Newton did not reach gradient norm 1e-10 in {max_iter} iterations"
    )


def grad_check(target: TargetModel, point: np.ndarray) -> float:
    """Max relative error of the analytic oracles against central differences.

    The gradient is checked coordinate-wise with step h = 1e-5 (1 + |x_i|)
    and the Hessian column-wise against differenced gradients; errors are
    normalized by 1 + |analytic|.
    """
    x = np.asarray(point, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInput("point has non-finite entries")
    g = target.grad_oracle(x)
    h_mat = target.hess_oracle(x).mat
    worst = 0.0
    for i in range(target.dim):
        h = 1e-5 * (1.0 + abs(x[i]))
        e = np.zeros(target.dim)
        e[i] = h
        fd = (target.value_oracle(x + e) - target.value_oracle(x - e)) / (2.0 * h)
        worst = max(worst, abs(g[i] - fd) / (1.0 + abs(g[i])))
        gd = (target.grad_oracle(x + e) - target.grad_oracle(x - e)) / (2.0 * h)
        col_err = np.abs(h_mat[:, i] - gd) / (1.0 + np.abs(h_mat[:, i]))
        worst = max(worst, float(col_err.max()))
    return worst


def sample_exact_positions(
    target: TargetModel, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Exact draws from the target's position marginal (closed-form targets only)."""
    if target.position_cov is None:
        raise InvalidInput(f"target {target.name!r} has no closed-form sampler")
    from .spd import cholesky_psd  # local import keeps module load order simple

    chol = cholesky_psd(target.position_cov)
    z = rng.standard_normal((count, target.dim))
    return target.minimizer + z @ chol.T


def load_logistic_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a headerless CSV dataset: feature columns, then a {-1,+1} label column."""
    try:
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise InvalidInput(f"could not parse dataset {path}: {exc}") from exc
    if raw.shape[1] < 2:
        raise InvalidInput("dataset needs at least one feature column plus labels")
    features, labels = raw[:, :-1], raw[:, -1]
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise InvalidInput("label column must take values in {-1, +1}")
    return features, labels
