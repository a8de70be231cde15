"""Scaled underdamped Langevin chain with an exact per-step Gaussian kernel.

One step of size delta integrates

    dv = -gamma A v dt - u g dt + sqrt(2 gamma u A) dB,   dx = v dt

exactly, with the gradient g frozen at the step's start. Because the
drift is then linear with matrix coefficients that are all functions of
the single SPD matrix A, the transition is Gaussian with closed-form
mean and covariance, assembled here per eigenvalue of A:

    mean_v  = e^{-gamma A d} v - (u/gamma) A^{-1} (I - e^{-gamma A d}) g
    mean_x  = x + (gamma A)^{-1} (I - e^{-gamma A d}) v
              - (u/gamma) A^{-1} [d I - (gamma A)^{-1} (I - e^{-gamma A d})] g
    cov_vv  = u (I - e^{-2 gamma A d})
    cov_xv  = (u/gamma) A^{-1} (I - e^{-gamma A d})^2
    cov_xx  = (2u/gamma) A^{-1} [d I - (2 gamma A)^{-1} e^{-2 gamma A d}
              + (2/gamma) A^{-1} e^{-gamma A d} - (3/2)(gamma A)^{-1}]

(writing d for delta). All blocks commute, the covariance does not
depend on the state, and the position/velocity pair must be drawn
jointly since the cross block is structurally nonzero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NumericalBlowup
from .spd import SymMatrix, cholesky_psd, sym_eig
from .targets import InitSpec, TargetModel
from .tuner import ScalingConfig

#: Coordinates beyond this magnitude abort the chain instead of overflowing.
BLOWUP_GUARD = 1e12


@dataclass(frozen=True, eq=False)
class ChainState:
    """Position and velocity of one chain."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if x.shape != v.shape or x.ndim != 1:
            raise InvalidInput("x and v must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise InvalidInput("chain state has non-finite entries")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def dim(self) -> int:
        return self.x.size


@dataclass(frozen=True, eq=False)
class KernelMoments:
    """Exact mean and covariance blocks of one frozen-gradient step."""

    mean_x: np.ndarray
    mean_v: np.ndarray
    cov_xx: SymMatrix
    cov_vv: SymMatrix
    cov_xv: np.ndarray

    def joint_mean(self) -> np.ndarray:
        return np.concatenate([self.mean_x, self.mean_v])

    def joint_cov(self) -> SymMatrix:
        top = np.hstack([self.cov_xx.mat, self.cov_xv])
        bottom = np.hstack([self.cov_xv.T, self.cov_vv.mat])
        return SymMatrix(np.vstack([top, bottom]))


def _cov_xx_shape(s: np.ndarray) -> np.ndarray:
    """g(s) = s + 2 expm1(-s) - expm1(-2s)/2, switching to its series
    s^3/3 - s^4/4 + 7 s^5/60 below s = 1e-3 where the direct form cancels."""
    direct = s + 2.0 * np.expm1(-s) - 0.5 * np.expm1(-2.0 * s)
    series = s**3 / 3.0 - s**4 / 4.0 + 7.0 * s**5 / 60.0
    return np.where(s < 1e-3, series, direct)


class _KernelCoeffs:
    """State-independent matrices of one step, shared by moments and cache."""

    def __init__(self, config: ScalingConfig, delta: float):
        if not (delta > 0.0 and np.isfinite(delta)):
            raise InvalidInput("step size delta must be positive")
        pair = sym_eig(config.A)
        alpha = pair.values
        if alpha[0] <= 0.0:
            raise InvalidInput("scaling matrix A must be SPD")
        vec = pair.vectors
        gamma, u = config.gamma, config.u
        s = gamma * alpha * delta
        decay = np.exp(-s)
        decay2 = np.exp(-2.0 * s)
        one_minus = -np.expm1(-s)  # 1 - e^{-s}, accurate for small s

        def assemble(coef: np.ndarray) -> np.ndarray:
            out = (vec * coef) @ vec.T
            return 0.5 * (out + out.T)

        ga = gamma * alpha
        self.dim = alpha.size
        self.delta = delta
        self.gamma = gamma
        self.u = u
        self.eigenvalues = alpha
        self.vectors = vec
        self.exp_gA = SymMatrix(assemble(decay))
        self.exp_2gA = SymMatrix(assemble(decay2))
        self.A_inv = SymMatrix(assemble(1.0 / alpha))
        self.gA_inv = SymMatrix(assemble(1.0 / ga))
        self.mx_v = assemble(one_minus / ga)
        self.mx_g = assemble(u * (s + np.expm1(-s)) / ga**2)
        self.mv_v = self.exp_gA.mat
        self.mv_g = assemble(u * one_minus / ga)
        self.cov_vv = SymMatrix(assemble(-u * np.expm1(-2.0 * s)))
        self.cov_xv = assemble((u / ga) * np.expm1(-s) ** 2)
        self.cov_xx = SymMatrix(assemble(2.0 * u * _cov_xx_shape(s) / ga**2))

    def joint_cov(self) -> SymMatrix:
        top = np.hstack([self.cov_xx.mat, self.cov_xv])
        bottom = np.hstack([self.cov_xv.T, self.cov_vv.mat])
        return SymMatrix(np.vstack([top, bottom]))

    def means(self, x: np.ndarray, v: np.ndarray, g: np.ndarray):
        mean_x = x + self.mx_v @ v - self.mx_g @ g
        mean_v = self.mv_v @ v - self.mv_g @ g
        return mean_x, mean_v


@dataclass(frozen=True, eq=False)
class StepCache:
    """Everything precomputable for fixed (A, gamma, u, delta).

    The joint covariance is state-independent, so its Cholesky factor is
    computed once here and reused by every step.
    """

    config: ScalingConfig
    delta: float
    dim: int
    exp_gA: SymMatrix
    exp_2gA: SymMatrix
    A_inv: SymMatrix
    gA_inv: SymMatrix
    coeffs: _KernelCoeffs
    joint_cov: SymMatrix
    chol: np.ndarray


def kernel_moments(
    state: ChainState, grad: np.ndarray, config: ScalingConfig, delta: float
) -> KernelMoments:
    """Exact first and second moments of one frozen-gradient step."""
    coeffs = _KernelCoeffs(config, delta)
    g = np.asarray(grad, dtype=float)
    if g.shape != (coeffs.dim,) or state.dim != coeffs.dim:
        raise InvalidInput("state/gradient dimension does not match A")
    mean_x, mean_v = coeffs.means(state.x, state.v, g)
    return KernelMoments(
        mean_x=mean_x,
        mean_v=mean_v,
        cov_xx=coeffs.cov_xx,
        cov_vv=coeffs.cov_vv,
        cov_xv=coeffs.cov_xv,
    )


def make_step_cache(config: ScalingConfig, delta: float) -> StepCache:
    """Precompute matrix functions and the joint covariance factor for a step size."""
    coeffs = _KernelCoeffs(config, delta)
    joint = coeffs.joint_cov()
    return StepCache(
        config=config,
        delta=delta,
        dim=coeffs.dim,
        exp_gA=coeffs.exp_gA,
        exp_2gA=coeffs.exp_2gA,
        A_inv=coeffs.A_inv,
        gA_inv=coeffs.gA_inv,
        coeffs=coeffs,
        joint_cov=joint,
        chol=cholesky_psd(joint),
    )


def _advance(cache: StepCache, x, v, g, z):
    d = cache.dim
    noise = cache.chol @ z
    mean_x, mean_v = cache.coeffs.means(x, v, g)
    new_x = mean_x + noise[:d]
    new_v = mean_v + noise[d:]
    if not (np.all(np.abs(new_x) < BLOWUP_GUARD) and np.all(np.abs(new_v) < BLOWUP_GUARD)):
        raise NumericalBlowup("chain coordinate left the guarded region")
    return new_x, new_v


def step(
    state: ChainState, target: TargetModel, cache: StepCache, rng: np.random.Generator
) -> ChainState:
    """Advance one chain by one exact Gaussian step (one gradient call)."""
    if state.dim != cache.dim or target.dim != cache.dim:
        raise InvalidInput("state/target dimension does not match the cache")
    g = target.grad_oracle(state.x)
    if not np.all(np.isfinite(g)):
        raise NumericalBlowup("gradient oracle returned non-finite values")
    z = rng.standard_normal(2 * cache.dim)
    new_x, new_v = _advance(cache, state.x, state.v, g, z)
    return ChainState(x=new_x, v=new_v)


@dataclass(frozen=True, eq=False)
class ChainRun:
    """Retained states of one chain plus bookkeeping."""

    xs: np.ndarray
    vs: np.ndarray
    steps: np.ndarray
    grad_calls: int
    final: ChainState


def run_chain(
    init: InitSpec,
    target: TargetModel,
    config: ScalingConfig,
    delta: float,
    n_steps: int,
    rng: np.random.Generator,
    thin: int = 1,
    burn_in: int = 0,
    stationary_velocity_init: bool = False,
) -> ChainRun:
    """Run one chain from (x0, 0), retaining every thin-th state after burn-in.

    Makes exactly ``n_steps`` gradient calls. Set
    ``stationary_velocity_init`` to start from v ~ N(0, u I) instead of
    the default zero velocity.
    """
    if n_steps < 1:
        raise InvalidInput("n_steps must be at least 1")
    if thin < 1 or burn_in < 0:
        raise InvalidInput("thin must be >= 1 and burn_in >= 0")
    if init.x0.size != target.dim:
        raise InvalidInput("init dimension does not match the target")
    cache = make_step_cache(config, delta)
    if cache.dim != target.dim:
        raise InvalidInput("scaling matrix dimension does not match the target")

    d = target.dim
    x = init.x0.copy()
    if stationary_velocity_init:
        v = math.sqrt(config.u) * rng.standard_normal(d)
    else:
        v = np.zeros(d)

    kept = max(0, (n_steps - burn_in) // thin)
    xs = np.empty((kept, d))
    vs = np.empty((kept, d))
    steps = np.empty(kept, dtype=np.int64)
    out = 0
    for i in range(1, n_steps + 1):
        g = target.grad_oracle(x)
        if not np.all(np.isfinite(g)):
            raise NumericalBlowup("gradient oracle returned non-finite values", i)
        z = rng.standard_normal(2 * d)
        try:
            x, v = _advance(cache, x, v, g, z)
        except NumericalBlowup as exc:
            raise NumericalBlowup("chain coordinate left the guarded region", i) from exc
        if i > burn_in and (i - burn_in) % thin == 0:
            xs[out] = x
            vs[out] = v
            steps[out] = i
            out += 1
    return ChainRun(
        xs=xs, vs=vs, steps=steps, grad_calls=n_steps, final=ChainState(x=x, v=v)
    )


def coupled_pair_run(
    init_a: InitSpec,
    init_b: InitSpec,
    target: TargetModel,
    config: ScalingConfig,
    delta: float,
    n_steps: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Synchronously coupled pair: both chains consume identical noise.

    Returns the squared coupling distance
    rho_i = |x_i - y_i|^2 + |(x_i + v_i) - (y_i + w_i)|^2 for i = 0..n;
    its decay rate measures the contraction of the dynamics.
    """
    if init_a.x0.size != init_b.x0.size:
        raise InvalidInput("coupled inits must share a dimension")
    if n_steps < 1:
        raise InvalidInput("n_steps must be at least 1")
    cache = make_step_cache(config, delta)
    d = target.dim
    xa, va = init_a.x0.copy(), np.zeros(d)
    xb, vb = init_b.x0.copy(), np.zeros(d)

    def rho(xa, va, xb, vb) -> float:
        dx = xa - xb
        dq = (xa + va) - (xb + vb)
        return float(dx @ dx + dq @ dq)

    out = np.empty(n_steps + 1)
    out[0] = rho(xa, va, xb, vb)
    for i in range(1, n_steps + 1):
        ga = target.grad_oracle(xa)
        gb = target.grad_oracle(xb)
        if not (np.all(np.isfinite(ga)) and np.all(np.isfinite(gb))):
            raise NumericalBlowup("gradient oracle returned non-finite values", i)
        z = rng.standard_normal(2 * d)
        xa, va = _advance(cache, xa, va, ga, z)
        xb, vb = _advance(cache, xb, vb, gb, z)
        out[i] = rho(xa, va, xb, vb)
    return out
