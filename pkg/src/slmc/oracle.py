"""Brute-force integrators used to verify the analytic step kernel.

Euler-Maruyama is deliberately the dumbest credible scheme: weak order
one, with accuracy bought through substeps rather than cleverness, so
that it stays an independent check on the closed-form moments. Noise is
injected as sqrt(2 gamma u h) A^{1/2} xi per substep, equal in law to
the exact diffusion term.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NumericalBlowup
from .sampler import BLOWUP_GUARD, ChainState, kernel_moments
from .spd import SymMatrix, spd_sqrt
from .targets import TargetModel
from .tuner import ScalingConfig

_CHUNK = 16384


@dataclass(frozen=True)
class EulerConfig:
    """Resolution of an Euler run: substeps per step and replica count."""

    substeps: int
    replicas: int

    def __post_init__(self):
        if self.substeps < 1 or (self.substeps & (self.substeps - 1)) != 0:
            raise InvalidInput("substeps must be a positive power of two")
        if self.replicas < 1:
            raise InvalidInput("replicas must be positive")


def euler_frozen(
    state: ChainState,
    grad: np.ndarray,
    config: ScalingConfig,
    delta: float,
    ecfg: EulerConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate one frozen-gradient step for many replicas.

    Each replica runs substeps of size h = delta/substeps:

        v <- v + h (-gamma A v - u g) + sqrt(2 gamma u h) A^{1/2} xi
        x <- x + h v

    Returns the end states as (replicas, d) position and velocity
    arrays. Replicas are processed in fixed-size chunks off a single
    generator, so a given seed always yields the same cloud.
    """
    if not (delta > 0.0 and np.isfinite(delta)):
        raise InvalidInput("delta must be positive")
    d = state.dim
    g = np.asarray(grad, dtype=float)
    if g.shape != (d,):
        raise InvalidInput("gradient dimension does not match the state")
    a_mat = config.A.mat
    root_a = spd_sqrt(config.A).mat
    h = delta / ecfg.substeps
    amp = math.sqrt(2.0 * config.gamma * config.u * h)
    drift = config.u * g

    damp = (-config.gamma * h) * a_mat
    kick = amp * root_a
    h_drift = h * drift

    xs = np.empty((ecfg.replicas, d))
    vs = np.empty((ecfg.replicas, d))
    done = 0
    while done < ecfg.replicas:
        k = min(_CHUNK, ecfg.replicas - done)
        x = np.tile(state.x, (k, 1))
        v = np.tile(state.v, (k, 1))
        xi = np.empty((k, d))
        buf = np.empty((k, d))
        for _ in range(ecfg.substeps):
            rng.standard_normal(out=xi)
            np.matmul(v, damp, out=buf)
            v += buf
            v -= h_drift
            np.matmul(xi, kick, out=buf)
            v += buf
            np.multiply(v, h, out=buf)
            x += buf
        xs[done : done + k] = x
        vs[done : done + k] = v
        done += k
    return xs, vs


def euler_full(
    state: ChainState,
    target: TargetModel,
    config: ScalingConfig,
    total_time: float,
    ecfg: EulerConfig,
    rng: np.random.Generator,
) -> ChainState:
    """Integrate the full dynamics (gradient re-evaluated every substep).

    Used only for stationarity sanity checks; returns the end state
    after total_time with h = total_time/substeps.
    """
    if not (total_time > 0.0 and np.isfinite(total_time)):
        raise InvalidInput("total_time must be positive")
    a_mat = config.A.mat
    root_a = spd_sqrt(config.A).mat
    h = total_time / ecfg.substeps
    amp = math.sqrt(2.0 * config.gamma * config.u * h)
    x = state.x.copy()
    v = state.v.copy()
    for i in range(ecfg.substeps):
        g = target.grad_oracle(x)
        if not np.all(np.isfinite(g)):
            raise NumericalBlowup("gradient oracle returned non-finite values", i)
        xi = rng.standard_normal(x.shape)
        v = v + h * (-config.gamma * (a_mat @ v) - config.u * g) + amp * (root_a @ xi)
        x = x + h * v
        if not (np.all(np.abs(x) < BLOWUP_GUARD) and np.all(np.abs(v) < BLOWUP_GUARD)):
            raise NumericalBlowup("trajectory left the guarded region", i)
    return ChainState(x=x, v=v)


# ---------------------------------------------------------------------------
# Kernel validation suite: analytic moments vs Euler Monte Carlo.


@dataclass(frozen=True, eq=False)
class KernelCase:
    """One randomized comparison setup."""

    label: str
    config: ScalingConfig
    state: ChainState
    grad: np.ndarray
    delta: float


@dataclass(frozen=True, eq=False)
class CaseReport:
    case: KernelCase
    max_z_mean: float
    max_z_cov: float
    seconds: float

    def passed(self, threshold: float = 5.0) -> bool:
        return self.max_z_mean <= threshold and self.max_z_cov <= threshold


def kernel_validation_cases(
    seed: int, n_cases: int = 10, eig_range: tuple[float, float] = (2.0, 50.0)
) -> list[KernelCase]:
    """Randomized cases: d cycles over {1,2,4}, delta alternates 0.1/0.5,
    A is a random SPD matrix with eigenvalues in ``eig_range``."""
    rng = np.random.default_rng(seed)
    dims = [1, 2, 4]
    deltas = [0.1, 0.5]
    cases = []
    for i in range(n_cases):
        d = dims[i % len(dims)]
        delta = deltas[i % len(deltas)]
        eigs = rng.uniform(eig_range[0], eig_range[1], size=d)
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        a = SymMatrix((q * eigs) @ q.T)
        u = float(rng.uniform(0.5, 2.5))
        config = ScalingConfig(
            A=a, u=u, gamma=1.0, theta=0.0, m_hat=1.0, kappa_hat=1.0, y_hat=np.zeros(d)
        )
        state = ChainState(x=rng.standard_normal(d), v=rng.standard_normal(d))
        grad = rng.standard_normal(d)
        cases.append(
            KernelCase(
                label=f"case{i:02d}-d{d}-delta{delta:g}",
                config=config,
                state=state,
                grad=grad,
                delta=delta,
            )
        )
    return cases


def run_kernel_validation(
    seed: int = 0,
    replicas: int = 100_000,
    substeps: int = 1024,
    n_cases: int = 10,
) -> list[CaseReport]:
    """Compare analytic step moments against Euler Monte Carlo clouds.

    Every mean coordinate and covariance entry is scored as a z-value
    against its Monte Carlo standard error (Gaussian cloud, so the
    covariance SE is sqrt((S_ii S_jj + S_ij^2)/(R-1))).
    """
    reports = []
    for idx, case in enumerate(kernel_validation_cases(seed, n_cases)):
        start = time.monotonic()
        d = case.state.dim
        exact = kernel_moments(case.state, case.grad, case.config, case.delta)
        ecfg = EulerConfig(substeps=substeps, replicas=replicas)
        case_rng = np.random.default_rng(np.random.SeedSequence([seed, idx]))
        xs, vs = euler_frozen(case.state, case.grad, case.config, case.delta, ecfg, case_rng)
        joint = np.hstack([xs, vs])
        emp_mean = joint.mean(axis=0)
        emp_cov = np.cov(joint, rowvar=False).reshape(2 * d, 2 * d)

        sigma = exact.joint_cov().mat
        mean = exact.joint_mean()
        se_mean = np.sqrt(np.diag(sigma) / replicas)
        z_mean = np.abs(emp_mean - mean) / se_mean
        var_cov = (np.outer(np.diag(sigma), np.diag(sigma)) + sigma**2) / (replicas - 1)
        z_cov = np.abs(emp_cov - sigma) / np.sqrt(var_cov)
        reports.append(
            CaseReport(
                case=case,
                max_z_mean=float(z_mean.max()),
                max_z_cov=float(z_cov.max()),
                seconds=time.monotonic() - start,
            )
        )
    return reports
