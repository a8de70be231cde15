"""Shared test utilities."""

import numpy as np

from slmc import ScalingConfig, SymMatrix


def random_spd(rng, dim, lo=0.5, hi=10.0):
    """Random SPD matrix with eigenvalues drawn uniformly in [lo, hi]."""
    eigs = rng.uniform(lo, hi, size=dim)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return SymMatrix((q * eigs) @ q.T)


def make_config(a: SymMatrix, u=1.0, gamma=1.0, theta=0.0):
    """ScalingConfig with placeholder tuning fields, for kernel-level tests."""
    return ScalingConfig(
        A=a,
        u=u,
        gamma=gamma,
        theta=theta,
        m_hat=1.0,
        kappa_hat=1.0,
        y_hat=np.zeros(a.dim),
    )


class ZeroRng:
    """Generator stand-in whose normal draws are all zero."""

    def standard_normal(self, size=None, out=None):
        if out is not None:
            out[...] = 0.0
            return out
        if size is None:
            return 0.0
        return np.zeros(size)
