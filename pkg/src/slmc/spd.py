"""Dense symmetric positive (semi)definite matrix kernels.

Every matrix function here goes through one full symmetric
eigendecomposition: exponentials, inverses and square roots are all
assembled as ``V diag(fn(w)) V^T``. At the moderate dimensions this
package targets (dense storage, d <= 4096) a single eigendecomposition
is cheaper and more flexible than scheme-specific algorithms, and the
result is explicitly re-symmetrized to suppress floating-point drift.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInput, NotPositiveDefinite, SingularMatrix

#: Dense d x d storage is assumed throughout; larger inputs are rejected.
MAX_DIM = 4096

_SYM_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """A dense symmetric matrix, symmetrized on construction.

    Inputs must already be symmetric to within 1e-12 relative tolerance;
    the stored array is ``(M + M^T)/2`` and is marked read-only.
    """

    mat: np.ndarray

    def __post_init__(self):
        m = np.array(self.mat, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidInput(f"expected a square matrix, got shape {m.shape}")
        d = m.shape[0]
        if d == 0 or d > MAX_DIM:
            raise InvalidInput(f"dimension {d} outside supported range 1..{MAX_DIM}")
        if not np.all(np.isfinite(m)):
            raise InvalidInput("matrix has non-finite entries")
        asym = float(np.abs(m - m.T).max())
        scale = max(1.0, float(np.abs(m).max()))
        if asym > _SYM_RTOL * scale:
            raise InvalidInput(f"matrix is not symmetric: max|M - M^T| = {asym:.3e}")
        sym = 0.5 * (m + m.T)
        sym.setflags(write=False)
        object.__setattr__(self, "mat", sym)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "SymMatrix":
        return cls(np.eye(dim))

    @classmethod
    def diagonal(cls, entries) -> "SymMatrix":
        return cls(np.diag(np.asarray(entries, dtype=float)))


@dataclass(frozen=True, eq=False)
class EigenPair:
    """Eigendecomposition of a symmetric matrix.

    ``values`` are ascending, ``vectors`` holds the matching orthonormal
    eigenvectors as columns, so ``vectors @ diag(values) @ vectors.T``
    reconstructs the input.
    """

    values: np.ndarray
    vectors: np.ndarray


def sym_eig(m: SymMatrix) -> EigenPair:
    """Full symmetric eigendecomposition, eigenvalues ascending."""
    values, vectors = np.linalg.eigh(m.mat)
    values.setflags(write=False)
    vectors.setflags(write=False)
    return EigenPair(values=values, vectors=vectors)


def spd_apply_fn(m: SymMatrix, fn: Callable[[np.ndarray], np.ndarray]) -> SymMatrix:
    """Apply a scalar function to a symmetric matrix through its spectrum.

    ``fn`` receives the ascending eigenvalue vector and must return the
    transformed eigenvalues (plain scalar functions work too; they are
    broadcast). The result is ``V diag(fn(w)) V^T``, re-symmetrized.

    Raises ``SingularMatrix`` when ``fn`` produces a non-finite value on
    any eigenvalue, e.g. inverting a singular matrix.
    """
    pair = sym_eig(m)
    try:
        with np.errstate(all="ignore"):
            w = np.asarray(fn(pair.values), dtype=float)
        if w.shape != pair.values.shape:
            raise TypeError("not vectorized")
    except (TypeError, ValueError):
        with np.errstate(all="ignore"):
            w = np.array([float(fn(v)) for v in pair.values])
    if not np.all(np.isfinite(w)):
        raise SingularMatrix("matrix function undefined on part of the spectrum")
    result = (pair.vectors * w) @ pair.vectors.T
    return SymMatrix(0.5 * (result + result.T))


def spd_exp(m: SymMatrix, scale: float = 1.0) -> SymMatrix:
    """Matrix exponential exp(scale * M)."""
    return spd_apply_fn(m, lambda w: np.exp(scale * w))


def spd_inv(m: SymMatrix) -> SymMatrix:
    """Inverse via the spectrum; requires all eigenvalues nonzero."""
    return spd_apply_fn(m, lambda w: 1.0 / w)


def spd_sqrt(m: SymMatrix, clip_negative: bool = False) -> SymMatrix:
    """Principal square root.

    With ``clip_negative`` small negative round-off eigenvalues are
    clamped to zero instead of producing NaNs, which is the right call
    for empirical covariance matrices.
    """
    if clip_negative:
        return spd_apply_fn(m, lambda w: np.sqrt(np.clip(w, 0.0, None)))
    return spd_apply_fn(m, np.sqrt)


def cholesky_psd(m: SymMatrix) -> np.ndarray:
    """Lower-triangular factor L with L L^T = M, tolerating semidefiniteness.

    A strict factorization is attempted first. On failure the diagonal
    receives additive jitter ``1e-12 * trace(M)/d``, escalated by 10x at
    most three times before giving up with ``NotPositiveDefinite``.
    """
    a = m.mat
    if not a.any():
        # PSD boundary: the zero matrix factors as zero.
        return np.zeros_like(a)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    base = 1e-12 * float(np.trace(a)) / m.dim
    eye = np.eye(m.dim)
    for escalation in range(4):
        jitter = base * 10.0**escalation
        if jitter <= 0.0:
            break
        try:
            return np.linalg.cholesky(a + jitter * eye)
        except np.linalg.LinAlgError:
            continue
    raise NotPositiveDefinite(
        f"matrix is not positive semidefinite within jitter tolerance {base * 1e3:.3e}"
    )
