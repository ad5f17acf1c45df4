"""Subspaces as orthonormal column bases, plus PSD helpers.

Every closure or density statement in the package is decided here, by a
single singular-value cutoff: sigma > max(rank_rel * sigma_max, ABS_FLOOR).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ContainmentError, NotContractiveError

ABS_FLOOR = 1e-12


@dataclass(frozen=True)
class Tolerance:
    rank_rel: float = 1e-8
    residual_abs: float = 1e-8
    angle: float = 1e-6

    def __post_init__(self):
        for name in ("rank_rel", "residual_abs", "angle"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be > 0")

    def cutoff(self, smax: float) -> float:
        return max(self.rank_rel * smax, ABS_FLOOR)


DEFAULT_TOL = Tolerance()


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Orthonormal columns spanning a subspace of C^ambient_dim."""

    ambient_dim: int
    columns: np.ndarray

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=complex)
        if cols.ndim != 2 or cols.shape[0] != self.ambient_dim:
            raise ValueError(f"columns of shape {cols.shape} do not live in C^{self.ambient_dim}")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)

    @property
    def rank(self) -> int:
        return self.columns.shape[1]

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    def projector(self) -> np.ndarray:
        Q = self.columns
        return Q @ Q.conj().T

    def coords(self, x: np.ndarray) -> np.ndarray:
        """Coordinates of x (vectors or matrix columns) in this basis."""
        return self.columns.conj().T @ x

    def orth_residual(self) -> float:
        Q = self.columns
        if Q.shape[1] == 0:
            return 0.0
        return float(np.linalg.norm(Q.conj().T @ Q - np.eye(Q.shape[1]), 2))

    @staticmethod
    def zero(ambient_dim: int) -> "SubspaceBasis":
        return SubspaceBasis(ambient_dim, np.zeros((ambient_dim, 0), dtype=complex))

    @staticmethod
    def full(ambient_dim: int) -> "SubspaceBasis":
        return SubspaceBasis(ambient_dim, np.eye(ambient_dim, dtype=complex))


def _svd(A: np.ndarray, full: bool = True):
    try:
        return sla.svd(A, full_matrices=full, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        return sla.svd(A, full_matrices=full, lapack_driver="gesvd")


def rank_report(A: np.ndarray, tol: Tolerance = DEFAULT_TOL):
    """Return (rank, indeterminate) for A.

    ``indeterminate`` is set when some singular value sits within a factor
    of 10 of the cutoff, so the verdict depends on the tolerance choice.
    """
    A = np.asarray(A)
    if A.size == 0:
        return 0, False
    s = sla.svdvals(A)
    smax = s[0] if s.size else 0.0
    cut = tol.cutoff(smax)
    r = int(np.sum(s > cut))
    border = bool(np.any((s > cut / 10) & (s < cut * 10)))
    return r, border


def rank(A: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> int:
    return rank_report(A, tol)[0]


def range_of(A: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> SubspaceBasis:
    """Orthonormal basis of the (numerical) column space of A."""
    A = np.asarray(A, dtype=complex)
    m = A.shape[0]
    if A.size == 0:
        return SubspaceBasis.zero(m)
    if A.shape[1] > 2 * m:
        # wide input: A = R* Q* with Q orthonormal, so A and R* share range and singular values
        R = sla.qr(A.conj().T, mode="r")[0][:m]
        A = R.conj().T
    U, s, _ = _svd(A, full=False)
    cut = tol.cutoff(s[0] if s.size else 0.0)
    r = int(np.sum(s > cut))
    return SubspaceBasis(m, U[:, :r])


def orthonormalize(vectors: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> SubspaceBasis:
    """SVD-based orthonormal basis for the span of the columns of ``vectors``."""
    return range_of(vectors, tol)


def null_space(A: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> SubspaceBasis:
    A = np.asarray(A, dtype=complex)
    n = A.shape[1]
    if A.shape[0] == 0 or A.size == 0:
        return SubspaceBasis.full(n)
    _, s, Vh = _svd(A)
    cut = tol.cutoff(s[0] if s.size else 0.0)
    r = int(np.sum(s > cut))
    return SubspaceBasis(n, Vh[r:].conj().T)


def complement(b: SubspaceBasis) -> SubspaceBasis:
    """Orthogonal complement of b in its ambient space."""
    n, r = b.ambient_dim, b.rank
    if r == 0:
        return SubspaceBasis.full(n)
    if r == n:
        return SubspaceBasis.zero(n)
    U, _, _ = _svd(b.columns)
    return SubspaceBasis(n, U[:, r:])


def span_sum(*bases: SubspaceBasis, tol: Tolerance = DEFAULT_TOL) -> SubspaceBasis:
    n = bases[0].ambient_dim
    cols = [b.columns for b in bases if b.rank]
    if not cols:
        return SubspaceBasis.zero(n)
    return range_of(np.hstack(cols), tol)


def intersection(b1: SubspaceBasis, b2: SubspaceBasis, tol: Tolerance = DEFAULT_TOL) -> SubspaceBasis:
    """b1 intersected with b2, via the complement of the sum of complements."""
    return complement(span_sum(complement(b1), complement(b2), tol=tol))


def max_angle_sin(b1: SubspaceBasis, b2: SubspaceBasis) -> float:
    """Sine of the largest principal angle between b1 and its projection into b2.

    Zero exactly when b1 is contained in b2.
    """
    if b1.rank == 0:
        return 0.0
    if b2.rank == 0:
        return 1.0
    R = b1.columns - b2.columns @ (b2.columns.conj().T @ b1.columns)
    return float(min(1.0, np.linalg.norm(R, 2)))


def principal_angles(b1: SubspaceBasis, b2: SubspaceBasis) -> np.ndarray:
    if b1.rank == 0 or b2.rank == 0:
        return np.zeros(0)
    return sla.subspace_angles(b1.columns, b2.columns)


def is_contained(b1: SubspaceBasis, b2: SubspaceBasis, tol: Tolerance = DEFAULT_TOL) -> bool:
    """True when span(b1) lies in span(b2) up to ``tol.angle``."""
    if b1.ambient_dim != b2.ambient_dim:
        raise ValueError("ambient dimensions differ")
    if b1.rank > b2.rank:
        return False
    return max_angle_sin(b1, b2) <= tol.angle


def subspace_equal(b1: SubspaceBasis, b2: SubspaceBasis, tol: Tolerance = DEFAULT_TOL) -> bool:
    if b1.ambient_dim != b2.ambient_dim or b1.rank != b2.rank:
        return False
    return max_angle_sin(b1, b2) <= tol.angle and max_angle_sin(b2, b1) <= tol.angle


def subspace_distance(b1: SubspaceBasis, b2: SubspaceBasis) -> float:
    """Symmetric gap; 1.0 when the dimensions differ."""
    if b1.rank != b2.rank:
        return 1.0
    return max(max_angle_sin(b1, b2), max_angle_sin(b2, b1))


def relative_complement(big: SubspaceBasis, small: SubspaceBasis,
                        tol: Tolerance = DEFAULT_TOL) -> SubspaceBasis:
    """big minus small (orthogonal difference), requires small inside big."""
    if small.rank == 0:
        return big
    if not is_contained(small, big, tol):
        raise ContainmentError(
            f"subspace not contained: sin(max angle)={max_angle_sin(small, big):.3e}")
    # coordinates of small inside big; its span has dimension small.rank
    C = big.columns.conj().T @ small.columns
    U, _, _ = _svd(C)
    return SubspaceBasis(big.ambient_dim, big.columns @ U[:, small.rank:])


def restrict_to_subspace(vectors: np.ndarray, b: SubspaceBasis, tol: Tolerance = DEFAULT_TOL):
    """Coordinates of ``vectors`` in b and the leakage norm outside b."""
    c = b.coords(vectors)
    leak = np.linalg.norm(vectors - b.columns @ c) if vectors.size else 0.0
    return c, float(leak)


def psd_sqrt(A: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Square root of a Hermitian PSD matrix.

    Eigenvalues in [-tol*(1+|A|), 0) are clipped to zero.  Anything more
    negative raises ``NotContractiveError``.
    """
    A = np.asarray(A, dtype=complex)
    if A.size == 0:
        return A.copy()
    H = 0.5 * (A + A.conj().T)
    w, V = sla.eigh(H)
    scale = 1.0 + max(abs(w[0]), abs(w[-1]))
    if w[0] < -tol * scale:
        raise NotContractiveError(f"matrix not PSD: min eigenvalue {w[0]:.3e}")
    w = np.clip(w, 0.0, None)
    R = (V * np.sqrt(w)) @ V.conj().T
    return 0.5 * (R + R.conj().T)


def procrustes_unitary(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Unitary U minimising |U A - B|_F (rows of A, B index the same space)."""
    M = B @ A.conj().T
    U, _, Vh = sla.svd(M)
    return U @ Vh


# public alias matching the operation name; nothing in this module calls the builtin
range = range_of  # noqa: A001
