"""Row contractions T = [T_1 ... T_n] on C^d, their defects and characteristic functions."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import List, Optional, Sequence

import numpy as np

from .errors import ConsistencyError, NotContractiveError
from .manop import MultiAnalyticSymbol
from .numsub import DEFAULT_TOL, SubspaceBasis, Tolerance, psd_sqrt, range_of

VALIDATION_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class RowContraction:
    n: int
    d: int
    T: tuple = field(repr=False)

    @property
    def row(self) -> np.ndarray:
        """The d x nd matrix [T_1 ... T_n]."""
        return np.hstack(self.T) if self.d else np.zeros((0, 0), dtype=complex)

    def word(self, w: Sequence[int]) -> np.ndarray:
        """T_w = T_{w_1} ... T_{w_k}."""
        out = np.eye(self.d, dtype=complex)
        for c in w:
            out = out @ self.T[c - 1]
        return out

    def psi(self, X: np.ndarray) -> np.ndarray:
        return sum(Ti @ X @ Ti.conj().T for Ti in self.T)

    def adjoint_tuple(self):
        return [Ti.conj().T for Ti in self.T]


def make(matrices) -> RowContraction:
    """Validate and wrap a list of square matrices as a row contraction."""
    mats = [np.atleast_2d(np.asarray(M, dtype=complex)) for M in matrices]
    if not mats:
        raise ValueError("need at least one matrix")
    d = mats[0].shape[0]
    for M in mats:
        if M.shape != (d, d):
            raise ValueError(f"expected {d}x{d} matrices, got {M.shape}")
    R = np.hstack(mats)
    viol = -float(np.linalg.eigvalsh(np.eye(d) - R @ R.conj().T)[0]) if d else 0.0
    if viol > VALIDATION_TOL:
        raise NotContractiveError(f"I - sum T_i T_i* has eigenvalue {-viol:.3e}; max violation {viol:.3e}")
    for M in mats:
        M.setflags(write=False)
    return RowContraction(len(mats), d, tuple(mats))


@dataclass(frozen=True, eq=False)
class DefectData:
    D_T: np.ndarray
    D_Tstar: np.ndarray
    defect_space: SubspaceBasis
    defect_space_star: SubspaceBasis


def defects(T: RowContraction, tol: Tolerance = DEFAULT_TOL) -> DefectData:
    R = T.row
    DT = psd_sqrt(np.eye(T.n * T.d) - R.conj().T @ R, tol=1e-9)
    DTs = psd_sqrt(np.eye(T.d) - R @ R.conj().T, tol=1e-9)
    return DefectData(DT, DTs, range_of(DT, tol), range_of(DTs, tol))


@dataclass(frozen=True)
class Classification:
    pure: bool
    cnc: bool
    residual_norm_curve: List[float]
    fixed_space_dim: int
    proxy_note: str = "finite-k proxy; near-unitary inputs may be misclassified"


def classify(T: RowContraction, k_max: int = 50, tol: Tolerance = DEFAULT_TOL) -> Classification:
    """Purity from |Psi^k(I)|, c.n.c. from the common eigenvalue-1 space of Psi^k(I)."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    X = np.eye(T.d, dtype=complex)
    curve = [float(np.linalg.norm(X, 2))]
    fixed = np.eye(T.d, dtype=complex)
    for _ in range(k_max):
        X = T.psi(X)
        X = 0.5 * (X + X.conj().T)
        curve.append(float(np.linalg.norm(X, 2)))
        if fixed.shape[1]:
            # vectors h in the current fixed space with <X h, h> = |h|^2
            C = fixed.conj().T @ (np.eye(T.d) - X) @ fixed
            w, V = np.linalg.eigh(0.5 * (C + C.conj().T))
            fixed = fixed @ V[:, w <= max(tol.residual_abs, 1e-10)]
    pure = curve[-1] <= tol.residual_abs
    cnc = fixed.shape[1] == 0
    return Classification(pure, cnc or pure, curve, int(fixed.shape[1]))


def char_function(T: RowContraction, N: int, tol: Tolerance = DEFAULT_TOL,
                  dd: Optional[DefectData] = None) -> MultiAnalyticSymbol:
    """Characteristic function in orthonormal coordinates of the two defect spaces.

    theta_0 = -T on the defect space of T, and
    theta_{i alpha} = D_{T*} T_alpha* P_i D_T for |i alpha| <= N.
    """
    if N < 1:
        raise ValueError("truncation N must be >= 1")
    dd = dd or defects(T, tol)
    B, Bs = dd.defect_space.columns, dd.defect_space_star.columns
    n, d = T.n, T.d
    coeffs = {}
    leak = 0.0

    def put(w, A_full):
        nonlocal leak
        leak = max(leak, float(np.linalg.norm(A_full - Bs @ (Bs.conj().T @ A_full))))
        coeffs[w] = Bs.conj().T @ A_full @ B

    put((), -T.row @ B @ B.conj().T)
    # T_alpha* for all alpha up to length N-1, built word by word
    adj = {(): np.eye(d, dtype=complex)}
    frontier = [()]
    for g in range(N):
        for alpha in frontier:
            Ta = adj[alpha]
            for i in range(1, n + 1):
                Pi_DT = dd.D_T[(i - 1) * d:i * d, :]
                put((i,) + alpha, dd.D_Tstar @ Ta @ Pi_DT)
        if g == N - 1:
            break
        new = []
        for alpha in frontier:
            for j in range(1, n + 1):
                # T_{alpha j}* = T_j* T_alpha*
                adj[alpha + (j,)] = T.T[j - 1].conj().T @ adj[alpha]
                new.append(alpha + (j,))
        frontier = new
    if leak > max(tol.residual_abs, 1e-8):
        raise ConsistencyError(f"coefficients leak outside the defect space of T* by {leak:.3e}")
    return MultiAnalyticSymbol(n, B.shape[1], Bs.shape[1], coeffs)


def jointly_invariant(T: RowContraction, M: SubspaceBasis, tol: Tolerance = DEFAULT_TOL) -> bool:
    return invariance_residual(T, M) <= tol.residual_abs


def invariance_residual(T: RowContraction, M: SubspaceBasis) -> float:
    if M.rank == 0:
        return 0.0
    Q = M.columns
    return max(float(np.linalg.norm(Ti @ Q - Q @ (Q.conj().T @ Ti @ Q), 2)) for Ti in T.T)


# ---------------------------------------------------------------- generators

def random_contraction(n: int, d: int, seed: int, norm: Optional[float] = None) -> RowContraction:
    """Random complex tuple scaled so the row has norm ``norm`` (default drawn in (0.3, 0.95))."""
    rng = np.random.default_rng(seed)
    mats = [rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for _ in range(n)]
    s = np.linalg.norm(np.hstack(mats), 2)
    target = rng.uniform(0.3, 0.95) if norm is None else norm
    return make([M * (target / (s + 1e-15)) for M in mats])


def nilpotent(n: int, d: int, seed: int, degree: Optional[int] = None,
              norm: Optional[float] = None) -> RowContraction:
    """Strictly upper triangular tuple with T_alpha = 0 whenever |alpha| >= degree.

    The band structure puts nonzero entries only on superdiagonals
    1..ceil(d/degree)-ish so that products of ``degree`` factors vanish;
    with degree=None any strictly upper triangular tuple (nilpotent of order d).
    """
    rng = np.random.default_rng(seed)
    degree = d if degree is None else max(1, min(degree, d))
    # block strictly-upper structure: split indices into `degree` consecutive groups,
    # each T_i maps group g+1 into group g only
    groups = np.array_split(np.arange(d), degree)
    label = np.empty(d, dtype=int)
    for g, ix in enumerate(groups):
        label[ix] = g
    mask = (label[None, :] - label[:, None]) == 1
    mats = []
    for _ in range(n):
        A = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) * mask
        mats.append(A)
    s = np.linalg.norm(np.hstack(mats), 2)
    target = rng.uniform(0.4, 0.9) if norm is None else norm
    if s == 0:
        return make(mats)
    return make([M * (target / s) for M in mats])


def scalar(values) -> RowContraction:
    """Tuple of 1x1 matrices."""
    return make([np.array([[v]], dtype=complex) for v in values])


def psi_power(T: RowContraction, k: int) -> np.ndarray:
    X = np.eye(T.d, dtype=complex)
    for _ in range(k):
        X = T.psi(X)
    return X


def all_words_vanish(T: RowContraction, length: int) -> bool:
    return all(not np.any(T.word(w)) for w in product(range(1, T.n + 1), repeat=length))
