"""Multi-analytic operators on the truncated Fock space.

Convention (fixed throughout the package): the operator with symbol
{theta_alpha} acts by

    M (e_beta (x) h) = sum_alpha e_{beta alpha} (x) theta_alpha h,

which is what makes M commute with S_i (x) I.  Composition then reads
(phi theta)_gamma = sum over gamma = alpha beta of phi_beta theta_alpha.

Two truncations are used.  ``assemble`` gives the square compression
P_N M P_N; square compressions of analytic operators multiply exactly.
Defects use the restriction of M to Gamma_N (x) E, whose Gram matrix is the
exact compression of M*M, so inner symbols have zero defect at every grade.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
from scipy import sparse

from . import freeword as fw
from .errors import (DecompositionError, NotContractiveError,
                     TruncationInconsistentError)
from .numsub import (ABS_FLOOR, DEFAULT_TOL, SubspaceBasis, Tolerance, complement,
                     null_space, orthonormalize, range_of, rank_report,
                     subspace_equal)

Word = fw.Word


def _clean(coeffs: Mapping, shape) -> Dict[Word, np.ndarray]:
    out = {}
    for w, A in coeffs.items():
        w = fw.from_str(w) if isinstance(w, str) else tuple(int(c) for c in w)
        A = np.array(A, dtype=complex).reshape(shape)
        if np.any(A != 0):
            A.setflags(write=False)
            out[w] = A
    return dict(sorted(out.items(), key=lambda kv: (len(kv[0]), kv[0])))


@dataclass(frozen=True, eq=False)
class MultiAnalyticSymbol:
    """Finitely supported symbol word -> (dimEstar x dimE) matrix."""

    n: int
    dimE: int
    dimEstar: int
    coeffs: Dict[Word, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1 or self.dimE < 0 or self.dimEstar < 0:
            raise ValueError("bad symbol dimensions")
        c = _clean(self.coeffs, (self.dimEstar, self.dimE))
        for w in c:
            if any(not 1 <= a <= self.n for a in w):
                raise ValueError(f"word {fw.to_str(w)!r} uses letters outside 1..{self.n}")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return max((len(w) for w in self.coeffs), default=0)

    @property
    def shape(self):
        return (self.dimEstar, self.dimE)

    def coeff(self, w: Sequence[int]) -> np.ndarray:
        w = tuple(w)
        if w in self.coeffs:
            return self.coeffs[w]
        return np.zeros(self.shape, dtype=complex)

    def support(self) -> List[Word]:
        return list(self.coeffs)

    def coefficient_gram_excess(self) -> float:
        """Largest eigenvalue of sum theta_a* theta_a minus 1 (<= 0 for contractive)."""
        if self.dimE == 0:
            return -1.0
        G = sum((A.conj().T @ A for A in self.coeffs.values()),
                np.zeros((self.dimE, self.dimE), dtype=complex))
        return float(np.linalg.eigvalsh(0.5 * (G + G.conj().T))[-1] - 1.0)

    def check_contractive_witness(self, tol: float = 1e-8) -> None:
        ex = self.coefficient_gram_excess()
        if ex > tol:
            raise NotContractiveError(f"sum of coefficient Grams exceeds identity by {ex:.3e}")

    def scaled(self, c: complex) -> "MultiAnalyticSymbol":
        return MultiAnalyticSymbol(self.n, self.dimE, self.dimEstar,
                                   {w: c * A for w, A in self.coeffs.items()})

    def compress(self, P: np.ndarray, Q: np.ndarray) -> "MultiAnalyticSymbol":
        """Symbol P^H theta Q, with P, Q orthonormal columns."""
        return MultiAnalyticSymbol(self.n, Q.shape[1], P.shape[1],
                                   {w: P.conj().T @ A @ Q for w, A in self.coeffs.items()})

    def max_diff(self, other: "MultiAnalyticSymbol") -> float:
        if self.shape != other.shape:
            return np.inf
        ws = set(self.coeffs) | set(other.coeffs)
        return max((float(np.abs(self.coeff(w) - other.coeff(w)).max(initial=0.0))
                    for w in ws), default=0.0)

    @staticmethod
    def constant(A, n: int) -> "MultiAnalyticSymbol":
        A = np.atleast_2d(np.asarray(A, dtype=complex))
        return MultiAnalyticSymbol(n, A.shape[1], A.shape[0], {(): A})

    @staticmethod
    def identity(n: int, m: int) -> "MultiAnalyticSymbol":
        return MultiAnalyticSymbol.constant(np.eye(m), n)

    @staticmethod
    def zero(n: int, dimE: int, dimEstar: int) -> "MultiAnalyticSymbol":
        return MultiAnalyticSymbol(n, dimE, dimEstar, {})

    @staticmethod
    def shift(n: int = 1) -> "MultiAnalyticSymbol":
        """Row shift C^n -> C with theta_i = e_i^T, inner.  For n=1 this is z."""
        coeffs = {}
        for i in range(1, n + 1):
            row = np.zeros((1, n))
            row[0, i - 1] = 1.0
            coeffs[(i,)] = row
        return MultiAnalyticSymbol(n, n, 1, coeffs)


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    matrix: np.ndarray
    N: int
    N_out: int
    symbol: MultiAnalyticSymbol

    @property
    def shape(self):
        return self.matrix.shape


def assemble_matrix(sym: MultiAnalyticSymbol, N: int, N_out: Optional[int] = None,
                    idx_in=None, idx_out=None) -> np.ndarray:
    """Matrix of M from Gamma_N (x) E into Gamma_{N_out} (x) E_*."""
    N_out = N if N_out is None else N_out
    idx_in = idx_in or fw.enumerate_words(sym.n, N)
    idx_out = idx_out or fw.enumerate_words(sym.n, N_out)
    p, q = sym.dimEstar, sym.dimE
    M = np.zeros((idx_out.size * p, idx_in.size * q), dtype=complex)
    if p == 0 or q == 0:
        return M
    for col, beta in enumerate(idx_in.words):
        for alpha, A in sym.coeffs.items():
            if len(beta) + len(alpha) <= N_out:
                row = idx_out.pos[beta + alpha]
                M[row * p:(row + 1) * p, col * q:(col + 1) * q] = A
    return M


def assemble(sym: MultiAnalyticSymbol, N: int) -> AssembledOperator:
    """Square truncation P_N M P_N on Gamma_N (x) E -> Gamma_N (x) E_*.

    Exact on columns of grade <= N - degree; square truncations multiply
    exactly because M only raises grades.
    """
    return AssembledOperator(assemble_matrix(sym, N), N, N, sym)


def multiply(phi: MultiAnalyticSymbol, theta: MultiAnalyticSymbol) -> MultiAnalyticSymbol:
    """Symbol of M_phi M_theta."""
    if phi.n != theta.n:
        raise ValueError("alphabet sizes differ")
    if theta.dimEstar != phi.dimE:
        raise ValueError(f"dimension mismatch: theta maps into C^{theta.dimEstar}, "
                         f"phi is defined on C^{phi.dimE}")
    out: Dict[Word, np.ndarray] = {}
    for a, Ta in theta.coeffs.items():
        for b, Pb in phi.coeffs.items():
            g = a + b
            out[g] = out.get(g, 0) + Pb @ Ta
    return MultiAnalyticSymbol(phi.n, theta.dimE, phi.dimEstar, out)


def multiply_chain(factors: Sequence[MultiAnalyticSymbol]) -> MultiAnalyticSymbol:
    """Theta_k ... Theta_1 for factors given in the order [Theta_1, ..., Theta_k]."""
    prod = factors[0]
    for f in factors[1:]:
        prod = multiply(f, prod)
    return prod


def defect_gram(sym: MultiAnalyticSymbol, N: int) -> np.ndarray:
    """P_N (I - M*M) P_N, computed exactly from the restriction of M to Gamma_N."""
    Mr = sparse.csr_matrix(assemble_matrix(sym, N, N + sym.degree))
    return np.eye(Mr.shape[1]) - (Mr.conj().T @ Mr).toarray()


@dataclass(frozen=True, eq=False)
class Defect:
    delta: np.ndarray
    range: SubspaceBasis
    N: int
    min_eig: float
    indeterminate: bool

    def __iter__(self):
        return iter((self.delta, self.range))


def defect(sym: MultiAnalyticSymbol, N: int, tol: Tolerance = DEFAULT_TOL) -> Defect:
    """Defect operator (I - M*M)^{1/2} compressed to Gamma_N (x) E, and its range."""
    return _defect_cached(sym, N, tol)


# symbols are immutable, and the cache holds a reference, so keying on identity is safe
@functools.lru_cache(maxsize=128)
def _defect_cached(sym: MultiAnalyticSymbol, N: int, tol: Tolerance) -> Defect:
    G = defect_gram(sym, N)
    if G.size == 0:
        return Defect(G, SubspaceBasis.zero(G.shape[0]), N, 0.0, False)
    if np.linalg.norm(G) <= ABS_FLOOR:
        # below the absolute rank floor: no eigenvalue could count
        D = np.zeros_like(G)
        D.setflags(write=False)
        return Defect(D, SubspaceBasis.zero(G.shape[0]), N, 0.0, False)
    # one eigendecomposition gives the root, its singular values and its range
    w, V = sla.eigh(0.5 * (G + G.conj().T))
    if w[0] < -max(tol.residual_abs, 1e-10):
        raise NotContractiveError(f"assembled symbol is not contractive: I - M*M has eigenvalue {w[0]:.3e}")
    if w[-1] <= 1e-14:
        D = np.zeros_like(G)
        return Defect(D, SubspaceBasis.zero(G.shape[0]), N, float(w[0]), False)
    # rank is read off the Gram: a root amplifies roundoff 1e-16 up to 1e-8
    cut = tol.cutoff(float(w[-1]))
    keep = w > cut
    border = bool(np.any((w > cut / 10) & (w < cut * 10)))
    s = np.where(keep, np.sqrt(np.clip(w, 0.0, None)), 0.0)
    D = (V * s) @ V.conj().T
    D = 0.5 * (D + D.conj().T)
    D.setflags(write=False)
    Bcols = V[:, keep][:, ::-1]
    return Defect(D, SubspaceBasis(G.shape[0], Bcols), N, float(w[0]), border)


def is_purely_contractive(sym: MultiAnalyticSymbol, tol: Tolerance = DEFAULT_TOL) -> bool:
    A = sym.coeff(())
    if A.size == 0:
        return True
    return float(np.linalg.norm(A, 2)) < 1 - tol.residual_abs


@dataclass(frozen=True, eq=False)
class PureDecomposition:
    pure_part: MultiAnalyticSymbol
    U: np.ndarray
    domE: SubspaceBasis
    domEstar: SubspaceBasis
    pure_dom: SubspaceBasis
    pure_codom: SubspaceBasis
    reconstruction_residual: float

    def __iter__(self):
        return iter((self.pure_part, (self.U, self.domE, self.domEstar)))


def purely_contractive_part(sym: MultiAnalyticSymbol, tol: Tolerance = DEFAULT_TOL) -> PureDecomposition:
    """Split theta into a purely contractive part and a unitary constant.

    The unitary part lives on E^u, the vectors isometrically mapped by
    theta_0 and killed by every other coefficient; the split is refined
    until theta_alpha(E minus E^u) is orthogonal to theta_0 E^u for all alpha.
    """
    m, p = sym.dimE, sym.dimEstar
    A0 = sym.coeff(())
    loose = Tolerance(rank_rel=1e-6)
    if m == 0:
        Eu = SubspaceBasis.zero(0)
    else:
        w, V = np.linalg.eigh(A0.conj().T @ A0)
        Eu = SubspaceBasis(m, V[:, w > 1 - 10 * tol.residual_abs])
        higher = [A for a, A in sym.coeffs.items() if a]
        if higher and Eu.rank:
            K = null_space(np.vstack(higher) @ Eu.columns, tol)
            Eu = SubspaceBasis(m, Eu.columns @ K.columns)
    for _ in range(m + 1):
        if Eu.rank == 0:
            break
        img = A0 @ Eu.columns
        Q = complement(Eu).columns
        # rows: E^u coordinates; columns: everything theta sends out of E minus E^u
        B = np.hstack([img.conj().T @ A @ Q for A in sym.coeffs.values()]
                      + [np.zeros((Eu.rank, 0))])
        if not B.size or np.linalg.norm(B) <= tol.residual_abs:
            break
        keep = null_space(B.conj().T, tol)
        if keep.rank == Eu.rank:
            break
        Eu = SubspaceBasis(m, Eu.columns @ keep.columns)
    else:
        raise DecompositionError("unitary part did not stabilise")
    if Eu.rank:
        Estar_u = orthonormalize(A0 @ Eu.columns, loose)
        if Estar_u.rank != Eu.rank:
            raise DecompositionError("constant coefficient not isometric on the unitary part")
        U = Estar_u.columns.conj().T @ A0 @ Eu.columns
    else:
        Estar_u = SubspaceBasis.zero(p)
        U = np.zeros((0, 0), dtype=complex)
    Q = complement(Eu)
    P = complement(Estar_u)
    pure = sym.compress(P.columns, Q.columns)
    # reassemble and compare coefficientwise
    res = 0.0
    for a in set(sym.coeffs) | {()}:
        rebuilt = P.columns @ pure.coeff(a) @ Q.columns.conj().T
        if a == () and Eu.rank:
            rebuilt = rebuilt + Estar_u.columns @ U @ Eu.columns.conj().T
        res = max(res, float(np.abs(rebuilt - sym.coeff(a)).max(initial=0.0)))
    if res > max(tol.residual_abs, 1e-8):
        raise DecompositionError(f"split does not reproduce the symbol (residual {res:.3e})")
    return PureDecomposition(pure, U, Eu, Estar_u, Q, P, res)


@dataclass(frozen=True, eq=False)
class RowIsometry:
    """C_1..C_n acting on coordinates of the defect range basis."""

    C: List[np.ndarray]
    basis: SubspaceBasis
    domain: SubspaceBasis
    relation_residual: float
    isometry_defect: float

    def __iter__(self):
        return iter(self.C)

    def __len__(self):
        return len(self.C)

    def __getitem__(self, j):
        return self.C[j]


def row_isometry_C(sym: MultiAnalyticSymbol, N: int, tol: Tolerance = DEFAULT_TOL,
                   dfct: Optional[Defect] = None) -> RowIsometry:
    """Solve C_j Delta f = Delta (S_j (x) I) f for f supported in grades <= N-1.

    C_j is defined on the coordinates of the defect range; on the part of the
    range not reached by Delta(Gamma_{N-1} (x) E) the minimum-norm solution
    (zero) is taken.  ``domain`` records the reached subspace in coordinates.
    """
    dfct = dfct or defect(sym, N, tol)
    D, B = dfct.delta, dfct.range
    r = B.rank
    idx = fw.enumerate_words(sym.n, N)
    m = sym.dimE
    if r == 0:
        z = np.zeros((0, 0), dtype=complex)
        return RowIsometry([z] * sym.n, B, SubspaceBasis.zero(0), 0.0, 0.0)
    cols = np.where(fw.interior_mask(idx, m, N - 1))[0]
    X = B.coords(D[:, cols])
    dom = orthonormalize(X, tol)
    Xp = np.linalg.pinv(X, rcond=tol.rank_rel)
    Cs, res = [], 0.0
    for j in range(1, sym.n + 1):
        Sj = fw.ampliate(fw.creation_matrix(j, idx), m)
        Y = B.coords(D @ Sj[:, cols])
        Cj = Y @ Xp
        res = max(res, float(np.linalg.norm(Cj @ X - Y)))
        leak = np.linalg.norm(D @ Sj[:, cols] - B.columns @ Y)
        res = max(res, float(leak))
        Cs.append(Cj)
    scale = max(1.0, float(np.linalg.norm(X)))
    if res > max(tol.residual_abs, 1e-8) * scale:
        raise TruncationInconsistentError(f"defining relation residual {res:.3e}")
    Pd = dom.columns
    iso = 0.0
    for i in range(sym.n):
        for j in range(sym.n):
            G = Pd.conj().T @ Cs[i].conj().T @ Cs[j] @ Pd
            target = np.eye(dom.rank) if i == j else 0
            iso = max(iso, float(np.linalg.norm(G - target)) if dom.rank else 0.0)
    return RowIsometry(Cs, B, dom, res, iso)


@dataclass(frozen=True)
class SzegoReport:
    satisfied: bool
    cuntz: bool
    cuntz_residual: float
    range_rank: int
    shifted_rank: int
    caveat: str = "rank comparison at finite truncation"

    def __iter__(self):
        return iter((self.satisfied, self.cuntz))

    @property
    def agree(self) -> bool:
        return self.satisfied == self.cuntz


def szego_check(sym: MultiAnalyticSymbol, N: int, tol: Tolerance = DEFAULT_TOL) -> SzegoReport:
    """Szego range condition and the Cuntz property of C, decided independently.

    satisfied: range Delta(Gamma_N (x) E) equals range Delta over words of
    length >= 1.  cuntz: sum_j C_j C_j* is the identity on the defect range.
    """
    dfct = defect(sym, N, tol)
    B = dfct.range
    if B.rank == 0:
        return SzegoReport(True, True, 0.0, 0, 0)
    idx = fw.enumerate_words(sym.n, N)
    shifted_cols = np.repeat(idx.grade_mask(N, 1), sym.dimE)
    shifted = range_of(dfct.delta[:, shifted_cols], tol)
    satisfied = subspace_equal(B, shifted, tol)
    C = row_isometry_C(sym, N, tol, dfct)
    SC = sum(Cj @ Cj.conj().T for Cj in C.C)
    cres = float(np.linalg.norm(SC - np.eye(B.rank), 2))
    cuntz = cres <= max(tol.residual_abs, 1e-8)
    return SzegoReport(bool(satisfied), bool(cuntz), cres, B.rank, shifted.rank)


# ---------------------------------------------------------------- coincidence

@dataclass(frozen=True, eq=False)
class CoincidenceVerdict:
    level: str  # "witness" | "invariants_pass" | "fail"
    residual: float
    U: Optional[np.ndarray] = None
    V: Optional[np.ndarray] = None
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.level == "witness"

    def __bool__(self):
        return self.level != "fail"


def _witness_residual(M: MultiAnalyticSymbol, Nsym: MultiAnalyticSymbol, U, V) -> float:
    words = set(M.coeffs) | set(Nsym.coeffs)
    if not words or M.dimE == 0 and M.dimEstar == 0:
        return 0.0
    return max(float(np.linalg.norm(Nsym.coeff(a) @ U - V @ M.coeff(a), 2)) if
               (M.dimE and M.dimEstar) else 0.0 for a in words)


def _polar(X: np.ndarray) -> np.ndarray:
    if X.size == 0:
        return X
    P, _, Qh = sla.svd(X)
    return P @ Qh


def grade_singular_values(sym: MultiAnalyticSymbol, g: int) -> np.ndarray:
    ws = [w for w in sym.coeffs if len(w) == g]
    if not ws or sym.dimE == 0:
        return np.zeros(0)
    s = sla.svdvals(np.vstack([sym.coeffs[w] for w in ws]))
    return s[s > 1e-13]


def coincide(M: MultiAnalyticSymbol, Nsym: MultiAnalyticSymbol, tol: Tolerance = DEFAULT_TOL,
             witness: Optional[Tuple[np.ndarray, np.ndarray]] = None,
             seed: Optional[Tuple[np.ndarray, np.ndarray]] = None,
             max_iter: int = 100) -> CoincidenceVerdict:
    """Decide whether N_alpha U = V M_alpha for unitaries U, V.

    With ``witness`` the pair is only verified.  Otherwise a grade-wise
    singular value screen runs first, followed by an alternating Procrustes
    search (started from ``seed`` when given) and, if that stalls, an exact
    linear solve for the intertwiners.
    """
    thr = tol.residual_abs
    if M.n != Nsym.n:
        return CoincidenceVerdict("fail", np.inf, reason="alphabet sizes differ")
    if (M.dimE, M.dimEstar) != (Nsym.dimE, Nsym.dimEstar):
        return CoincidenceVerdict("fail", np.inf, reason=f"dimensions {M.shape} vs {Nsym.shape}")
    if witness is not None:
        U, V = (np.asarray(x, dtype=complex) for x in witness)
        ures = max(_unitarity(U), _unitarity(V))
        res = max(_witness_residual(M, Nsym, U, V), ures)
        level = "witness" if res <= thr else "fail"
        return CoincidenceVerdict(level, res, U, V, "" if level == "witness" else "supplied witness fails")
    if M.dimE == 0 and M.dimEstar == 0:
        z = np.zeros((0, 0), dtype=complex)
        return CoincidenceVerdict("witness", 0.0, z, z, "empty symbols")
    for g in range(max(M.degree, Nsym.degree) + 1):
        a, b = grade_singular_values(M, g), grade_singular_values(Nsym, g)
        if a.shape != b.shape or (a.size and np.abs(a - b).max() > max(thr, 1e-10) * 10):
            return CoincidenceVerdict("fail", np.inf, reason=f"singular values differ at grade {g}")
    words = sorted(set(M.coeffs) | set(Nsym.coeffs), key=lambda w: (len(w), w))
    if seed is not None:
        U, V = (np.asarray(x, dtype=complex) for x in seed)
        U, V = _polar(U), _polar(V)
    else:
        U, V = _initial_alignment(M, Nsym, words)
    best = (_witness_residual(M, Nsym, U, V), U, V)
    for _ in range(max_iter):
        if best[0] <= thr:
            break
        V = _polar(sum(Nsym.coeff(a) @ U @ M.coeff(a).conj().T for a in words))
        U = _polar(sum(Nsym.coeff(a).conj().T @ V @ M.coeff(a) for a in words))
        r = _witness_residual(M, Nsym, U, V)
        if r < best[0]:
            best = (r, U, V)
    if best[0] > thr:
        lin = _intertwiner_witness(M, Nsym, words)
        if lin is not None:
            r = max(_witness_residual(M, Nsym, *lin), _unitarity(lin[0]), _unitarity(lin[1]))
            if r < best[0]:
                best = (r,) + lin
    if best[0] <= thr:
        return CoincidenceVerdict("witness", best[0], best[1], best[2])
    return CoincidenceVerdict("invariants_pass", best[0], best[1], best[2],
                              "no witness found by the search")


#: unknown count above which the linear intertwiner solve is skipped
_LINEAR_SOLVE_CAP = 800


def _intertwiner_witness(M, Nsym, words):
    """Solve N_a U = V M_a and U M_a* = N_a* V linearly, then take polar parts.

    The solution set is closed under adjoints, so a generic element has
    unitary polar factors that still intertwine.
    """
    m, p = M.dimE, M.dimEstar
    if not m or not p or m * m + p * p > _LINEAR_SOLVE_CAP:
        return None
    Im, Ip = np.eye(m), np.eye(p)
    rows = []
    for a in words:
        A, B = M.coeff(a), Nsym.coeff(a)
        # column-major vec: vec(B U) = (I kron B) vec U, vec(V A) = (A^T kron I) vec V
        rows.append(np.hstack([np.kron(Im, B), -np.kron(A.T, Ip)]))
        rows.append(np.hstack([np.kron(A.conj(), Im), -np.kron(Ip, B.conj().T)]))
    X = np.vstack(rows)
    R = sla.qr(X, mode="r")[0] if X.shape[0] > X.shape[1] else X
    _, s, Vh = sla.svd(R)
    s = np.concatenate([s, np.zeros(Vh.shape[0] - s.size)])
    null = Vh[s <= 1e-9 * max(s[0], 1.0)].conj().T
    if null.shape[1] == 0:
        return None
    x = null @ np.random.default_rng(0).standard_normal(null.shape[1])
    U = x[:m * m].reshape((m, m), order="F")
    V = x[m * m:].reshape((p, p), order="F")
    if min(sla.svdvals(U)[-1], sla.svdvals(V)[-1]) <= 1e-8 * max(np.abs(x).max(), 1e-300):
        return None
    return _polar(U), _polar(V)


def _unitarity(U: np.ndarray) -> float:
    if U.size == 0:
        return 0.0
    return max(float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[1]), 2)),
               float(np.linalg.norm(U @ U.conj().T - np.eye(U.shape[0]), 2)))


def _initial_alignment(M, Nsym, words):
    """Align right singular vectors of the stacked coefficients, then left ones."""
    m, p = M.dimE, M.dimEstar
    Ms = np.vstack([M.coeff(a) for a in words]) if m else np.zeros((0, 0))
    Ns = np.vstack([Nsym.coeff(a) for a in words]) if m else np.zeros((0, 0))
    if m:
        _, _, Qm = sla.svd(Ms)
        _, _, Qn = sla.svd(Ns)
        U = Qn.conj().T @ Qm
    else:
        U = np.zeros((0, 0), dtype=complex)
    V = _polar(sum(Nsym.coeff(a) @ U @ M.coeff(a).conj().T for a in words)) if p and m \
        else np.eye(p, dtype=complex)
    return U, V


# ---------------------------------------------------------------- inner / outer

@dataclass(frozen=True)
class OuterVerdict:
    outer: bool
    rank: int
    expected: int
    caveat: str = "finite truncation rank proxy; may report false positives"

    def __bool__(self):
        return self.outer


def is_inner(sym: MultiAnalyticSymbol, N: int, tol: Tolerance = DEFAULT_TOL) -> bool:
    """M*M = I on columns supported in grades <= N - degree."""
    if sym.dimE == 0:
        return True
    G = defect_gram(sym, N)
    idx = fw.enumerate_words(sym.n, N)
    mask = fw.interior_mask(idx, sym.dimE, max(N - sym.degree, 0))
    return float(np.linalg.norm(G[np.ix_(mask, mask)], 2)) <= tol.residual_abs


def is_outer(sym: MultiAnalyticSymbol, N: int, tol: Tolerance = DEFAULT_TOL) -> OuterVerdict:
    """Dense-range proxy: the square truncation has full row rank.

    Rows of the top ``degree`` grades may be unreachable at truncation, so
    only rows of grade <= N - degree are required to be hit.
    """
    M = assemble(sym, N).matrix
    idx = fw.enumerate_words(sym.n, N)
    rows = fw.interior_mask(idx, sym.dimEstar, max(N - sym.degree, 0))
    sub = M[rows]
    r, _ = rank_report(sub, tol)
    expected = int(rows.sum())
    return OuterVerdict(bool(r == expected and expected > 0), r, expected)


def intertwining_residual(sym: MultiAnalyticSymbol, N: int) -> float:
    """max_i |M S_i - S_i M| on columns of grade <= N - degree - 1."""
    idx = fw.enumerate_words(sym.n, N)
    M = assemble(sym, N).matrix
    cin = fw.interior_mask(idx, sym.dimE, N - sym.degree - 1)
    out = 0.0
    for i in range(1, sym.n + 1):
        S = fw.creation_matrix(i, idx)
        L = M @ fw.ampliate(S, sym.dimE)
        R = fw.ampliate(S, sym.dimEstar) @ M
        if cin.any():
            out = max(out, float(np.abs((L - R)[:, cin]).max(initial=0.0)))
    return out


def random_symbol(n: int, dimE: int, dimEstar: int, degree: int, seed: int,
                  norm: float = 0.9, real: bool = False) -> MultiAnalyticSymbol:
    """Random polynomial symbol with operator norm at most ``norm``.

    The grade-g part is sum_{|a|=g} R_a (x) theta_a with R_a isometries of
    orthogonal ranges, so its norm is the norm of the stacked grade-g
    coefficients; scaling the sum of those norms bounds the whole operator.
    """
    rng = np.random.default_rng(seed)
    idx = fw.enumerate_words(n, degree)
    raw = {}
    for w in idx.words:
        A = rng.standard_normal((dimEstar, dimE))
        if not real:
            A = A + 1j * rng.standard_normal((dimEstar, dimE))
        raw[w] = A
    total = 0.0
    for g in range(degree + 1):
        ws = idx.words_of_length(g)
        if dimE and dimEstar:
            total += float(np.linalg.norm(np.vstack([raw[w] for w in ws]), 2))
    scale = norm / total if total > 0 else 0.0
    return MultiAnalyticSymbol(n, dimE, dimEstar, {w: scale * A for w, A in raw.items()})


def random_isometry(m: int, p: int, seed: int) -> np.ndarray:
    """p x m matrix with orthonormal columns (p >= m)."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((p, m)) + 1j * rng.standard_normal((p, m))
    Q, R = np.linalg.qr(X)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_unitary(m: int, seed: int) -> np.ndarray:
    return random_isometry(m, m, seed)
