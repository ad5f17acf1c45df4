"""Truncated minimal isometric dilation of a pure row contraction and the
extraction of a factorization of its characteristic function from a chain
of joint invariant subspaces.

K = Gamma_N (x) D_{T*} in orthonormal coordinates of the defect space of T*;
H sits inside K through h -> sum_alpha e_alpha (x) D_{T*} T_alpha* h, and the
dilating isometries are V_i = S_i (x) I.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from . import freeword as fw
from . import rowcon
from .errors import ChainError, NotContractiveError, NotPureError
from .fmodel import ModelSpace, build_model, build_model_from_chain, \
    invariant_chain_from_factorization
from .manop import CoincidenceVerdict, MultiAnalyticSymbol, coincide
from .numsub import (DEFAULT_TOL, SubspaceBasis, Tolerance, complement, is_contained,
                     orthonormalize, relative_complement, subspace_distance)
from .regfact import FactorizationChain, RegularityReport, is_k_regular

#: coefficients below this size are treated as exact zeros when reading off symbols
COEFF_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class DilationData:
    T: rowcon.RowContraction
    N: int
    idx: fw.FockIndex = field(repr=False)
    r: int                       # dim of the defect space of T*
    embed: np.ndarray = field(repr=False)
    V: List[np.ndarray] = field(repr=False)
    L: SubspaceBasis = field(repr=False)
    Lstar: SubspaceBasis = field(repr=False)
    tail: float
    isometry_defect: float
    adjoint_residual: float
    decomposition_angle: float
    dd: rowcon.DefectData = field(repr=False)

    @property
    def K_dim(self) -> int:
        return self.idx.size * self.r

    @property
    def H(self) -> SubspaceBasis:
        return SubspaceBasis(self.K_dim, self.embed)

    def embed_subspace(self, M: SubspaceBasis) -> SubspaceBasis:
        return SubspaceBasis(self.K_dim, self.embed @ M.columns)


def generated(F: SubspaceBasis, V: Sequence[np.ndarray], idx: fw.FockIndex,
              tol: Tolerance = DEFAULT_TOL) -> SubspaceBasis:
    """Truncation of M_V(F) = span{V_alpha F}."""
    if F.rank == 0:
        return SubspaceBasis.zero(F.ambient_dim)
    cols, frontier = [F.columns], [F.columns]
    for _ in range(idx.N):
        nxt = [Vi @ X for X in frontier for Vi in V]
        nxt = [X for X in nxt if np.any(np.abs(X) > 0)]
        if not nxt:
            break
        cols.extend(nxt)
        frontier = nxt
    return orthonormalize(np.hstack(cols), tol)


def pure_dilation(T: rowcon.RowContraction, N: int, tol: Tolerance = DEFAULT_TOL) -> DilationData:
    cls = rowcon.classify(T, max(50, 2 * N), tol)
    if not cls.pure:
        raise NotPureError("forward extraction needs a pure row contraction "
                           f"(|Psi^k(I)| = {cls.residual_norm_curve[-1]:.3e})")
    dd = rowcon.defects(T, tol)
    Bs = dd.defect_space_star.columns
    r = Bs.shape[1]
    idx = fw.enumerate_words(T.n, N)
    E = np.zeros((idx.size * r, T.d), dtype=complex)
    top = Bs.conj().T @ dd.D_Tstar
    for k, w in enumerate(idx.words):
        # T_w* = T_{w_k}* ... T_{w_1}*
        E[k * r:(k + 1) * r] = top @ T.word(w).conj().T
    V = [fw.ampliate(fw.creation_matrix(i, idx), r) for i in range(1, T.n + 1)]
    tail = float(np.linalg.norm(rowcon.psi_power(T, N + 1), 2))
    iso = float(np.linalg.norm(E.conj().T @ E - np.eye(T.d), 2))
    adj = max(float(np.linalg.norm(V[i].conj().T @ E - E @ T.T[i].conj().T, 2)) for i in range(T.n))
    L = orthonormalize(np.hstack([V[i] @ E - E @ T.T[i] for i in range(T.n)]), tol)
    Ls = orthonormalize((np.eye(idx.size * r) - sum(Vi @ Vi.conj().T for Vi in V)) @ E, tol)
    Hb = orthonormalize(E, tol)
    total = orthonormalize(np.hstack([Hb.columns, generated(L, V, idx, tol).columns]), tol)
    ang = subspace_distance(total, SubspaceBasis.full(idx.size * r))
    return DilationData(T, N, idx, r, E, V, L, Ls, tail, iso, adj, ang, dd)


@dataclass(frozen=True, eq=False)
class WanderingLadder:
    """Levels 0..k: K_0 = M_V(L), K_k = K, F_0 = L, F_k = L_*."""

    M: List[SubspaceBasis]          # the chain in H, including 0 and H at the ends
    K: List[SubspaceBasis] = field(repr=False)
    F: List[SubspaceBasis] = field(repr=False)
    R: List[SubspaceBasis] = field(repr=False)   # residual (Cuntz) parts, zero for pure T
    wandering_residual: float = 0.0
    inclusion_angle: float = 0.0
    top_angle: float = 0.0

    @property
    def k(self) -> int:
        return len(self.F) - 1


def _support_grade(x: np.ndarray, idx: fw.FockIndex, r: int) -> int:
    if x.size == 0:
        return 0
    mags = np.abs(x).reshape(idx.size, r, -1).max(axis=(1, 2))
    nz = np.where(mags > 1e-12)[0]
    return int(max((len(idx.words[j]) for j in nz), default=0))


def wandering_ladder(dil: DilationData, M_chain: Sequence[SubspaceBasis],
                     tol: Tolerance = DEFAULT_TOL) -> WanderingLadder:
    T = dil.T
    chain = [SubspaceBasis.zero(T.d)] + list(M_chain) + [SubspaceBasis.full(T.d)]
    for i, M in enumerate(M_chain):
        res = rowcon.invariance_residual(T, M)
        if res > tol.residual_abs:
            raise ChainError(f"subspace {i + 1} is not jointly invariant (residual {res:.3e})")
    for a, b in zip(chain, chain[1:]):
        if not is_contained(a, b, tol):
            raise ChainError("subspace chain is not increasing")
    Kd = dil.K_dim
    Ks, Fs, Rs = [], [], []
    for i, M in enumerate(chain):
        Ni = relative_complement(SubspaceBasis.full(T.d), M, tol)
        Ki = complement(dil.embed_subspace(Ni)) if Ni.rank else SubspaceBasis.full(Kd)
        shifted = orthonormalize(np.hstack([Vj @ Ki.columns for Vj in dil.V]), tol)
        Fi = relative_complement(Ki, shifted, tol)
        Ks.append(Ki)
        Fs.append(Fi)
        Rs.append(SubspaceBasis.zero(Kd))
    # wandering property on words short enough to avoid the truncation
    wres = 0.0
    for Fi in Fs:
        g = _support_grade(Fi.columns, dil.idx, dil.r)
        if Fi.rank:
            X = np.hstack(list(_word_images(dil.V, Fi.columns, dil.N - g).values()))
            wres = max(wres, float(np.linalg.norm(X.conj().T @ X - np.eye(X.shape[1]), 2)))
    inc = max((0.0 if is_contained(a, b, tol) else 1.0) for a, b in zip(Ks, Ks[1:]))
    top = max(subspace_distance(Fs[0], dil.L), subspace_distance(Fs[-1], dil.Lstar))
    return WanderingLadder(chain, Ks, Fs, Rs, wres, inc, top)


def _word_images(ops: Sequence[np.ndarray], X: np.ndarray, max_len: int, adjoint: bool = False):
    """{w: A_w X} for |w| <= max_len, A_w = A_{w_1}...A_{w_k}; with ``adjoint`` A_w* X instead."""
    out = {(): X}
    frontier = [()]
    for _ in range(max(max_len, 0)):
        nxt = []
        for w in frontier:
            for i, A in enumerate(ops, start=1):
                # A_{iw} = A_i A_w, and (A_{wi})* = A_i* A_w*
                key = (w + (i,)) if adjoint else ((i,) + w)
                out[key] = (A.conj().T if adjoint else A) @ out[w]
                nxt.append(key)
        frontier = nxt
    return out


def _symbol_between(dil: DilationData, Fin: SubspaceBasis, Fout: SubspaceBasis) -> MultiAnalyticSymbol:
    """theta_alpha[p, q] = <V_alpha* fin_q, fout_p>."""
    coeffs = {}
    imgs = _word_images(dil.V, Fin.columns, dil.N, adjoint=True)
    for w in dil.idx.words:
        A = Fout.columns.conj().T @ imgs[w]
        if A.size and np.abs(A).max() > COEFF_FLOOR:
            coeffs[w] = np.where(np.abs(A) > COEFF_FLOOR, A, 0)
    return MultiAnalyticSymbol(dil.T.n, Fin.rank, Fout.rank, coeffs)


def extract_factors(dil: DilationData, ladder: WanderingLadder,
                    tol: Tolerance = DEFAULT_TOL) -> FactorizationChain:
    factors = []
    for i in range(1, ladder.k + 1):
        th = _symbol_between(dil, ladder.F[i - 1], ladder.F[i])
        ex = th.coefficient_gram_excess()
        if ex > tol.residual_abs:
            raise NotContractiveError(f"extracted factor {i} is not contractive (excess {ex:.3e})")
        factors.append(th)
    return FactorizationChain(tuple(factors), dil.N, tol)


def char_witness(dil: DilationData, ladder: WanderingLadder):
    """Unitaries from the defect coordinates of T onto the L and L_* bases."""
    T, dd = dil.T, dil.dd
    E = dil.embed
    Y = np.hstack([dil.V[i] @ E - E @ T.T[i] for i in range(T.n)])
    B = dd.defect_space.columns
    U = ladder.F[0].columns.conj().T @ Y @ np.linalg.pinv(dd.D_T, rcond=1e-10) @ B
    e0 = np.zeros((dil.K_dim, dil.r), dtype=complex)
    e0[:dil.r] = np.eye(dil.r)
    V = ladder.F[-1].columns.conj().T @ e0
    return U, V


@dataclass(frozen=True, eq=False)
class ExtractionReport:
    coincidence: CoincidenceVerdict
    regularity: RegularityReport
    all_defects_zero: bool
    passed: bool


def verify_product_and_regularity(chainX: FactorizationChain, dil: DilationData,
                                  ladder: WanderingLadder,
                                  tol: Tolerance = DEFAULT_TOL) -> ExtractionReport:
    theta_T = rowcon.char_function(dil.T, dil.N, tol, dil.dd)
    U, V = char_witness(dil, ladder)
    verdict = coincide(theta_T, chainX.product, tol, witness=(U, V))
    reg = is_k_regular(chainX, tol)
    zero = all(d.range.rank == 0 for d in chainX.defects)
    ok = verdict.ok and reg.regular and zero
    return ExtractionReport(verdict, reg, zero, bool(ok))


@dataclass(frozen=True, eq=False)
class PhiReport:
    Phi: np.ndarray
    H_angle: float
    M_angles: List[float]
    space: ModelSpace


def phi_map(dil: DilationData, ladder: WanderingLadder, chainX: FactorizationChain,
            tol: Tolerance = DEFAULT_TOL, kind: str = "single") -> PhiReport:
    """Phi: V_alpha l -> e_alpha (x) l for l in L_*, compared with the model of chainX."""
    Q = ladder.F[-1].columns[:dil.r]          # L_* lives in the e_empty block
    Phi = np.kron(np.eye(dil.idx.size), Q.conj().T)
    if kind == "single":
        space, _ = build_model(chainX.product, chainX.N, tol)
    else:
        space, _ = build_model_from_chain(chainX, tol)
    pad = space.ambient_dim - space.fock_dim
    if pad:
        Phi = np.vstack([Phi, np.zeros((pad, Phi.shape[1]), dtype=complex)])
    img_H = orthonormalize(Phi @ dil.embed, tol)
    angH = subspace_distance(img_H, space.H)
    ic = invariant_chain_from_factorization(chainX, space, tol)
    angs = []
    for M, Mt in zip(ladder.M[1:-1], ic.M):
        img = orthonormalize(Phi @ dil.embed @ M.columns, tol)
        angs.append(subspace_distance(img, Mt))
    return PhiReport(Phi, angH, angs, space)
