"""Functional models of contractive symbols and their invariant subspace chains.

The model space lives in the coordinates

    (Gamma_N (x) E_*)  (+)  defect coordinates,

with the defect part either the range of Delta_Theta (``kind="single"``) or
the blocks Delta_k, ..., Delta_1 of a factorization (``kind="chain"``).
The graph G = {P_N Theta u (+) Delta u} is removed and the model operators
are the compressions of (S_j* (x) I) (+) C_j*.

For inner polynomial symbols whose model is supported below grade N every
construction here is exact; for other symbols the model depends on N.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from . import freeword as fw
from . import rowcon
from .errors import ChainError
from .manop import (CoincidenceVerdict, MultiAnalyticSymbol, assemble, coincide, defect,
                    purely_contractive_part, row_isometry_C)
from .numsub import (DEFAULT_TOL, SubspaceBasis, Tolerance, complement, is_contained,
                     max_angle_sin, orthonormalize, relative_complement,
                     span_sum, subspace_distance)
from .regfact import FactorizationChain, PartitionSpec, aggregate, divisor_extract, \
    is_k_regular, stacked_Z


@dataclass(frozen=True, eq=False)
class ModelSpace:
    ambient_dim: int
    fock_dim: int                 # dimension of the Gamma_N (x) E_* block
    defect_dims: Tuple[int, ...]  # ranks of the defect blocks, in stored order
    G: SubspaceBasis
    H: SubspaceBasis
    graph_gen: np.ndarray = field(repr=False)   # columns: images of basis vectors u
    kind: str = "single"
    N: int = 0
    n: int = 1
    dimE: int = 0
    dimEstar: int = 0

    @property
    def dim(self) -> int:
        return self.H.rank


@dataclass(frozen=True, eq=False)
class ModelOperators:
    adj: List[np.ndarray]        # T~_j* on H coordinates
    ambient_adj: List[np.ndarray] = field(repr=False)  # (S_j* (x) I) (+) C_j* on the ambient
    leakage: float = 0.0         # how far the ambient operators move H out of itself
    space: Optional[ModelSpace] = field(default=None, repr=False)

    @property
    def T(self) -> List[np.ndarray]:
        return [A.conj().T for A in self.adj]

    def row_contraction(self) -> rowcon.RowContraction:
        return rowcon.make(self.T)

    def row_defect(self) -> float:
        """Largest eigenvalue of sum T_j T_j* minus 1 (<= 0 for a row contraction)."""
        if not self.adj or self.adj[0].size == 0:
            return -1.0
        S = sum(B.conj().T @ B for B in self.adj)
        return float(np.linalg.eigvalsh(0.5 * (S + S.conj().T))[-1] - 1.0)


def _operators(space: ModelSpace, ambient_adj: List[np.ndarray]) -> ModelOperators:
    Q = space.H.columns
    adj, leak = [], 0.0
    for X in ambient_adj:
        Y = X @ Q
        A = Q.conj().T @ Y
        leak = max(leak, float(np.linalg.norm(Y - Q @ A)) if Q.size else 0.0)
        A.setflags(write=False)
        X.setflags(write=False)
        adj.append(A)
    return ModelOperators(adj, ambient_adj, leak, space)


def build_model(sym: MultiAnalyticSymbol, N: int, tol: Tolerance = DEFAULT_TOL
                ) -> Tuple[ModelSpace, ModelOperators]:
    return _build_model(sym, N, tol)


@functools.lru_cache(maxsize=32)
def _build_model(sym: MultiAnalyticSymbol, N: int, tol: Tolerance):
    idx = fw.enumerate_words(sym.n, N)
    M = assemble(sym, N).matrix
    dfct = defect(sym, N, tol)
    B = dfct.range
    gen = np.vstack([M, B.coords(dfct.delta)])
    gen.setflags(write=False)
    G = orthonormalize(gen, tol)
    fock = idx.size * sym.dimEstar
    space = ModelSpace(fock + B.rank, fock, (B.rank,), G, complement(G), gen, "single",
                       N, sym.n, sym.dimE, sym.dimEstar)
    C = row_isometry_C(sym, N, tol, dfct) if B.rank else None
    amb = []
    for j in range(1, sym.n + 1):
        Sj = fw.ampliate(fw.creation_matrix(j, idx), sym.dimEstar)
        blocks = [Sj.conj().T]
        if B.rank:
            blocks.append(C.C[j - 1].conj().T)
        amb.append(sla.block_diag(*blocks))
    return space, _operators(space, amb)


def build_model_from_chain(chain: FactorizationChain, tol: Optional[Tolerance] = None
                           ) -> Tuple[ModelSpace, ModelOperators]:
    """Model on (Gamma_N (x) E_{k+1}) (+) Delta_k-range (+) ... (+) Delta_1-range."""
    tol = tol or chain.tol
    sz = stacked_Z(chain, tol)
    M = chain.partial(1, chain.k)
    gen = np.vstack([M, sz.W])
    gen.setflags(write=False)
    G = orthonormalize(gen, tol)
    fock = chain.idx.size * chain.dims[-1]
    ranks = tuple(d.range.rank for d in reversed(chain.defects))
    space = ModelSpace(fock + sum(ranks), fock, ranks, G, complement(G), gen, "chain",
                       chain.N, chain.n, chain.dims[0], chain.dims[-1])
    Cs = [row_isometry_C(f, chain.N, tol, d) if d.range.rank else None
          for f, d in zip(chain.factors, chain.defects)]
    amb = []
    for j in range(1, chain.n + 1):
        Sj = fw.ampliate(fw.creation_matrix(j, chain.idx), chain.dims[-1])
        blocks = [Sj.conj().T]
        for i in range(chain.k, 0, -1):
            if Cs[i - 1] is not None:
                blocks.append(Cs[i - 1].C[j - 1].conj().T)
        amb.append(sla.block_diag(*blocks))
    return space, _operators(space, amb)


# ---------------------------------------------------------------- invariant chains

@dataclass(frozen=True, eq=False)
class InvariantChain:
    M: List[SubspaceBasis]      # M~_1, ..., M~_{k-1}
    Ncomp: List[SubspaceBasis]  # N~_1, ..., N~_{k-1}
    regular: bool = True
    informational: bool = False

    def extended(self, H: SubspaceBasis) -> List[SubspaceBasis]:
        """[0, M~_1, ..., M~_{k-1}, H]."""
        return [SubspaceBasis.zero(H.ambient_dim)] + list(self.M) + [H]


def _lift(space: ModelSpace, chain: FactorizationChain, stacked: np.ndarray, Z: Optional[np.ndarray]):
    """Map stacked defect coordinates into the model's defect block."""
    if space.kind == "chain":
        return stacked
    if Z is None or Z.size == 0:
        return np.zeros((sum(space.defect_dims), stacked.shape[1]), dtype=complex)
    return Z.conj().T @ stacked


def _stack_from(chain: FactorizationChain, start: int) -> np.ndarray:
    """Rows (order k..1) of Delta_j Theta_{j-1}...Theta_start u for j >= start, zeros below."""
    rows = []
    m = chain.dims[start - 1] * chain.idx.size
    for j in range(chain.k, 0, -1):
        d = chain.defects[j - 1]
        if not d.range.rank:
            continue
        if j >= start:
            rows.append(d.range.coords(d.delta @ chain.partial(start, j - 1)))
        else:
            rows.append(np.zeros((d.range.rank, m), dtype=complex))
    return np.vstack(rows) if rows else np.zeros((0, m), dtype=complex)


def _block_units(chain: FactorizationChain, which) -> np.ndarray:
    """Columns spanning the stacked defect blocks j in ``which``."""
    sizes = [(j, chain.defects[j - 1].range.rank) for j in range(chain.k, 0, -1)
             if chain.defects[j - 1].range.rank]
    total = sum(s for _, s in sizes)
    cols, off = [], 0
    for j, s in sizes:
        if j in which:
            E = np.zeros((total, s), dtype=complex)
            E[off:off + s] = np.eye(s)
            cols.append(E)
        off += s
    return np.hstack(cols) if cols else np.zeros((total, 0), dtype=complex)


def chain_generators(chain: FactorizationChain, space: ModelSpace, i: int,
                     Z: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Generators of M~_i before removing G: the u-part and the free v-part."""
    Phi = chain.partial(i + 1, chain.k)
    ugen = np.vstack([Phi, _lift(space, chain, _stack_from(chain, i + 1), Z)])
    V = _block_units(chain, set(range(1, i + 1)))
    vgen = np.vstack([np.zeros((space.fock_dim, V.shape[1]), dtype=complex),
                      _lift(space, chain, V, Z)])
    return ugen, vgen


def invariant_chain_from_factorization(chain: FactorizationChain, space: ModelSpace,
                                       tol: Optional[Tolerance] = None) -> InvariantChain:
    return _invariant_chain(chain, space, tol or chain.tol)


@functools.lru_cache(maxsize=32)
def _invariant_chain(chain: FactorizationChain, space: ModelSpace, tol: Tolerance) -> InvariantChain:
    regular = is_k_regular(chain, tol, pairs=False).regular
    Z = stacked_Z(chain, tol).Z if space.kind == "single" else None
    Ms, Ns = [], []
    for i in range(1, chain.k):
        ugen, vgen = chain_generators(chain, space, i, Z)
        span = orthonormalize(np.hstack([ugen, vgen]), tol)
        Ms.append(relative_complement(span, space.G, Tolerance(tol.rank_rel, tol.residual_abs, 1e-6)))
        # N~_i: [Gamma (x) E_* (+) blocks k..i+1] minus the u-generators
        V_hi = _block_units(chain, set(range(i + 1, chain.k + 1)))
        amb = np.hstack([
            np.vstack([np.eye(space.fock_dim), np.zeros((sum(space.defect_dims), space.fock_dim))]),
            np.vstack([np.zeros((space.fock_dim, V_hi.shape[1])), _lift(space, chain, V_hi, Z)]),
        ])
        Ns.append(relative_complement(orthonormalize(amb, tol), orthonormalize(ugen, tol), tol))
    return InvariantChain(Ms, Ns, regular, not regular)


@dataclass(frozen=True)
class ChainReport:
    invariance: Tuple[float, ...]        # per M~_i, max_j residual under T~_j
    co_invariance: Tuple[float, ...]     # per N~_i, under T~_j*
    inclusions: Tuple[bool, ...]
    decomposition_angle: Tuple[float, ...]
    passed: bool
    informational: bool

    @property
    def max_invariance(self) -> float:
        return max(self.invariance, default=0.0)

    @property
    def max_angle(self) -> float:
        return max(self.decomposition_angle, default=0.0)


def _restricted_residual(ops: ModelOperators, S: SubspaceBasis, adjoint: bool) -> float:
    """max_j |(I - P_S) X_j P_S| with X_j = T~_j (or T~_j*), S given in ambient coordinates."""
    if S.rank == 0:
        return 0.0
    Q = ops.space.H.columns
    s = Q.conj().T @ S.columns
    worst = 0.0
    for A in ops.adj:
        X = A if adjoint else A.conj().T
        Y = X @ s
        worst = max(worst, float(np.linalg.norm(Y - s @ (s.conj().T @ Y), 2)))
    return worst


def verify_chain(ops: ModelOperators, ch: InvariantChain, tol: Tolerance = DEFAULT_TOL) -> ChainReport:
    H = ops.space.H
    inv, coinv, inc, ang = [], [], [], []
    for i, (M, Nc) in enumerate(zip(ch.M, ch.Ncomp)):
        inv.append(_restricted_residual(ops, M, adjoint=False))
        coinv.append(_restricted_residual(ops, Nc, adjoint=True))
        ok = is_contained(M, H, tol)
        if i + 1 < len(ch.M):
            ok = ok and is_contained(M, ch.M[i + 1], tol)
        inc.append(bool(ok))
        orth = float(np.linalg.norm(M.columns.conj().T @ Nc.columns, 2)) if M.rank and Nc.rank else 0.0
        total = span_sum(M, Nc)
        ang.append(max(orth, subspace_distance(total, H)))
    passed = (all(r <= tol.residual_abs for r in inv + coinv) and all(inc)
              and all(a <= tol.angle for a in ang))
    return ChainReport(tuple(inv), tuple(coinv), tuple(inc), tuple(ang), bool(passed), ch.informational)


@dataclass(frozen=True)
class CollapseReport:
    equal: bool
    dim_gap: int
    angle: float
    unitary_constant: bool
    consistent: bool


def unitary_constant_collapse(chain: FactorizationChain, i: int, tol: Optional[Tolerance] = None,
                              model=None) -> CollapseReport:
    """Compare M~_i with M~_{i+1} (M~_0 = 0, M~_k = H) against Theta_{i+1} being a unitary constant."""
    tol = tol or chain.tol
    space, _ = model or build_model(chain.product, chain.N, tol)
    ic = invariant_chain_from_factorization(chain, space, tol)
    ext = ic.extended(space.H)
    a, b = ext[i], ext[i + 1]
    gap = b.rank - a.rank
    eq = gap == 0 and subspace_distance(a, b) <= tol.angle
    f = chain.factors[i]
    pd = purely_contractive_part(f, tol)
    unit = pd.pure_part.dimE == 0 and pd.pure_part.dimEstar == 0
    return CollapseReport(bool(eq), int(gap), subspace_distance(a, b), bool(unit), bool(eq == unit))


def aggregation_subspace_check(chain: FactorizationChain, p: PartitionSpec,
                               tol: Optional[Tolerance] = None, model=None) -> Tuple[bool, float]:
    """M~ of the aggregated chain at block i equals the original M~ at breakpoint j_i."""
    tol = tol or chain.tol
    space, _ = model or build_model(chain.product, chain.N, tol)
    orig = invariant_chain_from_factorization(chain, space, tol)
    agg = invariant_chain_from_factorization(aggregate(chain, p), space, tol)
    worst = 0.0
    for i, j in enumerate(p.breakpoints[:-1]):
        A, B = agg.M[i], orig.M[j - 1]
        if A.rank != B.rank:
            return False, 1.0
        worst = max(worst, subspace_distance(A, B))
    return worst <= tol.angle, worst


@dataclass(frozen=True)
class InclusionReport:
    contained: bool
    angle: float
    dims: Tuple[int, int]
    divisor_ok: Optional[bool]


def divisor_inclusion_check(factA: Tuple[MultiAnalyticSymbol, MultiAnalyticSymbol],
                            factB: Tuple[MultiAnalyticSymbol, MultiAnalyticSymbol],
                            N: int, tol: Tolerance = DEFAULT_TOL, model=None) -> InclusionReport:
    """factA = (Theta_2, Theta_1), factB = (Theta'_2, Theta'_1), same product.

    Builds M from A and M' from B in the model of the product and tests
    M inside M'; when contained, the divisor Omega must exist.
    """
    chA = FactorizationChain((factA[1], factA[0]), N, tol)
    chB = FactorizationChain((factB[1], factB[0]), N, tol)
    if chA.product.max_diff(chB.product) > tol.residual_abs:
        raise ChainError("the two factorizations have different products")
    space, _ = model or build_model(chA.product, N, tol)
    M = invariant_chain_from_factorization(chA, space, tol).M[0]
    Mp = invariant_chain_from_factorization(chB, space, tol).M[0]
    contained = is_contained(M, Mp, tol)
    div = None
    if contained:
        div = divisor_extract(factA[1], factB[1], tol, outer=(factA[0], factB[0])).ok
    return InclusionReport(bool(contained), max_angle_sin(M, Mp), (M.rank, Mp.rank), div)


# ---------------------------------------------------------------- round trip

def natural_witness(space: ModelSpace, ops: ModelOperators, T: rowcon.RowContraction,
                    dd: rowcon.DefectData, sym_pure_dom: np.ndarray, sym_pure_codom: np.ndarray,
                    e0_cols: int):
    """Unitaries identifying the defect spaces of the model tuple with the symbol's spaces.

    D_{T*} h goes to the e_empty component of h; D_T (h_1..h_n) goes to the
    x with (Theta x (+) Delta x) = sum_j (V_j - T_j) h_j.
    """
    Q = space.H.columns
    n, d = T.n, T.d
    # V: D_{T*} coordinates -> E_* coordinates
    Bs = dd.defect_space_star.columns
    hs = np.linalg.pinv(dd.D_Tstar, rcond=1e-10) @ Bs
    y = (Q @ hs)[:e0_cols]
    V = sym_pure_codom.conj().T @ y
    # U: D_T coordinates -> E coordinates
    B = dd.defect_space.columns
    h = np.linalg.pinv(dd.D_T, rcond=1e-10) @ B
    l = np.zeros((space.ambient_dim, B.shape[1]), dtype=complex)
    for j in range(n):
        hj = h[j * d:(j + 1) * d]
        Vj = ops.ambient_adj[j].conj().T
        l += Vj @ (Q @ hj) - Q @ (T.T[j] @ hj)
    G0 = space.graph_gen[:, :space.dimE]
    x = np.linalg.lstsq(G0, l, rcond=None)[0]
    U = sym_pure_dom.conj().T @ x
    return U, V


@dataclass(frozen=True, eq=False)
class RoundTrip:
    verdict: CoincidenceVerdict
    model_dim: int
    char: Optional[MultiAnalyticSymbol]
    pure: MultiAnalyticSymbol


def model_char_roundtrip(sym: MultiAnalyticSymbol, N: int, tol: Tolerance = DEFAULT_TOL,
                         model=None) -> RoundTrip:
    space, ops = model or build_model(sym, N, tol)
    pdcmp = purely_contractive_part(sym, tol)
    pure = pdcmp.pure_part
    if space.dim == 0:
        empty = pure.dimE == 0 and pure.dimEstar == 0
        z = np.zeros((0, 0), dtype=complex)
        v = CoincidenceVerdict("witness" if empty else "fail", 0.0 if empty else np.inf, z, z,
                               "empty model")
        return RoundTrip(v, 0, None, pure)
    T = rowcon.make(ops.T)
    dd = rowcon.defects(T, tol)
    char = rowcon.char_function(T, N, tol, dd)
    U, V = natural_witness(space, ops, T, dd, pdcmp.pure_dom.columns, pdcmp.pure_codom.columns,
                           sym.dimEstar)
    v = coincide(char, pure, tol, witness=(U, V))
    if not v.ok:
        v = coincide(char, pure, tol, seed=(U, V))
    return RoundTrip(v, space.dim, char, pure)


def model_dimension_curve(sym: MultiAnalyticSymbol, Ns: Sequence[int],
                          tol: Tolerance = DEFAULT_TOL) -> List[Tuple[int, int]]:
    """(N, dim H) pairs; flat for inner symbols whose model fits below N."""
    return [(N, build_model(sym, N, tol)[0].dim) for N in Ns]
