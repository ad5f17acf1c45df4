"""Stacked defect maps, k-regularity, partitions and regular divisors.

For a chain Theta = Theta_k ... Theta_1 the stacked map sends Delta_Theta f to

    Delta_k Theta_{k-1}...Theta_1 f (+) ... (+) Delta_2 Theta_1 f (+) Delta_1 f,

always isometric; the chain is k-regular when it is also onto.  Block order
in every stacked vector is k, k-1, ..., 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from . import freeword as fw
from .errors import ChainError, ConsistencyError
from .manop import (Defect, MultiAnalyticSymbol, assemble, defect, multiply, multiply_chain,
                    row_isometry_C)
from .numsub import DEFAULT_TOL, SubspaceBasis, Tolerance, rank_report


@dataclass(frozen=True, eq=False)
class FactorizationChain:
    """Factors in application order [Theta_1, ..., Theta_k] at truncation N."""

    factors: Tuple[MultiAnalyticSymbol, ...]
    N: int
    tol: Tolerance = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self):
        fs = tuple(self.factors)
        if not fs:
            raise ChainError("empty chain")
        for a, b in zip(fs, fs[1:]):
            if a.dimEstar != b.dimE or a.n != b.n:
                raise ChainError(f"factors do not compose: C^{a.dimEstar} -> C^{b.dimE}")
        for f in fs:
            f.check_contractive_witness()
        object.__setattr__(self, "factors", fs)

    @property
    def k(self) -> int:
        return len(self.factors)

    @property
    def n(self) -> int:
        return self.factors[0].n

    @property
    def dims(self) -> List[int]:
        """[dim E_1, ..., dim E_{k+1}]."""
        return [f.dimE for f in self.factors] + [self.factors[-1].dimEstar]

    @cached_property
    def product(self) -> MultiAnalyticSymbol:
        return multiply_chain(self.factors)

    @property
    def total_degree(self) -> int:
        return sum(f.degree for f in self.factors)

    @cached_property
    def idx(self):
        return fw.enumerate_words(self.n, self.N)

    @cached_property
    def mats(self) -> List[np.ndarray]:
        return [assemble(f, self.N).matrix for f in self.factors]

    @cached_property
    def defects(self) -> List[Defect]:
        return [defect(f, self.N, self.tol) for f in self.factors]

    @cached_property
    def product_defect(self) -> Defect:
        return defect(self.product, self.N, self.tol)

    def partial(self, i: int, j: int) -> np.ndarray:
        """Theta_j ... Theta_i (1-based, inclusive) as a square truncation; identity if j < i."""
        m = self.dims[i - 1]
        out = np.eye(self.idx.size * m, dtype=complex)
        for t in range(i, j + 1):
            out = self.mats[t - 1] @ out
        return out

    def interior(self, slack: int = 0, start: int = 1) -> np.ndarray:
        """Column mask on Gamma_N (x) E_start of grades <= N - (degrees from start on) - slack."""
        deg = sum(f.degree for f in self.factors[start - 1:])
        return fw.interior_mask(self.idx, self.dims[start - 1], self.N - deg - slack)

    def sub(self, i: int, j: int) -> "FactorizationChain":
        return FactorizationChain(self.factors[i - 1:j], self.N, self.tol)


def make_chain(factors: Sequence[MultiAnalyticSymbol], N: int,
               tol: Tolerance = DEFAULT_TOL) -> FactorizationChain:
    return FactorizationChain(tuple(factors), N, tol)


@dataclass(frozen=True)
class PartitionSpec:
    breakpoints: Tuple[int, ...]

    def __post_init__(self):
        b = tuple(int(x) for x in self.breakpoints)
        if not b or b[0] < 1 or any(x >= y for x, y in zip(b, b[1:])):
            raise ValueError(f"breakpoints must be strictly increasing and >= 1: {b}")
        object.__setattr__(self, "breakpoints", b)

    def blocks(self, k: int) -> List[Tuple[int, int]]:
        if self.breakpoints[-1] != k:
            raise ValueError(f"last breakpoint must equal k={k}")
        lo, out = 1, []
        for b in self.breakpoints:
            out.append((lo, b))
            lo = b + 1
        return out


def all_partitions(k: int) -> List[PartitionSpec]:
    out = []
    for r in range(k):
        for cut in combinations(range(1, k), r):
            out.append(PartitionSpec(tuple(cut) + (k,)))
    return out


# ---------------------------------------------------------------- stacked map

@dataclass(frozen=True, eq=False)
class StackedZ:
    W: np.ndarray                 # stacked coordinates of all basis vectors f
    domain: SubspaceBasis         # range of Delta_Theta
    codomain_blocks: List[SubspaceBasis]  # defect ranges, order k..1
    Z: np.ndarray                 # matrix on domain coordinates
    isometry_residual: float
    interior: np.ndarray

    def __iter__(self):
        return iter((self.W, self.domain, self.codomain_blocks))


def stacked_W(chain: FactorizationChain) -> np.ndarray:
    """Rows: coordinates of Delta_i Theta_{i-1}...Theta_1 f in the range basis of Delta_i."""
    rows = []
    for i in range(chain.k, 0, -1):
        d = chain.defects[i - 1]
        if d.range.rank:
            rows.append(d.range.coords(d.delta @ chain.partial(1, i - 1)))
    m = chain.dims[0] * chain.idx.size
    return np.vstack(rows) if rows else np.zeros((0, m), dtype=complex)


def stacked_Z(chain: FactorizationChain, tol: Optional[Tolerance] = None) -> StackedZ:
    tol = tol or chain.tol
    W = stacked_W(chain)
    pd = chain.product_defect
    A = pd.range.coords(pd.delta)
    mask = chain.interior()
    Wi, Ai = W[:, mask], A[:, mask]
    G1 = Wi.conj().T @ Wi
    G2 = Ai.conj().T @ Ai
    res = float(np.abs(G1 - G2).max(initial=0.0))
    if res > max(tol.residual_abs, 1e-8):
        raise ConsistencyError(f"stacked map is not isometric (residual {res:.3e}); "
                               "truncation likely too small")
    if Ai.size and W.shape[0]:
        Z = Wi @ np.linalg.pinv(Ai, rcond=tol.rank_rel)
    else:
        Z = np.zeros((W.shape[0], pd.range.rank), dtype=complex)
    blocks = [chain.defects[i - 1].range for i in range(chain.k, 0, -1)]
    return StackedZ(W, pd.range, blocks, Z, res, mask)


def verify_isometry_identity(chain: FactorizationChain) -> float:
    """max_i |Phi_i* Phi_i + Lambda_i* Lambda_i - I| on interior grades.

    Phi_i = Theta_k...Theta_i and Lambda_i stacks Delta_j Theta_{j-1}...Theta_i, j >= i.
    """
    worst = 0.0
    for i in range(1, chain.k + 1):
        Phi = chain.partial(i, chain.k)
        G = Phi.conj().T @ Phi
        for j in range(i, chain.k + 1):
            X = chain.defects[j - 1].delta @ chain.partial(i, j - 1)
            G = G + X.conj().T @ X
        mask = chain.interior(start=i)
        if mask.any():
            R = G[np.ix_(mask, mask)] - np.eye(int(mask.sum()))
            worst = max(worst, float(np.linalg.norm(R, 2)))
    return worst


@dataclass(frozen=True)
class RegularityReport:
    isometry_residual: float
    rank_W: int
    sum_rank_Delta_i: int
    regular: bool
    per_pair: Tuple[bool, ...]
    indeterminate: bool

    @property
    def pairwise_consistent(self) -> bool:
        return all(p == self.regular for p in self.per_pair) if self.per_pair else True


def is_k_regular(chain: FactorizationChain, tol: Optional[Tolerance] = None,
                 pairs: bool = True) -> RegularityReport:
    """Regular iff rank of the stacked map equals the sum of the defect ranks."""
    tol = tol or chain.tol
    sz = stacked_Z(chain, tol)
    r, border = rank_report(sz.W, tol) if sz.W.size else (0, False)
    total = sum(d.range.rank for d in chain.defects)
    border = border or any(d.indeterminate for d in chain.defects)
    per = []
    if pairs and chain.k > 1:
        for j in range(1, chain.k):
            two = split_pair(chain, j)
            per.append(is_k_regular(two, tol, pairs=False).regular)
    return RegularityReport(sz.isometry_residual, int(r), int(total), bool(r == total),
                            tuple(per), bool(border))


def split_pair(chain: FactorizationChain, j: int) -> FactorizationChain:
    """(Theta_k...Theta_{j+1}) (Theta_j...Theta_1) as a 2-chain."""
    lo = multiply_chain(chain.factors[:j])
    hi = multiply_chain(chain.factors[j:])
    return FactorizationChain((lo, hi), chain.N, chain.tol)


def aggregate(chain: FactorizationChain, p: PartitionSpec) -> FactorizationChain:
    parts = [multiply_chain(chain.factors[a - 1:b]) for a, b in p.blocks(chain.k)]
    return FactorizationChain(tuple(parts), chain.N, chain.tol)


@dataclass(frozen=True)
class PartitionVerdict:
    full: bool          # k-regularity of the chain
    aggregate_and_parts: bool  # r-regular aggregate and every block regular
    witness: bool       # the supplied partition witnesses the previous item
    consistent: bool


def check_partition_equivalence(chain: FactorizationChain, p: PartitionSpec,
                                tol: Optional[Tolerance] = None) -> PartitionVerdict:
    tol = tol or chain.tol
    full = is_k_regular(chain, tol, pairs=False).regular
    agg = is_k_regular(aggregate(chain, p), tol, pairs=False).regular
    parts = all(is_k_regular(chain.sub(a, b), tol, pairs=False).regular
                for a, b in p.blocks(chain.k))
    second = agg and parts
    return PartitionVerdict(full, second, second, full == second)


def z_decomposition_check(chain: FactorizationChain, p: PartitionSpec,
                          tol: Optional[Tolerance] = None) -> float:
    """Residual of Z_k = (direct sum of Z_{|J_i|}) Z_r on interior data."""
    tol = tol or chain.tol
    blocks = p.blocks(chain.k)
    agg = aggregate(chain, p)
    Wk = stacked_W(chain)
    mask = chain.interior()
    pieces = []
    # Z_r lists Delta_{Psi_r}... first; sub-chain i contributes its own stacked map
    for i in range(len(blocks), 0, -1):
        a, b = blocks[i - 1]
        sub = chain.sub(a, b)
        dpsi = agg.defects[i - 1]
        g = agg.partial(1, i - 1)
        if sub.k == 1:
            coords = dpsi.range.coords(dpsi.delta @ g)
            pieces.append(coords)
            continue
        szi = stacked_Z(sub, tol)
        if dpsi.range.rank == 0:
            pieces.append(np.zeros((szi.W.shape[0], g.shape[1]), dtype=complex))
            continue
        # same range basis as sub's product defect (same symbol, same truncation)
        coords = szi.domain.coords(sub.product_defect.delta @ g)
        pieces.append(szi.Z @ coords)
    right = np.vstack(pieces) if pieces else np.zeros_like(Wk)
    if not mask.any() or right.size == 0:
        return 0.0
    return float(np.abs(Wk[:, mask] - right[:, mask]).max(initial=0.0))


def intertwine_check(chain: FactorizationChain, tol: Optional[Tolerance] = None) -> float:
    """max_j residual of Z_k C_j = diag(C_j^(k), ..., C_j^(1)) Z_k on interior data."""
    tol = tol or chain.tol
    sz = stacked_Z(chain, tol)
    if sz.W.shape[0] == 0 or sz.domain.rank == 0:
        return 0.0
    Cth = row_isometry_C(chain.product, chain.N, tol, chain.product_defect)
    Cf = [row_isometry_C(f, chain.N, tol, d) for f, d in zip(chain.factors, chain.defects)]
    pd = chain.product_defect
    A = pd.range.coords(pd.delta)
    mask = chain.interior(slack=1)
    worst = 0.0
    for j in range(chain.n):
        left = sz.Z @ Cth.C[j] @ A[:, mask]
        diag = sla.block_diag(*[Cf[i - 1].C[j] for i in range(chain.k, 0, -1)
                                if chain.defects[i - 1].range.rank])
        right = diag @ sz.W[:, mask]
        worst = max(worst, float(np.abs(left - right).max(initial=0.0)))
    return worst


# ---------------------------------------------------------------- divisors

@dataclass(frozen=True, eq=False)
class DivisorResult:
    omega: MultiAnalyticSymbol
    residual_left: float          # |Omega Theta_1 - Theta'_1|
    residual_right: Optional[float]  # |Theta'_2 Omega - Theta_2| when supplied
    nullspace_dim: int
    contractive_excess: float
    ok: bool


def divisor_extract(theta1: MultiAnalyticSymbol, theta1p: MultiAnalyticSymbol,
                    tol: Tolerance = DEFAULT_TOL,
                    outer: Optional[Tuple[MultiAnalyticSymbol, MultiAnalyticSymbol]] = None,
                    degree: Optional[int] = None) -> DivisorResult:
    """Minimum-norm solution Omega of Theta'_1 = Omega Theta_1.

    ``outer = (Theta_2, Theta'_2)`` adds the equations Theta_2 = Theta'_2 Omega
    to the same least-squares system.
    """
    n = theta1.n
    if theta1.dimE != theta1p.dimE:
        raise ValueError("divisor candidates must share the domain space")
    q, p = theta1.dimEstar, theta1p.dimEstar
    D = theta1p.degree if degree is None else degree
    if outer is not None and degree is None:
        D = min(D, outer[0].degree)
    unk = list(fw.enumerate_words(n, D).words)
    upos = {w: i for i, w in enumerate(unk)}
    nv = p * q
    rows, rhs = [], []

    def block_eq(gamma_terms, target):
        # gamma_terms: list of (beta, L, R) meaning L @ Omega_beta @ R
        Arow = np.zeros((target.size, nv * len(unk)), dtype=complex)
        for beta, L, R in gamma_terms:
            # vec(L X R) = (R^T kron L) vec(X), column-major vec
            j = upos[beta]
            Arow[:, j * nv:(j + 1) * nv] += np.kron(R.T, L)
        rows.append(Arow)
        rhs.append(target.reshape(-1, order="F"))

    top = D + theta1.degree
    for gamma in fw.enumerate_words(n, top).words:
        terms = []
        for s in range(len(gamma) + 1):
            alpha, beta = gamma[:s], gamma[s:]
            if beta in upos and alpha in theta1.coeffs:
                terms.append((beta, np.eye(p), theta1.coeffs[alpha]))
        if terms or gamma in theta1p.coeffs:
            block_eq(terms, theta1p.coeff(gamma))
    if outer is not None:
        th2, th2p = outer
        if th2p.dimE != p or th2.dimE != q or th2.dimEstar != th2p.dimEstar:
            raise ValueError("outer factors have incompatible dimensions")
        top2 = D + th2p.degree
        for gamma in fw.enumerate_words(n, max(top2, th2.degree)).words:
            terms = []
            for s in range(len(gamma) + 1):
                beta, delta = gamma[:s], gamma[s:]
                if beta in upos and delta in th2p.coeffs:
                    terms.append((beta, th2p.coeffs[delta], np.eye(q)))
            if terms or gamma in th2.coeffs:
                block_eq(terms, th2.coeff(gamma))
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    x, _, rk, _ = np.linalg.lstsq(A, b, rcond=tol.rank_rel)
    coeffs = {w: x[i * nv:(i + 1) * nv].reshape((p, q), order="F") for i, w in enumerate(unk)}
    coeffs = {w: C for w, C in coeffs.items() if np.abs(C).max() > 1e-13}
    omega = MultiAnalyticSymbol(n, q, p, coeffs)
    rl = multiply(omega, theta1).max_diff(theta1p)
    rr = None
    if outer is not None:
        rr = multiply(outer[1], omega).max_diff(outer[0])
    excess = omega.coefficient_gram_excess()
    ok = rl <= tol.residual_abs and (rr is None or rr <= tol.residual_abs) and excess <= 1e-8
    return DivisorResult(omega, rl, rr, int(A.shape[1] - rk), excess, bool(ok))


def divisor_regularity_check(theta1: MultiAnalyticSymbol, omega: MultiAnalyticSymbol, N: int,
                             tol: Tolerance = DEFAULT_TOL) -> bool:
    """2-regularity of Omega Theta_1."""
    return is_k_regular(FactorizationChain((theta1, omega), N, tol), tol, pairs=False).regular


def constant_regularity_oracle(mats: Sequence[np.ndarray], tol: Tolerance = DEFAULT_TOL) -> bool:
    """Regularity of constant factors A_1..A_k decided on C^m alone.

    Stacks D_{A_j} A_{j-1}...A_1 for j = k..1 and compares its rank with
    the sum of the defect ranks; ranks are read off Gram matrices.
    """
    m = mats[0].shape[1]
    P = np.eye(m, dtype=complex)
    blocks, total = [], 0
    for A in mats:
        G = np.eye(A.shape[1]) - A.conj().T @ A
        w, V = np.linalg.eigh(0.5 * (G + G.conj().T))
        keep = w > tol.cutoff(max(float(w[-1]), 0.0))
        total += int(keep.sum())
        D = (V[:, keep] * np.sqrt(w[keep])) @ V[:, keep].conj().T
        blocks.append(D @ P)
        P = A @ P
    W = np.vstack(blocks[::-1])
    g = np.linalg.eigvalsh(W.conj().T @ W)
    r = int(np.sum(g > tol.cutoff(max(float(g[-1]), 0.0)))) if g.size else 0
    return r == total
