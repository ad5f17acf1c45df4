"""Upper triangular block form of a model tuple along an invariant chain.

With H_1 = M~_1, H_i = M~_i - M~_{i-1} and H_k = H - M~_{k-1}, each T~_j has
zero blocks below the diagonal.  The diagonal compressions A^i are compared
with the model tuple of the i-th factor through the explicit unitaries

    U_i : Phi_{i+1} f (+) Z*(Lambda_{i+1} f (+) g (+) 0)  ->  f (+) g.
"""
from __future__ import annotations

import csv
import dataclasses
import io
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import rowcon
from .errors import ChainError
from .fmodel import (ChainReport, InvariantChain, ModelOperators, ModelSpace, _block_units,
                     _lift, _stack_from, build_model, natural_witness, verify_chain)
from .manop import CoincidenceVerdict, coincide, purely_contractive_part, szego_check, _polar
from .numsub import (DEFAULT_TOL, SubspaceBasis, Tolerance, relative_complement, span_sum,
                     subspace_distance)
from .regfact import FactorizationChain, stacked_Z


@dataclass(frozen=True, eq=False)
class TriangularDecomposition:
    H_parts: List[SubspaceBasis]            # in H coordinates; zero-dimensional parts kept
    labels: List[int]                       # 1-based factor index of every nonzero part
    blocks: List[List[List[np.ndarray]]] = field(repr=False)  # blocks[j][a][b], nonzero parts only
    below_diagonal: float
    sum_angle: float
    ops: ModelOperators = field(repr=False)
    diag_unitaries: List[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def k(self) -> int:
        return len(self.H_parts)

    @property
    def dropped(self) -> List[int]:
        return [i + 1 for i, P in enumerate(self.H_parts) if P.rank == 0]

    def diagonal(self, i: int) -> List[np.ndarray]:
        """A^i_j for j = 1..n (empty matrices for a dropped part)."""
        P = self.H_parts[i - 1]
        return [P.columns.conj().T @ T @ P.columns for T in self.ops.T]

    def norm_grid(self) -> np.ndarray:
        """grid[a, b] = max_j |A_j^{ab}| over the nonzero parts."""
        m = len(self.labels)
        g = np.zeros((m, m))
        for per_j in self.blocks:
            for a in range(m):
                for b in range(m):
                    B = per_j[a][b]
                    if B.size:
                        g[a, b] = max(g[a, b], float(np.linalg.norm(B, 2)))
        return g

    def grid_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["op", "row_part", "col_part", "norm"])
        for j, per_j in enumerate(self.blocks, start=1):
            for a, la in enumerate(self.labels):
                for b, lb in enumerate(self.labels):
                    B = per_j[a][b]
                    w.writerow([j, la, lb, repr(float(np.linalg.norm(B, 2)) if B.size else 0.0)])
        return buf.getvalue()


def triangularize(ops: ModelOperators, chain: InvariantChain, tol: Tolerance = DEFAULT_TOL,
                  report: Optional[ChainReport] = None, strict: bool = True) -> TriangularDecomposition:
    """Block matrices of the model tuple in the parts H_i = M~_i minus M~_{i-1}.

    With ``strict=False`` a chain that fails verification is decomposed anyway,
    for diagnostics; the residuals then say how far it is from triangular.
    """
    report = report or verify_chain(ops, chain, tol)
    if strict and not report.passed:
        raise ChainError("invariant chain failed verification; refusing to triangularize")
    H = ops.space.H
    Q = H.columns
    ext = chain.extended(H)
    parts = []
    for lo, hi in zip(ext, ext[1:]):
        D = relative_complement(hi, lo, tol) if lo.rank else hi
        parts.append(SubspaceBasis(H.rank, Q.conj().T @ D.columns))
    labels = [i + 1 for i, P in enumerate(parts) if P.rank]
    live = [parts[i - 1].columns for i in labels]
    blocks, worst = [], 0.0
    for T in ops.T:
        grid = [[Pa.conj().T @ T @ Pb for Pb in live] for Pa in live]
        for a in range(len(live)):
            for b in range(a):
                worst = max(worst, float(np.linalg.norm(grid[a][b], 2)))
        blocks.append(grid)
    dims = sum(P.rank for P in parts)
    if dims != H.rank:
        angle = 1.0
    else:
        angle = subspace_distance(span_sum(*parts, tol=tol), SubspaceBasis.full(H.rank)) if dims else 0.0
    return TriangularDecomposition(parts, labels, blocks, worst, angle, ops)


# ---------------------------------------------------------------- diagonal blocks

@dataclass(frozen=True, eq=False)
class BlockUnitary:
    index: int
    U: np.ndarray = field(repr=False)        # H_i coordinates -> H(Theta_i) coordinates
    dims: Tuple[int, int]
    unitarity: float
    containment: float                       # how far the case-formula images leave H_i
    intertwining: float                      # max_j |U A_j^{i*} U* - T_{Theta_i, j}*|
    szego: bool
    verdict: str                             # "verified" | "failed" | "hypothesis unmet"
    model: Optional[Tuple[ModelSpace, ModelOperators]] = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.verdict == "verified"


def _case_images(chain: FactorizationChain, space: ModelSpace, i: int, Z, x: np.ndarray,
                 fock_i: int) -> np.ndarray:
    """Ambient images of model vectors x = (f, g) of Theta_i inside the chain model."""
    f, g = x[:fock_i], x[fock_i:]
    upper = chain.partial(i + 1, chain.k) @ f
    stacked = _stack_from(chain, i + 1) @ f
    if g.shape[0]:
        stacked = stacked + _block_units(chain, {i}) @ g
    return np.vstack([upper, _lift(space, chain, stacked, Z)])


def diag_block_unitaries(decomp: TriangularDecomposition, chain: FactorizationChain,
                         tol: Tolerance = DEFAULT_TOL) -> List[BlockUnitary]:
    ops = decomp.ops
    space = ops.space
    if decomp.k != chain.k:
        raise ChainError(f"decomposition has {decomp.k} parts, chain has {chain.k} factors")
    Z = stacked_Z(chain, tol).Z if space.kind == "single" else None
    Q = space.H.columns
    out = []
    for i in range(1, chain.k + 1):
        f = chain.factors[i - 1]
        sz = szego_check(f, chain.N, tol).satisfied
        sp_i, ops_i = build_model(f, chain.N, tol)
        P = decomp.H_parts[i - 1].columns
        y = _case_images(chain, space, i, Z, sp_i.H.columns, sp_i.fock_dim)
        W = P.conj().T @ (Q.conj().T @ y)     # U_i* in coordinates
        cont = float(np.linalg.norm(y - Q @ (P @ W))) if y.size else 0.0
        if W.shape[0] == W.shape[1]:
            uni = float(np.linalg.norm(W.conj().T @ W - np.eye(W.shape[1]), 2)) if W.size else 0.0
            A = decomp.diagonal(i)
            inter = max((float(np.linalg.norm(W.conj().T @ Aj.conj().T @ W - Bj, 2))
                         for Aj, Bj in zip(A, ops_i.adj)), default=0.0) if W.size else 0.0
        else:
            uni = inter = np.inf
        good = uni <= 1e-10 and cont <= tol.residual_abs and inter <= tol.residual_abs
        verdict = "hypothesis unmet" if not sz else ("verified" if good else "failed")
        out.append(BlockUnitary(i, W.conj().T, (P.shape[1], sp_i.dim), uni, cont, inter,
                                bool(sz), verdict, (sp_i, ops_i)))
    return out


def diag_char_coincidence(decomp: TriangularDecomposition, chain: FactorizationChain,
                          tol: Tolerance = DEFAULT_TOL,
                          unitaries: Optional[List[BlockUnitary]] = None) -> List[CoincidenceVerdict]:
    """Characteristic function of each diagonal block against the purely contractive part of Theta_i."""
    unitaries = unitaries or diag_block_unitaries(decomp, chain, tol)
    out = []
    for bu in unitaries:
        i = bu.index
        pd = purely_contractive_part(chain.factors[i - 1], tol)
        pure = pd.pure_part
        A = decomp.diagonal(i)
        if A[0].shape[0] == 0:
            empty = pure.dimE == 0 and pure.dimEstar == 0
            z = np.zeros((0, 0), dtype=complex)
            out.append(CoincidenceVerdict("witness" if empty else "fail", 0.0 if empty else np.inf,
                                          z, z, "empty block"))
            continue
        TA = rowcon.make(A)
        dd = rowcon.defects(TA, tol)
        char = rowcon.char_function(TA, chain.N, tol, dd)
        sp_i, ops_i = bu.model
        if bu.U.shape[0] != bu.U.shape[1]:
            out.append(coincide(char, pure, tol))
            continue
        # H_i coordinates enter the factor's model through U_i
        moved = dataclasses.replace(sp_i, H=SubspaceBasis(sp_i.ambient_dim,
                                                          sp_i.H.columns @ _polar(bu.U)))
        U, V = natural_witness(moved, ops_i, TA, dd, pd.pure_dom.columns, pd.pure_codom.columns,
                               chain.factors[i - 1].dimEstar)
        v = coincide(char, pure, tol, witness=(U, V))
        if not v.ok:
            v = coincide(char, pure, tol, seed=(U, V))
        out.append(v)
    return out
