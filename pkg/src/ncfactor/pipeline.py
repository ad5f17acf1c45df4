"""End-to-end run for one pure tuple and one chain of invariant subspaces:
dilate, extract the factors, rebuild the model, triangularize."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

from . import blocktri, dilation, fmodel, rowcon
from .manop import CoincidenceVerdict
from .numsub import DEFAULT_TOL, SubspaceBasis, Tolerance
from .regfact import FactorizationChain


@dataclass(frozen=True, eq=False)
class RoundTripResult:
    chain: FactorizationChain = field(repr=False)
    dil: dilation.DilationData = field(repr=False)
    ladder: dilation.WanderingLadder = field(repr=False)
    extraction: dilation.ExtractionReport
    phi: dilation.PhiReport = field(repr=False)
    model: tuple = field(repr=False)
    invariant_chain: fmodel.InvariantChain = field(repr=False)
    chain_report: fmodel.ChainReport
    triangular: blocktri.TriangularDecomposition = field(repr=False)
    unitaries: List[blocktri.BlockUnitary] = field(repr=False)
    block_coincidence: List[CoincidenceVerdict] = field(repr=False)

    @property
    def phi_angle(self) -> float:
        return max([self.phi.H_angle] + list(self.phi.M_angles))


def roundtrip(T: rowcon.RowContraction, subspaces: Sequence[SubspaceBasis], N: int,
              tol: Tolerance = DEFAULT_TOL) -> RoundTripResult:
    dil = dilation.pure_dilation(T, N, tol)
    lad = dilation.wandering_ladder(dil, subspaces, tol)
    chain = dilation.extract_factors(dil, lad, tol)
    ext = dilation.verify_product_and_regularity(chain, dil, lad, tol)
    phi = dilation.phi_map(dil, lad, chain, tol)
    space, ops = fmodel.build_model(chain.product, N, tol)
    ic = fmodel.invariant_chain_from_factorization(chain, space, tol)
    rep = fmodel.verify_chain(ops, ic, tol)
    tri = blocktri.triangularize(ops, ic, tol, report=rep)
    us = blocktri.diag_block_unitaries(tri, chain, tol)
    dcc = blocktri.diag_char_coincidence(tri, chain, tol, unitaries=us)
    return RoundTripResult(chain, dil, lad, ext, phi, (space, ops), ic, rep, tri, us, dcc)


def extract_chain(T: rowcon.RowContraction, subspaces: Sequence[SubspaceBasis], N: int,
                  tol: Tolerance = DEFAULT_TOL) -> FactorizationChain:
    """Only the forward half: the factors read off the wandering ladder."""
    dil = dilation.pure_dilation(T, N, tol)
    return dilation.extract_factors(dil, dilation.wandering_ladder(dil, subspaces, tol), tol)
