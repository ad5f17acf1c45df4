import numpy as np
import pytest

from ncfactor import blocktri as bt, fixtures as fx, fmodel, regfact as rf, rowcon
from ncfactor.errors import ChainError
from ncfactor.manop import MultiAnalyticSymbol as Sym
from ncfactor.pipeline import extract_chain, roundtrip

N = 5


def decompose(chain):
    space, ops = fmodel.build_model(chain.product, chain.N)
    ic = fmodel.invariant_chain_from_factorization(chain, space)
    return bt.triangularize(ops, ic), ic


@pytest.fixture(scope="module")
def two_chain():
    f = fx.nilpotent_fixture(3, 2, 4, 3, 1)
    return extract_chain(f.T, f.chain, N)


@pytest.fixture(scope="module")
def three_chain():
    f = fx.nilpotent_fixture(1501, 2, 4, 3, 2)
    return extract_chain(f.T, f.chain, N)


def test_single_block_is_whole_operator():
    th = rowcon.char_function(rowcon.nilpotent(2, 3, 4, 2), 4)
    ch = rf.make_chain([th], 4)
    tri, _ = decompose(ch)
    assert tri.k == 1 and tri.labels == [1]
    _, ops = fmodel.build_model(th, 4)
    P = tri.H_parts[0].columns
    for j, T in enumerate(ops.T):
        assert np.allclose(tri.blocks[j][0][0], P.conj().T @ T @ P)
    assert tri.below_diagonal == 0.0


def test_two_chain_is_upper_triangular(two_chain):
    tri, _ = decompose(two_chain)
    assert tri.below_diagonal <= 1e-9 and tri.sum_angle <= 1e-8
    grid = tri.norm_grid()
    assert grid.shape == (2, 2) and grid[1, 0] <= 1e-9 and grid[0, 1] > 0
    csv = tri.grid_csv().splitlines()
    assert csv[0] == "op,row_part,col_part,norm" and len(csv) == 1 + two_chain.n * 4


def test_unitary_middle_factor_drops_a_block(two_chain):
    ch = fx.unitary_insert(two_chain, 1, 17)
    tri, _ = decompose(ch)
    assert tri.k == 3 and tri.dropped == [2] and tri.labels == [1, 3]
    us = bt.diag_block_unitaries(tri, ch)
    dc = bt.diag_char_coincidence(tri, ch, unitaries=us)
    assert dc[1].ok and dc[1].reason == "empty block"


def test_block_unitaries_three_chain(three_chain):
    tri, _ = decompose(three_chain)
    us = bt.diag_block_unitaries(tri, three_chain)
    for u in us:
        assert u.verdict == "verified", u
        assert u.unitarity <= 1e-10 and u.intertwining <= 1e-8 and u.containment <= 1e-8
    top = us[-1]
    assert top.unitarity <= 1e-12


def test_block_coincidence(two_chain):
    tri, _ = decompose(two_chain)
    for v in bt.diag_char_coincidence(tri, two_chain):
        assert v.ok and v.residual <= 1e-7


def test_one_block_coincidence_is_the_model_round_trip():
    th = rowcon.char_function(rowcon.nilpotent(2, 3, 8, 2), 4)
    ch = rf.make_chain([th], 4)
    tri, _ = decompose(ch)
    v = bt.diag_char_coincidence(tri, ch)[0]
    rt = fmodel.model_char_roundtrip(th, 4)
    assert v.ok and rt.verdict.ok
    assert v.residual <= 1e-8 and rt.verdict.residual <= 1e-8


def test_refuses_failed_chain_but_reports_in_diagnostic_mode():
    mats = fx.strict_constants(3, 2, 2)
    ch = rf.make_chain([Sym.constant(A, 2) for A in mats], 3)
    assert not rf.is_k_regular(ch).regular
    space, ops = fmodel.build_model(ch.product, 3)
    ic = fmodel.invariant_chain_from_factorization(ch, space)
    with pytest.raises(ChainError):
        bt.triangularize(ops, ic)
    tri = bt.triangularize(ops, ic, strict=False)
    us = bt.diag_block_unitaries(tri, ch)
    assert max(u.intertwining for u in us) > 0.1
    assert not any(u.ok for u in us)


def test_pipeline_round_trip():
    f = fx.nilpotent_fixture(42, 2, 3, 3, 2)
    r = roundtrip(f.T, f.chain, N)
    assert r.extraction.passed and r.chain_report.passed
    assert r.phi_angle <= 1e-6
    assert r.triangular.below_diagonal <= 1e-9
    assert all(u.ok for u in r.unitaries) and all(v.ok for v in r.block_coincidence)
