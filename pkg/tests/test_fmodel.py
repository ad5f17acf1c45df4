import numpy as np
import pytest

from ncfactor import fixtures as fx, fmodel, manop as mo, regfact as rf, rowcon
from ncfactor.manop import MultiAnalyticSymbol as Sym
from ncfactor.numsub import SubspaceBasis, orthonormalize, subspace_distance
from ncfactor.pipeline import extract_chain

N = 5


@pytest.fixture(scope="module")
def three_chain():
    f = fx.nilpotent_fixture(1501, 2, 4, 3, 2)
    return f, extract_chain(f.T, f.chain, N)


def test_shift_model_is_one_dimensional():
    z = Sym.shift(1)
    space, ops = fmodel.build_model(z, 4)
    assert space.dim == 1
    e0 = np.zeros((space.ambient_dim, 1))
    e0[0] = 1
    assert subspace_distance(space.H, SubspaceBasis(space.ambient_dim, e0)) < 1e-12
    assert np.allclose(ops.adj[0], 0)
    rt = fmodel.model_char_roundtrip(z, 4)
    assert rt.verdict.ok and abs(abs(rt.char.coeff((1,))[0, 0]) - 1) < 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_inner_model_recovers_dimension(seed):
    T = rowcon.nilpotent(2, 4, seed, 2)
    th = rowcon.char_function(T, N)
    space, ops = fmodel.build_model(th, N)
    assert space.dim == T.d
    assert ops.leakage < 1e-10 and ops.row_defect() <= 1e-10
    rt = fmodel.model_char_roundtrip(th, N, model=(space, ops))
    assert rt.verdict.ok and rt.verdict.residual <= 1e-8


def test_unitary_constant_has_empty_model():
    u = Sym.constant(mo.random_unitary(2, 5), 2)
    space, _ = fmodel.build_model(u, 3)
    assert space.dim == 0
    rt = fmodel.model_char_roundtrip(u, 3)
    assert rt.verdict.ok and rt.pure.dimE == 0


def test_single_factor_chain_model_matches():
    th = mo.random_symbol(2, 2, 2, 1, 3)
    a, _ = fmodel.build_model(th, 3)
    b, _ = fmodel.build_model_from_chain(rf.make_chain([th], 3))
    assert a.dim == b.dim and a.ambient_dim == b.ambient_dim
    assert subspace_distance(a.H, b.H) < 1e-8


def test_inner_chain_has_no_defect_blocks():
    ch = rf.make_chain([Sym.constant(mo.random_isometry(1, 2, 1), 2),
                        Sym.constant(mo.random_isometry(2, 3, 2), 2)], 2)
    space, _ = fmodel.build_model_from_chain(ch)
    assert sum(space.defect_dims) == 0
    assert space.dim == space.fock_dim - np.linalg.matrix_rank(ch.partial(1, 2))


def test_regular_chain_model_equivalent_via_Z():
    ch = rf.make_chain([Sym.constant(A, 2) for A in fx.engineered_constants(2, 2, 2, True)], 2)
    assert rf.is_k_regular(ch).regular
    sp1, _ = fmodel.build_model(ch.product, 2)
    sp2, _ = fmodel.build_model_from_chain(ch)
    Z = rf.stacked_Z(ch).Z
    assert np.allclose(Z.conj().T @ Z, np.eye(Z.shape[1]), atol=1e-8)
    assert np.allclose(Z @ Z.conj().T, np.eye(Z.shape[0]), atol=1e-8)
    f = sp1.fock_dim
    U = np.zeros((sp2.ambient_dim, sp1.ambient_dim), dtype=complex)
    U[:f, :f] = np.eye(f)
    U[f:, f:] = Z
    assert subspace_distance(SubspaceBasis(sp2.ambient_dim, U @ sp1.H.columns), sp2.H) <= 1e-8


def test_chain_verification_and_negative_control(three_chain):
    _, ch = three_chain
    space, ops = fmodel.build_model(ch.product, N)
    ic = fmodel.invariant_chain_from_factorization(ch, space)
    rep = fmodel.verify_chain(ops, ic)
    assert rep.passed and all(rep.inclusions)
    assert rep.max_invariance <= 1e-8 and rep.max_angle <= 1e-6
    rng = np.random.default_rng(0)
    M0 = ic.M[0]
    bent = orthonormalize(M0.columns + 1e-2 * rng.standard_normal(M0.columns.shape))
    bad = fmodel.InvariantChain([bent] + list(ic.M[1:]), list(ic.Ncomp))
    assert not fmodel.verify_chain(ops, bad).passed


def test_trivial_chain_passes():
    th = rowcon.char_function(rowcon.nilpotent(2, 3, 0, 2), 4)
    space, ops = fmodel.build_model(th, 4)
    ic = fmodel.invariant_chain_from_factorization(rf.make_chain([th], 4), space)
    assert ic.M == [] and fmodel.verify_chain(ops, ic).passed


def test_collapse_examples(three_chain):
    _, ch = three_chain
    model = fmodel.build_model(ch.product, N)
    two = rf.make_chain([mo.multiply(ch.factors[1], ch.factors[0]), ch.factors[2]], N)
    cu = fmodel.unitary_constant_collapse(fx.unitary_insert(two, 1, 3), 1, model=model)
    assert cu.equal and cu.unitary_constant and cu.consistent and cu.angle <= 1e-8
    cs = fmodel.unitary_constant_collapse(fx.shift_insert(two, 1), 1)
    assert not cs.equal and cs.dim_gap >= 1 and cs.consistent
    # the middle factor of the extracted chain has a nonzero pure part
    cm = fmodel.unitary_constant_collapse(ch, 1, model=model)
    assert not cm.equal and not cm.unitary_constant


def test_aggregation_keeps_breakpoints(three_chain):
    _, ch = three_chain
    model = fmodel.build_model(ch.product, N)
    for p in rf.all_partitions(3):
        ok, angle = fmodel.aggregation_subspace_check(ch, p, model=model)
        assert ok and angle <= 1e-6


def test_divisor_inclusion(three_chain):
    _, ch = three_chain
    th1, th2, th3 = ch.factors
    model = fmodel.build_model(ch.product, N)
    A = (mo.multiply(th3, th2), th1)
    B = (th3, mo.multiply(th2, th1))
    inc = fmodel.divisor_inclusion_check(A, B, N, model=model)
    assert inc.contained and inc.divisor_ok and inc.dims[0] < inc.dims[1]
    same = fmodel.divisor_inclusion_check(A, A, N, model=model)
    assert same.contained and same.angle <= 1e-8
    assert not fmodel.divisor_inclusion_check(B, A, N, model=model).contained


def test_dimension_curve_for_constant():
    a = Sym.constant([[0.5]], 1)
    curve = fmodel.model_dimension_curve(a, [2, 3, 4])
    assert [d for _, d in curve] == [3, 4, 5]
