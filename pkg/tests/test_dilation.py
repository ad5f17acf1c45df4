import numpy as np
import pytest
import scipy.linalg as sla

from ncfactor import dilation as dl, fixtures as fx, fmodel, manop as mo, rowcon
from ncfactor.errors import ChainError, NotPureError
from ncfactor.numsub import SubspaceBasis, subspace_distance
from ncfactor.pipeline import extract_chain

N = 5


def intertwiner_oracle(A, B):
    """Unitary (U, V) with B_a U = V A_a for all words, from the joint null space of the
    intertwining equations and their adjoints; None when there is none."""
    p, m = A.shape
    rows = []
    for w in set(A.coeffs) | set(B.coeffs):
        a, b = A.coeff(w), B.coeff(w)
        rows.append(np.hstack([np.kron(np.eye(m), b), -np.kron(a.T, np.eye(p))]))
        rows.append(np.hstack([np.kron(a.conj(), np.eye(m)), -np.kron(np.eye(p), b.conj().T)]))
    _, sv, Vh = sla.svd(np.vstack(rows), full_matrices=False)
    K = Vh[sv <= 1e-9 * sv[0]].conj().T
    if K.shape[1] == 0:
        return None
    x = K @ np.random.default_rng(1).standard_normal(K.shape[1])
    U = x[:m * m].reshape((m, m), order="F")
    V = x[m * m:].reshape((p, p), order="F")
    polar = lambda X: (lambda P, s, Qh: P @ Qh)(*np.linalg.svd(X))
    return polar(U), polar(V)


def coincides(A, B, tol=1e-8):
    if A.shape != B.shape:
        return False
    w = intertwiner_oracle(A, B)
    return w is not None and mo.coincide(A, B, witness=w).residual <= tol


def test_zero_scalar_by_hand():
    d = dl.pure_dilation(rowcon.scalar([0.0]), 3)
    e = np.eye(4)
    assert subspace_distance(d.H, SubspaceBasis(4, e[:, :1])) < 1e-14
    assert subspace_distance(d.L, SubspaceBasis(4, e[:, 1:2])) < 1e-14
    assert subspace_distance(d.Lstar, SubspaceBasis(4, e[:, :1])) < 1e-14


def test_nilpotent_embedding_is_exact():
    T = rowcon.nilpotent(2, 4, 3, 3)
    d = dl.pure_dilation(T, 3)
    assert d.isometry_defect < 1e-14 and d.tail == 0.0
    assert d.adjoint_residual < 1e-14 and d.decomposition_angle < 1e-8


def test_geometric_tail():
    # |E*E - I| equals |Psi^{N+1}(I)| = |a|^{2(N+1)} for a scalar
    d = dl.pure_dilation(rowcon.scalar([0.5]), 12)
    assert d.isometry_defect == pytest.approx(0.5 ** 26, rel=1e-6)
    assert d.isometry_defect == pytest.approx(d.tail, rel=1e-6)


def test_non_pure_rejected():
    with pytest.raises(NotPureError):
        dl.pure_dilation(rowcon.scalar([1.0]), 3)


def test_trivial_chain_recovers_char_function():
    T = rowcon.nilpotent(2, 3, 2, 3)
    d = dl.pure_dilation(T, N)
    lad = dl.wandering_ladder(d, [])
    assert subspace_distance(lad.F[0], d.L) < 1e-10
    assert subspace_distance(lad.F[-1], d.Lstar) < 1e-10
    ch = dl.extract_factors(d, lad)
    assert ch.k == 1
    assert coincides(ch.factors[0], rowcon.char_function(T, N))
    rep = dl.verify_product_and_regularity(ch, d, lad)
    assert rep.passed


def test_zero_subspace_level():
    T = rowcon.nilpotent(2, 3, 4, 3)
    d = dl.pure_dilation(T, N)
    lad = dl.wandering_ladder(d, [SubspaceBasis.zero(3)])
    # M_1 = 0 gives K_1 = M_V(L) and F_1 = L
    assert subspace_distance(lad.F[1], d.L) < 1e-10
    assert subspace_distance(lad.K[1], dl.generated(d.L, d.V, d.idx)) < 1e-10


@pytest.mark.parametrize("seed", [0, 5])
def test_one_subspace_two_factors(seed):
    f = fx.nilpotent_fixture(seed, 2, 4, 3, 1)
    d = dl.pure_dilation(f.T, N)
    lad = dl.wandering_ladder(d, list(f.chain))
    assert lad.wandering_residual < 1e-10
    for F, K in zip(lad.F, lad.K):
        assert np.linalg.norm(F.columns - K.columns @ (K.columns.conj().T @ F.columns)) < 1e-10
    ch = dl.extract_factors(d, lad)
    assert ch.k == 2
    assert [f.dimE for f in ch.factors] == [F.rank for F in lad.F[:-1]]
    rep = dl.verify_product_and_regularity(ch, d, lad)
    assert rep.passed and rep.coincidence.ok and rep.regularity.regular
    assert coincides(ch.product, rowcon.char_function(f.T, N))


def test_non_invariant_rejected():
    T = rowcon.make([0.5 * np.eye(3, k=1)])   # e_3 -> e_2 -> e_1 -> 0
    d = dl.pure_dilation(T, 3)
    with pytest.raises(ChainError):
        dl.wandering_ladder(d, [SubspaceBasis(3, np.eye(3)[:, 2:])])
    dl.wandering_ladder(d, [SubspaceBasis(3, np.eye(3)[:, :1])])


def test_model_generated_chain_gives_back_the_factors():
    f = fx.nilpotent_fixture(7, 2, 4, 3, 1)
    ch = extract_chain(f.T, f.chain, N)
    space, ops = fmodel.build_model(ch.product, N)
    ic = fmodel.invariant_chain_from_factorization(ch, space)
    Q = space.H.columns
    Tm = rowcon.make(ops.T)
    M = SubspaceBasis(Q.shape[1], Q.conj().T @ ic.M[0].columns)
    again = extract_chain(Tm, [M], N)
    for a, b in zip(ch.factors, again.factors):
        assert coincides(a, b)


def test_phi_on_trivial_chain():
    T = rowcon.nilpotent(2, 3, 9, 2)
    d = dl.pure_dilation(T, N)
    lad = dl.wandering_ladder(d, [])
    ch = dl.extract_factors(d, lad)
    ph = dl.phi_map(d, lad, ch)
    assert ph.H_angle < 1e-8 and ph.M_angles == []


def test_phi_for_zero_scalar_is_reindexing():
    d = dl.pure_dilation(rowcon.scalar([0.0]), 3)
    lad = dl.wandering_ladder(d, [])
    ph = dl.phi_map(d, lad, dl.extract_factors(d, lad))
    fock = d.K_dim
    assert np.allclose(np.abs(ph.Phi[:fock]), np.eye(fock))


def test_phi_matches_model_chain():
    f = fx.nilpotent_fixture(11, 2, 5, 3, 2)
    d = dl.pure_dilation(f.T, N)
    lad = dl.wandering_ladder(d, list(f.chain))
    ch = dl.extract_factors(d, lad)
    ph = dl.phi_map(d, lad, ch)
    assert ph.H_angle <= 1e-6 and max(ph.M_angles) <= 1e-6
