import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncfactor import freeword as fw, manop as mo, rowcon
from ncfactor.errors import NotContractiveError
from ncfactor.manop import MultiAnalyticSymbol as Sym


def assemble_by_hand(sym, N):
    """Independent assembly: column (beta, h) gets e_{beta alpha} (x) theta_alpha h."""
    idx = fw.enumerate_words(sym.n, N)
    m, p = sym.dimE, sym.dimEstar
    M = np.zeros((idx.size * p, idx.size * m), dtype=complex)
    for b in idx.words:
        for a, A in sym.coeffs.items():
            if len(a) + len(b) <= N:
                r, c = idx.index(b + a), idx.index(b)
                M[r * p:(r + 1) * p, c * m:(c + 1) * m] += A
    return M


def power_series_product(f, g):
    return np.convolve(f, g)


@pytest.mark.parametrize("seed", range(3))
def test_assembly_matches_definition(seed):
    sym = mo.random_symbol(2, 2, 3, 2, seed)
    assert np.allclose(mo.assemble(sym, 4).matrix, assemble_by_hand(sym, 4))


def test_constant_and_shift_assembly():
    A = np.array([[0.2, 0.1], [0.0, 0.3]])
    M = mo.assemble(Sym.constant(A, 2), 2).matrix
    assert np.allclose(M, np.kron(np.eye(7), A))
    S = fw.creation_matrix(1, fw.enumerate_words(1, 3))
    assert np.allclose(mo.assemble(Sym.shift(1), 3).matrix, S)


def test_intertwining_on_low_grades():
    sym = mo.random_symbol(2, 2, 2, 2, 11)
    assert mo.intertwining_residual(sym, 4) == 0.0


def test_multiply_identity_and_dims(rng):
    th = mo.random_symbol(2, 2, 3, 1, 3)
    assert mo.multiply(Sym.identity(2, 3), th).max_diff(th) == 0
    assert mo.multiply(th, Sym.identity(2, 2)).max_diff(th) == 0
    with pytest.raises(Exception):
        mo.multiply(th, th)


@pytest.mark.parametrize("a,b", [(0.5, -0.3 + 0.4j), (0.2j, 0.7)])
def test_single_variable_product_is_series_product(a, b):
    fa = rowcon.char_function(rowcon.scalar([a]), 6)
    fb = rowcon.char_function(rowcon.scalar([b]), 6)
    prod = mo.multiply(fa, fb)
    ca = [fa.coeff((1,) * k)[0, 0] for k in range(7)]
    cb = [fb.coeff((1,) * k)[0, 0] for k in range(7)]
    want = power_series_product(ca, cb)
    got = [prod.coeff((1,) * k)[0, 0] for k in range(len(want))]
    assert np.allclose(got, want, atol=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_product_of_assemblies(seed):
    phi = mo.random_symbol(2, 3, 2, 1, seed)
    th = mo.random_symbol(2, 2, 3, 2, seed + 50)
    N = 5
    lhs = mo.assemble(mo.multiply(phi, th), N).matrix
    rhs = mo.assemble(phi, N).matrix @ mo.assemble(th, N).matrix
    assert np.allclose(lhs, rhs)  # truncations of lower-triangular operators compose exactly


@given(st.integers(0, 1000))
def test_multiply_associative(seed):
    a = mo.random_symbol(2, 2, 1, 1, seed)
    b = mo.random_symbol(2, 2, 2, 1, seed + 1)
    c = mo.random_symbol(2, 1, 2, 1, seed + 2)
    assert mo.multiply(mo.multiply(a, b), c).max_diff(mo.multiply(a, mo.multiply(b, c))) < 1e-14


def test_defect_examples():
    A = np.diag([0.6, 0.0])
    d = mo.defect(Sym.constant(A, 1), 3)
    assert np.allclose(d.delta, np.kron(np.eye(4), np.diag([0.8, 1.0])))
    d0 = mo.defect(Sym.zero(2, 2, 1), 2)
    assert np.allclose(d0.delta, np.eye(14))
    th = rowcon.char_function(rowcon.nilpotent(2, 3, 0, 2), 5)
    dd = mo.defect(th, 5)
    idx = fw.enumerate_words(2, 5)
    mask = fw.interior_mask(idx, th.dimE, 5 - th.degree)
    assert np.linalg.norm(dd.delta[:, mask]) < 1e-10


def test_defect_rejects_expansive():
    with pytest.raises(NotContractiveError):
        mo.defect(Sym.constant([[1.5]], 1), 2)


def test_purely_contractive():
    assert mo.is_purely_contractive(Sym.constant(np.zeros((2, 2)), 1))
    assert not mo.is_purely_contractive(Sym.constant(np.eye(2), 1))
    assert not mo.is_purely_contractive(Sym.constant(np.diag([1.0, 0.3]), 1))


def test_pure_part_split():
    pure = Sym.constant(np.diag([0.3, 0.5]), 2)
    assert mo.purely_contractive_part(pure).U.shape == (0, 0)
    U = mo.random_unitary(2, 4)
    d = mo.purely_contractive_part(Sym.constant(U, 2))
    assert d.pure_part.dimE == 0 and d.pure_part.dimEstar == 0
    # block sum of the two, plus a degree-1 term on the pure block
    A0 = np.zeros((4, 4), dtype=complex)
    A0[:2, :2] = np.diag([0.3, 0.5])
    A0[2:, 2:] = U
    A1 = np.zeros((4, 4), dtype=complex)
    A1[:2, :2] = 0.2
    sym = Sym(2, 4, 4, {(): A0, (1,): A1})
    d = mo.purely_contractive_part(sym)
    assert d.U.shape == (2, 2) and np.allclose(d.U.conj().T @ d.U, np.eye(2), atol=1e-10)
    assert mo.is_purely_contractive(d.pure_part)
    assert d.reconstruction_residual < 1e-12
    assert np.allclose(sorted(np.linalg.svd(d.pure_part.coeff(()), compute_uv=False)), [0.3, 0.5])


def test_row_isometry_scalar_constant():
    a = 0.6
    C = mo.row_isometry_C(Sym.constant([[a]], 1), 5)
    # defect is sqrt(1 - a^2) I: C acts as the shift on the grade coordinates
    Cj = C.C[0]
    P = C.domain.columns
    assert np.allclose(P.conj().T @ Cj.conj().T @ Cj @ P, np.eye(C.domain.rank))
    assert np.linalg.norm(Cj @ Cj.conj().T - np.eye(Cj.shape[0])) > 0.5


def test_row_isometry_empty_and_random():
    assert mo.row_isometry_C(rowcon.char_function(rowcon.scalar([0.0]), 3), 3).C[0].shape == (0, 0)
    C = mo.row_isometry_C(mo.random_symbol(2, 2, 2, 1, 7), 4)
    assert C.relation_residual <= 1e-8
    assert C.isometry_defect <= 1e-8


def test_szego_examples():
    inner = rowcon.char_function(rowcon.nilpotent(2, 3, 1, 2), 4)
    r = mo.szego_check(inner, 4)
    assert r.satisfied and r.cuntz and r.range_rank == 0
    r = mo.szego_check(Sym.constant(np.diag([0.5, 0.2]), 2), 3)
    assert not r.satisfied and not r.cuntz and r.agree


def test_coincide_examples(rng):
    M = mo.random_symbol(2, 3, 2, 2, 9)
    U, V = mo.random_unitary(3, 1), mo.random_unitary(2, 2)
    Nsym = Sym(2, 3, 2, {w: V @ A @ U.conj().T for w, A in M.coeffs.items()})
    v = mo.coincide(M, Nsym)
    assert v.ok and v.residual <= 1e-8
    v = mo.coincide(M, M, witness=(np.eye(3), np.eye(2)))
    assert v.ok and v.residual == 0
    v = mo.coincide(M, M.scaled(0.5))
    assert v.level == "fail"
    assert mo.coincide(M, Sym.zero(2, 2, 2)).level == "fail"


def test_coincide_symmetric():
    M = mo.random_symbol(2, 2, 2, 1, 19)
    U, V = mo.random_unitary(2, 3), mo.random_unitary(2, 4)
    Nsym = Sym(2, 2, 2, {w: V @ A @ U.conj().T for w, A in M.coeffs.items()})
    a, b = mo.coincide(M, Nsym), mo.coincide(Nsym, M)
    assert a.ok and b.ok
    # a witness for one direction inverts to a witness for the other
    assert mo.coincide(Nsym, M, witness=(a.U.conj().T, a.V.conj().T)).ok


def test_inner_outer_examples():
    z = Sym.shift(1)
    assert mo.is_inner(z, 4) and not mo.is_outer(z, 4)
    A = np.array([[0.5, 0.1], [0.0, 0.4]])
    assert mo.is_outer(Sym.constant(A, 2), 3).outer and not mo.is_inner(Sym.constant(A, 2), 3)
    zero = Sym.zero(1, 1, 1)
    assert not mo.is_inner(zero, 3) and not mo.is_outer(zero, 3)


@given(st.integers(1, 2), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2), st.integers(0, 10_000))
def test_random_symbols_are_contractive(n, m, p, deg, seed):
    sym = mo.random_symbol(n, m, p, deg, seed)
    M = mo.assemble(sym, 3).matrix
    assert np.linalg.norm(M, 2) <= 1 + 1e-10
    d = mo.defect(sym, 3)
    assert np.allclose(d.delta, d.delta.conj().T)


def test_bad_letters_rejected():
    with pytest.raises(ValueError):
        Sym(1, 1, 1, {(2,): np.eye(1)})
