import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncfactor import manop, rowcon
from ncfactor.errors import NotContractiveError
from ncfactor.numsub import SubspaceBasis


def mobius_coeffs(a, K):
    """Taylor coefficients of (z - a)/(1 - conj(a) z) up to z^K, times -1 on the constant
    term convention used for the characteristic function: theta(z) = -a + (1-|a|^2) sum conj(a)^{k-1} z^k."""
    c = [-a] + [(1 - abs(a) ** 2) * np.conj(a) ** (k - 1) for k in range(1, K + 1)]
    return np.array(c)


def test_validation():
    rowcon.make([[[0.0]]])
    T = rowcon.scalar([0.8, 0.6])
    assert np.isclose(T.psi(np.eye(1))[0, 0], 1.0)
    with pytest.raises(NotContractiveError):
        rowcon.scalar([1.1])
    with pytest.raises(ValueError):
        rowcon.make([np.eye(2), np.eye(3)])


def test_defects_of_scalars():
    dd = rowcon.defects(rowcon.scalar([0.0]))
    assert np.allclose(dd.D_T, 1) and np.allclose(dd.D_Tstar, 1)
    dd = rowcon.defects(rowcon.scalar([0.5]))
    assert np.allclose(dd.D_T, np.sqrt(0.75)) and np.allclose(dd.D_Tstar, np.sqrt(0.75))


@given(st.integers(1, 3), st.integers(1, 5), st.integers(0, 10_000))
def test_defect_identities(n, d, seed):
    T = rowcon.random_contraction(n, d, seed)
    dd = rowcon.defects(T)
    R = T.row
    assert np.linalg.norm(dd.D_T @ dd.D_T - (np.eye(n * d) - R.conj().T @ R)) <= 1e-10
    assert np.linalg.norm(dd.D_Tstar @ dd.D_Tstar - (np.eye(d) - R @ R.conj().T)) <= 1e-10


def test_classification():
    c = rowcon.classify(rowcon.scalar([0.5]))
    assert c.pure and c.cnc
    c = rowcon.classify(rowcon.scalar([1.0]))
    assert not c.pure and not c.cnc and c.fixed_space_dim == 1
    T = rowcon.nilpotent(2, 3, 5, 3)
    assert rowcon.classify(T).pure
    assert not np.any(rowcon.psi_power(T, 3))


def test_shift_symbol_from_zero():
    th = rowcon.char_function(rowcon.scalar([0.0]), 3)
    assert np.allclose(th.coeff(()), 0)
    assert np.allclose(abs(th.coeff((1,))), 1)
    assert all(np.allclose(th.coeff(w), 0) for w in [(1, 1), (1, 1, 1)])


def test_half_matches_series():
    th = rowcon.char_function(rowcon.scalar([0.5]), 3)
    got = [th.coeff((1,) * k)[0, 0] for k in range(4)]
    assert np.allclose(got, [-0.5, 0.75, 0.375, 0.1875], atol=1e-14)


@pytest.mark.parametrize("a", [0.5, -0.3 + 0.4j, 0.9j])
def test_scalar_series_to_grade_eight(a):
    th = rowcon.char_function(rowcon.scalar([a]), 8)
    got = np.array([th.coeff((1,) * k)[0, 0] for k in range(9)])
    # defect bases are 1x1 phases; both sides share them, the constant term fixes the rest
    assert np.max(np.abs(got - mobius_coeffs(a, 8))) <= 1e-12


def test_zero_pair_is_inner():
    th = rowcon.char_function(rowcon.scalar([0.0, 0.0]), 3)
    assert np.allclose(th.coeff(()), 0)
    assert th.dimE == 2 and th.dimEstar == 1
    P = np.vstack([th.coeff((1,)), th.coeff((2,))])
    assert np.allclose(P.conj().T @ P, np.eye(2))
    assert manop.is_inner(th, 3)


def test_invariance_by_hand():
    T = rowcon.make([np.triu(np.ones((3, 3)), 1) * 0.3, np.triu(np.ones((3, 3)), 2) * 0.2])
    e1 = SubspaceBasis(3, np.eye(3)[:, :1])
    e2 = SubspaceBasis(3, np.eye(3)[:, 1:2])
    assert rowcon.jointly_invariant(T, e1)
    assert not rowcon.jointly_invariant(T, e2)    # T_1 e_2 = 0.3 e_1
    assert rowcon.jointly_invariant(T, SubspaceBasis.full(3))
    assert rowcon.jointly_invariant(T, SubspaceBasis.zero(3))


def test_generators():
    T = rowcon.nilpotent(2, 3, 1, 3)
    assert rowcon.all_words_vanish(T, 3) and not np.any(rowcon.psi_power(T, 3))
    assert rowcon.scalar([0.5]).T[0][0, 0] == 0.5
    R = rowcon.random_contraction(3, 4, 2, norm=1.0 - 1e-12)
    assert np.linalg.norm(R.row, 2) <= 1.0


@given(st.integers(2, 3), st.integers(2, 5), st.integers(1, 3), st.integers(0, 10_000))
def test_nilpotent_words_vanish(n, d, deg, seed):
    deg = min(deg, d)
    T = rowcon.nilpotent(n, d, seed, deg)
    assert rowcon.all_words_vanish(T, deg)


@given(st.complex_numbers(max_magnitude=0.95), st.integers(0, 5))
def test_single_variable_recursion(a, seed):
    th = rowcon.char_function(rowcon.scalar([a]), 5)
    DT = np.sqrt(1 - abs(a) ** 2)
    for k in range(1, 6):
        want = DT * np.conj(a) ** (k - 1) * DT if DT > 1e-6 else 0.0
        if th.dimE:
            assert abs(th.coeff((1,) * k)[0, 0] - want) <= 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_pure_char_function_inner_on_interior(seed):
    # a degree-3 nilpotent tuple has a polynomial characteristic function of degree <= 3
    T = rowcon.nilpotent(2, 4, seed, 3)
    th = rowcon.char_function(T, 5)
    assert manop.is_inner(th, 5)
