"""Seeded test objects: engineered constant chains, mixed chains and
nilpotent tuples carrying explicit chains of joint invariant subspaces."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from . import rowcon
from .manop import MultiAnalyticSymbol, multiply, random_isometry, random_symbol, random_unitary
from .numsub import SubspaceBasis, orthonormalize
from .regfact import FactorizationChain


def _rng(seed):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------- constant chains

def engineered_constants(seed: int, k: int, m: int, regular: bool) -> List[np.ndarray]:
    """A_i = V_{i+1} diag(sigma_i) V_i* on C^m.

    Each sigma_i is 1 off a set S_i.  Disjoint S_i make the chain regular;
    a shared coordinate in S_1 and S_2 makes the stacked map lose rank.
    """
    rng = _rng(seed)
    Vs = [random_unitary(m, seed * 31 + i) for i in range(k + 1)]
    perm = rng.permutation(m)
    if regular:
        # at most one defect coordinate per factor, never reused
        sets = [[int(perm[i])] if i < m and rng.random() < 0.8 else [] for i in range(k)]
    else:
        shared = int(perm[0])
        sets = [[shared] for _ in range(k)]
    mats = []
    for i in range(k):
        s = np.ones(m)
        for c in sets[i]:
            s[c] = rng.uniform(0.2, 0.9)
        mats.append(Vs[i + 1] @ np.diag(s) @ Vs[i].conj().T)
    return mats


def strict_constants(seed: int, k: int, m: int) -> List[np.ndarray]:
    """Random strict contractions: every defect has full rank, so k >= 2 is never regular."""
    rng = _rng(seed)
    out = []
    for _ in range(k):
        A = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        out.append(A * (rng.uniform(0.3, 0.9) / np.linalg.norm(A, 2)))
    return out


@dataclass(frozen=True, eq=False)
class ConstantCase:
    seed: int
    mats: Tuple[np.ndarray, ...]   # A_1, ..., A_k
    engineered: str                # "regular" | "overlap" | "strict"
    n: int

    def chain(self, N: int = 2, tol=None) -> FactorizationChain:
        fs = tuple(MultiAnalyticSymbol.constant(A, self.n) for A in self.mats)
        return FactorizationChain(fs, N) if tol is None else FactorizationChain(fs, N, tol)


def constant_cases(count: int = 50, seed: int = 0) -> List[ConstantCase]:
    """Cases cycle regular / overlap / strict so at least a third are non-regular by design."""
    out = []
    for c in range(count):
        s = seed * 1000 + c
        rng = _rng(s)
        k = int(rng.integers(2, 5))
        m = int(rng.integers(1, 4))
        n = int(rng.integers(1, 3))
        kind = ("regular", "overlap", "strict")[c % 3]
        if kind == "strict":
            mats = strict_constants(s, k, m)
        else:
            mats = engineered_constants(s, k, m, kind == "regular")
        out.append(ConstantCase(s, tuple(mats), kind, n))
    return out


def mixed_chain(seed: int, N: int = 4) -> FactorizationChain:
    """k in 2..4 factors, each a constant contraction or a random degree-1 symbol
    (at most two of the latter, so interior grades survive at N = 4)."""
    rng = _rng(seed)
    k = int(rng.integers(2, 5))
    n = int(rng.integers(1, 3))
    dims = [int(x) for x in rng.integers(1, 4, size=k + 1)]
    n_lin = 0
    fs = []
    for i in range(k):
        if n_lin < 2 and rng.random() < 0.5:
            fs.append(random_symbol(n, dims[i], dims[i + 1], 1, seed * 17 + i,
                                    norm=float(rng.uniform(0.5, 0.95))))
            n_lin += 1
        else:
            A = rng.standard_normal((dims[i + 1], dims[i])) + 1j * rng.standard_normal((dims[i + 1], dims[i]))
            A *= rng.uniform(0.3, 1.0) / np.linalg.norm(A, 2)
            fs.append(MultiAnalyticSymbol.constant(A, n))
    return FactorizationChain(tuple(fs), N)


# ---------------------------------------------------------------- nilpotent fixtures

@dataclass(frozen=True, eq=False)
class NilpotentFixture:
    seed: int
    T: rowcon.RowContraction
    chain: Tuple[SubspaceBasis, ...]   # M_1 within M_2 within ..., all jointly invariant
    degree: int


def nilpotent_fixture(seed: int, n: int = 2, d: int = 4, degree: int = 3,
                      n_sub: int = 2) -> NilpotentFixture:
    """Block-nilpotent tuple conjugated by a random unitary.

    Indices split into ``degree`` groups and each T_i maps group g+1 into
    group g, so span(groups < g) is invariant and any subspace between
    span(groups < g) and span(groups <= g) is invariant too.
    """
    T0 = rowcon.nilpotent(n, d, seed, degree)
    W = random_unitary(d, seed + 100)
    T = rowcon.make([W @ t @ W.conj().T for t in T0.T])
    groups = np.array_split(np.arange(d), degree)
    rng = _rng(seed)
    base = np.zeros((d, 0), dtype=complex)
    Ms = []
    for g in range(min(n_sub, degree - 1)):
        gi = groups[g]
        kk = int(rng.integers(1, len(gi) + 1))
        X = np.zeros((d, kk), dtype=complex)
        X[gi] = rng.standard_normal((len(gi), kk)) + 1j * rng.standard_normal((len(gi), kk))
        Ms.append(orthonormalize(W @ np.hstack([base, X])))
        base = np.eye(d, dtype=complex)[:, np.concatenate(groups[:g + 1])]
    return NilpotentFixture(seed, T, tuple(Ms), degree)


def nilpotent_fixtures(count: int = 20, seed: int = 0) -> List[NilpotentFixture]:
    """n = 2, d in 3..5, degree 2..3, one or two subspaces."""
    out = []
    for c in range(count):
        s = seed * 1000 + c
        rng = _rng(s + 7)
        d = int(rng.integers(3, 6))
        degree = int(rng.integers(2, 4))
        n_sub = 1 if degree == 2 else int(rng.integers(1, 3))
        out.append(nilpotent_fixture(s, 2, d, degree, n_sub))
    return out


# ---------------------------------------------------------------- chain surgery

def insert_factor(chain: FactorizationChain, pos: int, mid: MultiAnalyticSymbol,
                  undo: MultiAnalyticSymbol = None) -> FactorizationChain:
    """Insert ``mid`` after factor ``pos`` (1-based) and compose ``undo`` into the next factor."""
    fs = list(chain.factors)
    nxt = fs[pos]
    if undo is not None:
        nxt = multiply(nxt, undo)
    new = fs[:pos] + [mid, nxt] + fs[pos + 1:]
    return FactorizationChain(tuple(new), chain.N, chain.tol)


def unitary_insert(chain: FactorizationChain, pos: int, seed: int) -> FactorizationChain:
    """Theta_{pos+1} U* (I (x) U) in place of Theta_{pos+1}: same product."""
    m = chain.dims[pos]
    U = random_unitary(m, seed)
    return insert_factor(chain, pos, MultiAnalyticSymbol.constant(U, chain.n),
                         MultiAnalyticSymbol.constant(U.conj().T, chain.n))


def shift_insert(chain: FactorizationChain, pos: int) -> FactorizationChain:
    """Insert the inner, non-unitary factor S_1 (x) I."""
    m = chain.dims[pos]
    J = MultiAnalyticSymbol(chain.n, m, m, {(1,): np.eye(m)})
    return insert_factor(chain, pos, J)


def isometric_constant(n: int, m: int, p: int, seed: int) -> MultiAnalyticSymbol:
    return MultiAnalyticSymbol.constant(random_isometry(m, p, seed), n)
