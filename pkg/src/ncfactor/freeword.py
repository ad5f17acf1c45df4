"""Words over {1..n} and the truncated full Fock space.

Basis vectors e_alpha of the truncated Fock space are indexed by words of
length at most N, ordered by length and then lexicographically.  Tensor
products with a coefficient space use word-major, coefficient-minor order,
so ``ampliate(A, m) == np.kron(A, I_m)``.
"""
from __future__ import annotations

import builtins

from dataclasses import dataclass, field
from itertools import product
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

from .errors import SizingError

Word = Tuple[int, ...]
EMPTY: Word = ()

#: hard cap on the number of basis words, protects against n**N blowups
MAX_WORDS = 2_000_000


def word_count(n: int, N: int) -> int:
    """Number of words of length <= N over an n-letter alphabet."""
    if n == 1:
        return N + 1
    return (n ** (N + 1) - 1) // (n - 1)


def concat(a: Sequence[int], b: Sequence[int]) -> Word:
    return tuple(a) + tuple(b)


def to_str(w: Sequence[int]) -> str:
    """Digit-string form, ``""`` for the empty word."""
    return "".join(str(c) for c in w)


def from_str(s: str) -> Word:
    s = s.strip()
    if s in ("", "-", "e", "()"):
        return EMPTY
    try:
        return tuple(int(c) for c in s)
    except ValueError as exc:
        raise ValueError(f"bad word literal {s!r}") from exc


@dataclass(frozen=True)
class FockIndex:
    """Graded-lex enumeration of words of length <= N over {1..n}."""

    n: int
    N: int
    words: Tuple[Word, ...] = field(repr=False)
    pos: Dict[Word, int] = field(repr=False, compare=False, hash=False)

    def __len__(self) -> int:
        return len(self.words)

    @property
    def size(self) -> int:
        return len(self.words)

    def index(self, w: Sequence[int]) -> int:
        return self.pos[tuple(w)]

    def grade_slice(self, g: int) -> slice:
        """Positions of the words of length exactly g."""
        if g < 0 or g > self.N:
            return slice(0, 0)
        return slice(word_count(self.n, g - 1) if g > 0 else 0,
                     word_count(self.n, g))

    def grades(self) -> np.ndarray:
        return np.array([len(w) for w in self.words], dtype=int)

    def grade_mask(self, max_grade: int, min_grade: int = 0) -> np.ndarray:
        g = self.grades()
        return (g <= max_grade) & (g >= min_grade)

    def words_of_length(self, g: int) -> Tuple[Word, ...]:
        return self.words[self.grade_slice(g)]


def enumerate_words(n: int, N: int) -> FockIndex:
    """Build the truncated Fock index.

    Parameters
    ----------
    n : int
        Alphabet size, at least 1.
    N : int
        Truncation degree, at least 0.

    Raises
    ------
    SizingError
        For n < 1, N < 0 or more than ``MAX_WORDS`` basis words.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise SizingError(f"alphabet size must be >= 1, got {n!r}")
    if not isinstance(N, (int, np.integer)) or N < 0:
        raise SizingError(f"truncation degree must be >= 0, got {N!r}")
    total = word_count(int(n), int(N))
    if total > MAX_WORDS:
        raise SizingError(f"{total} words for n={n}, N={N} exceeds cap {MAX_WORDS}")
    words = [EMPTY]
    for g in range(1, N + 1):
        words.extend(product(range(1, n + 1), repeat=g))
    words_t = tuple(words)
    return FockIndex(int(n), int(N), words_t, {w: k for k, w in builtins.enumerate(words_t)})


# public alias; shadows the builtin inside this module, hence builtins.enumerate above
enumerate = enumerate_words  # noqa: A001


def creation_matrix(i: int, idx: FockIndex) -> np.ndarray:
    """Left creation S_i: e_alpha -> e_{i alpha}, top grade sent to 0."""
    if not 1 <= i <= idx.n:
        raise IndexError(f"letter {i} outside 1..{idx.n}")
    S = np.zeros((idx.size, idx.size), dtype=complex)
    for col, w in builtins.enumerate(idx.words):
        if len(w) < idx.N:
            S[idx.pos[(i,) + w], col] = 1.0
    return S


def right_creation_matrix(i: int, idx: FockIndex) -> np.ndarray:
    """Right creation R_i: e_alpha -> e_{alpha i}, top grade sent to 0."""
    if not 1 <= i <= idx.n:
        raise IndexError(f"letter {i} outside 1..{idx.n}")
    R = np.zeros((idx.size, idx.size), dtype=complex)
    for col, w in builtins.enumerate(idx.words):
        if len(w) < idx.N:
            R[idx.pos[w + (i,)], col] = 1.0
    return R


def word_operator(w: Iterable[int], idx: FockIndex) -> np.ndarray:
    """S_w = S_{w_1} ... S_{w_k}."""
    out = np.eye(idx.size, dtype=complex)
    for c in w:
        out = out @ creation_matrix(c, idx)
    return out


def ampliate(A: np.ndarray, m: int) -> np.ndarray:
    """A tensor I_m in word-major, coefficient-minor order."""
    if m < 1:
        raise SizingError(f"coefficient dimension must be >= 1, got {m}")
    if m == 1:
        return np.asarray(A)
    return np.kron(A, np.eye(m))


def interior_mask(idx: FockIndex, m: int, max_grade: int) -> np.ndarray:
    """Boolean mask on Gamma_N (x) C^m selecting words of length <= max_grade."""
    return np.repeat(idx.grade_mask(max_grade), m)
