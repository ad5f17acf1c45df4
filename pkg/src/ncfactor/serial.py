"""JSON encoding for symbols, row contractions, chains and reports.

Complex entries are written as ``[re, im]`` pairs and words as digit
strings (``""`` for the empty word).  Floats use Python's
shortest round-trip repr, so a dump/load cycle reproduces every bit, and
keys are sorted so equal objects give equal bytes.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, List, Sequence

import numpy as np

from . import freeword as fw, rowcon
from .errors import ConfigError
from .manop import MultiAnalyticSymbol
from .numsub import SubspaceBasis
from .regfact import FactorizationChain

FORMAT_VERSION = 1


def _num(x) -> float:
    x = float(x)
    if not np.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x}")
    return x + 0.0  # folds -0.0 into 0.0


def encode_matrix(A: np.ndarray) -> List:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {A.shape}")
    return [[[_num(z.real), _num(z.imag)] for z in row] for row in A]


def decode_matrix(data, rows: int = None, cols: int = None) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.size == 0:
        return np.zeros((rows or 0, cols or 0), dtype=complex)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ConfigError(f"matrix must be rows of [re, im] pairs, got shape {arr.shape}")
    A = arr[..., 0] + 1j * arr[..., 1]
    if (rows is not None and A.shape[0] != rows) or (cols is not None and A.shape[1] != cols):
        raise ConfigError(f"matrix has shape {A.shape}, expected ({rows}, {cols})")
    return A


def symbol_to_dict(sym: MultiAnalyticSymbol) -> dict:
    if sym.n > 9:
        raise ValueError("digit-string words need n <= 9")
    return {
        "kind": "symbol",
        "n": sym.n,
        "dimE": sym.dimE,
        "dimEstar": sym.dimEstar,
        "coeffs": [{"word": fw.to_str(w), "matrix": encode_matrix(A)} for w, A in sym.coeffs.items()],
    }


def symbol_from_dict(d: dict) -> MultiAnalyticSymbol:
    _expect_kind(d, "symbol")
    n, p, q = int(d["n"]), int(d["dimEstar"]), int(d["dimE"])
    coeffs = {}
    for entry in d.get("coeffs", []):
        try:
            w = fw.from_str(entry["word"])
        except (TypeError, ValueError, AttributeError):
            raise ConfigError(f"bad word {entry.get('word')!r}") from None
        if any(not 1 <= c <= n for c in w):
            raise ConfigError(f"word {w} uses letters outside 1..{n}")
        coeffs[w] = decode_matrix(entry["matrix"], p, q)
    return MultiAnalyticSymbol(n, q, p, coeffs)


def contraction_to_dict(T: rowcon.RowContraction, subspaces: Sequence[SubspaceBasis] = (),
                        meta: dict = None) -> dict:
    out = {"kind": "row_contraction", "n": T.n, "d": T.d,
           "T": [encode_matrix(Ti) for Ti in T.T]}
    if subspaces:
        out["subspaces"] = [encode_matrix(S.columns) for S in subspaces]
    if meta:
        out["meta"] = meta
    return out


def contraction_from_dict(d: dict):
    """Returns (T, subspaces)."""
    _expect_kind(d, "row_contraction")
    dim = int(d["d"])
    T = rowcon.make([decode_matrix(m, dim, dim) for m in d["T"]])
    if len(T.T) != int(d["n"]):
        raise ConfigError(f"declared n={d['n']} but {len(T.T)} matrices given")
    subs = [SubspaceBasis(dim, decode_matrix(m, dim)) for m in d.get("subspaces", [])]
    return T, subs


def chain_to_dict(chain: FactorizationChain) -> dict:
    return {"kind": "chain", "N": chain.N, "factors": [symbol_to_dict(f) for f in chain.factors]}


def chain_from_dict(d: dict, tol=None) -> FactorizationChain:
    _expect_kind(d, "chain")
    fs = tuple(symbol_from_dict(f) for f in d["factors"])
    return FactorizationChain(fs, int(d["N"])) if tol is None else FactorizationChain(fs, int(d["N"]), tol)


def _expect_kind(d, kind):
    if not isinstance(d, dict) or d.get("kind") != kind:
        got = d.get("kind") if isinstance(d, dict) else type(d).__name__
        raise ConfigError(f"expected a {kind!r} object, got {got!r}")


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def dump(obj: Any, path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def loads(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def load(path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def load_any(path):
    """Dispatch on the ``kind`` field."""
    d = load(path)
    kind = d.get("kind") if isinstance(d, dict) else None
    if kind == "symbol":
        return symbol_from_dict(d)
    if kind == "row_contraction":
        return contraction_from_dict(d)
    if kind == "chain":
        return chain_from_dict(d)
    raise ConfigError(f"{path}: unknown object kind {kind!r}")
