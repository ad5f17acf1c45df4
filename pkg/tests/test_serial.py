import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncfactor import fixtures as fx, manop as mo, rowcon, serial
from ncfactor.errors import ConfigError

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=12), st.integers(1, 3))
def test_matrix_roundtrip_is_exact(entries, cols):
    vals = np.array([complex(a, b) for a, b in entries])
    A = vals[: (len(vals) // cols) * cols].reshape(-1, cols) if len(vals) >= cols else vals.reshape(1, -1)
    text = serial.dumps(serial.encode_matrix(A))
    B = serial.decode_matrix(json.loads(text))
    assert np.array_equal(A + 0.0, B)
    assert serial.dumps(serial.encode_matrix(B)) == text


def test_negative_zero_and_nan():
    assert serial.encode_matrix(np.array([[-0.0]])) == [[[0.0, 0.0]]]
    assert "-0.0" not in serial.dumps(serial.encode_matrix(np.array([[complex(-0.0, -0.0)]])))
    with pytest.raises(ValueError):
        serial.encode_matrix(np.array([[np.nan]]))


def test_symbol_roundtrip():
    sym = mo.random_symbol(2, 2, 3, 2, 5)
    d = serial.symbol_to_dict(sym)
    assert {e["word"] for e in d["coeffs"]} >= {"", "1", "21"}
    back = serial.symbol_from_dict(json.loads(serial.dumps(d)))
    assert back.max_diff(sym) == 0.0
    assert serial.dumps(serial.symbol_to_dict(back)) == serial.dumps(d)


def test_contraction_and_chain_roundtrip(tmp_path):
    f = fx.nilpotent_fixture(4, 2, 3, 3, 2)
    serial.dump(serial.contraction_to_dict(f.T, f.chain, {"seed": 4}), tmp_path / "t.json")
    T, subs = serial.load_any(tmp_path / "t.json")
    assert all(np.array_equal(a, b) for a, b in zip(T.T, f.T.T))
    assert [S.rank for S in subs] == [S.rank for S in f.chain]
    ch = fx.mixed_chain(2)
    serial.dump(serial.chain_to_dict(ch), tmp_path / "c.json")
    back = serial.load_any(tmp_path / "c.json")
    assert back.k == ch.k and back.product.max_diff(ch.product) == 0.0


@pytest.mark.parametrize("bad", [
    {"kind": "symbol", "n": 1, "dimE": 1, "dimEstar": 1, "coeffs": [{"word": "2", "matrix": [[[1, 0]]]}]},
    {"kind": "symbol", "n": 1, "dimE": 1, "dimEstar": 1, "coeffs": [{"word": "1", "matrix": [[[1, 0], [0, 0]]]}]},
    {"kind": "symbol", "n": 1, "dimE": 1, "dimEstar": 1, "coeffs": [{"word": "x", "matrix": [[[1, 0]]]}]},
    {"kind": "chain", "N": 2, "factors": []},
])
def test_rejects_malformed(bad):
    with pytest.raises(Exception):
        kind = bad["kind"]
        (serial.symbol_from_dict if kind == "symbol" else serial.chain_from_dict)(bad)


def test_wrong_kind_and_parse_errors(tmp_path):
    with pytest.raises(ConfigError):
        serial.symbol_from_dict({"kind": "chain"})
    p = tmp_path / "broken.json"
    p.write_text('{"kind": "symbol",\n  "n": }')
    with pytest.raises(ConfigError, match="line 2 column"):
        serial.load(p)
    p.write_text('{"kind": "mystery"}')
    with pytest.raises(ConfigError, match="unknown object kind"):
        serial.load_any(p)


def test_contraction_dimension_check():
    d = serial.contraction_to_dict(rowcon.scalar([0.5, 0.1]))
    d["n"] = 3
    with pytest.raises(ConfigError):
        serial.contraction_from_dict(d)
