import json

import pytest

from ncfactor import cli, manop as mo, regfact as rf, serial
from ncfactor.manop import MultiAnalyticSymbol as Sym


def run(tmp_path, *argv, config=None, name="out"):
    args = list(argv)
    if config is not None:
        cfg = tmp_path / f"{name}.json"
        cfg.write_text(json.dumps(config))
        args += ["--config", str(cfg)]
    out = tmp_path / name
    code = cli.main(args + ["--out", str(out), "--quiet"])
    return code, out


def struct(out):
    return json.loads((out / "report.struct").read_text())


def test_gen_fixture_reloads_bit_identically(tmp_path):
    code, out = run(tmp_path, "gen", config={"kind": "nilpotent", "n": 2, "d": 3, "seed": 1})
    assert code == 0
    text = (out / "fixture.json").read_text()
    T, subs = serial.contraction_from_dict(json.loads(text))
    again = serial.dumps(serial.contraction_to_dict(T, subs, json.loads(text)["meta"]))
    assert again == text
    assert all(c["verdict"] == "pass" for c in struct(out)["checks"])


def test_inner_chain_is_regular(tmp_path):
    ch = rf.make_chain([Sym.constant(mo.random_isometry(2, 3, 1), 2),
                        Sym.constant(mo.random_isometry(3, 3, 2), 2)], 2)
    serial.dump(serial.chain_to_dict(ch), tmp_path / "inner.json")
    code, out = run(tmp_path, "factor-test",
                    config={"input": str(tmp_path / "inner.json"), "expect_regular": True})
    assert code == 0
    assert struct(out)["info"]["regular"] is True


def test_failed_expectation_exits_one(tmp_path):
    code, out = run(tmp_path, "factor-test", config={"index": 0, "expect_regular": False})
    assert code == 1 and struct(out)["passed"] is False
    assert "FAIL" in (out / "report.txt").read_text()


def test_informational_record(tmp_path):
    code, out = run(tmp_path, "factor-test", config={"source": "mixed", "index": 2})
    verdicts = [c["verdict"] for c in struct(out)["checks"]]
    assert code == 0 and "info" in verdicts


@pytest.mark.parametrize("config,where", [
    ({"N": 3, "bogus": 1}, "config.bogus"),
    ({"tol": {"rank_rel": -1}}, "config.tol.rank_rel"),
    ({"tol": {"typo": 1e-8}}, "config.tol.typo"),
    ({"kind": "other"}, "config.kind"),
])
def test_bad_config_exits_two_with_location(tmp_path, capsys, config, where):
    code, _ = run(tmp_path, "model", config=config)
    assert code == 2
    assert where in capsys.readouterr().err


def test_malformed_json(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text("{\"N\": 3,")
    assert cli.main(["gen", "--config", str(p), "--out", str(tmp_path / "o"), "--quiet"]) == 2
    assert "line 1 column" in capsys.readouterr().err


def test_missing_input_file(tmp_path):
    code, _ = run(tmp_path, "charfn", config={"input": str(tmp_path / "nope.json")})
    assert code == 2


@pytest.mark.parametrize("value", ["zero", "0", "-2"])
def test_thread_variable_validated(tmp_path, monkeypatch, value):
    monkeypatch.setenv("NCMK_THREADS", value)
    code, _ = run(tmp_path, "suite", config={"criteria": ["2"]})
    assert code == 2


def test_charfn_outputs_and_determinism(tmp_path):
    cfg = {"kind": "random", "n": 2, "d": 3, "seed": 9, "N": 3}
    code, a = run(tmp_path, "charfn", config=cfg, name="a")
    code2, b = run(tmp_path, "charfn", config=cfg, name="b")
    assert code == code2 == 0
    for f in ("report.struct", "coefficients.csv", "singular_values.csv", "symbol.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    assert (a / "coefficients.csv").read_text().startswith("word,row,col,re,im\n")
    assert (a / "singular_values.csv").read_text().startswith("grade,index,value\n")
    assert "wallclock" not in (a / "report.struct").read_text()


def test_tolerance_flags_are_echoed(tmp_path):
    code, out = run(tmp_path, "charfn", "--tol-rank", "1e-7", "--tol-res", "1e-9", "--seed", "3")
    env = struct(out)["environment"]
    assert code == 0 and env["seed"] == 3
    assert env["tol"]["rank_rel"] == 1e-7 and env["tol"]["residual_abs"] == 1e-9


def test_model_and_roundtrip_from_generated_fixture(tmp_path):
    code, g = run(tmp_path, "gen", config={"kind": "nilpotent", "n": 2, "d": 3, "seed": 2}, name="g")
    assert code == 0
    code, m = run(tmp_path, "model", config={"input": str(g / "fixture.json")}, name="m")
    assert code == 0 and struct(m)["info"]["model_dim"] == 3
    code, r = run(tmp_path, "roundtrip", config={"input": str(g / "fixture.json")}, name="r")
    assert code == 0
    assert (r / "blocks.csv").read_text().startswith("op,row_part,col_part,norm")


def test_model_from_symbol_file(tmp_path):
    serial.dump(serial.symbol_to_dict(Sym.shift(1)), tmp_path / "z.json")
    code, out = run(tmp_path, "model", config={"input": str(tmp_path / "z.json"), "N": 4})
    assert code == 0 and struct(out)["info"]["model_dim"] == 1


def test_roundtrip_needs_a_subspace(tmp_path, capsys):
    code, _ = run(tmp_path, "roundtrip", config={"kind": "random", "subspaces": 0})
    assert code == 2


def test_report_rerenders(tmp_path, capsys):
    code, out = run(tmp_path, "factor-test", config={"index": 1})
    capsys.readouterr()
    assert cli.main(["report", str(out / "report.struct")]) == code
    text = capsys.readouterr().out
    assert text.splitlines()[0].startswith("ncfactor factor-test")
    assert text.strip().endswith("PASS" if code == 0 else "FAIL")


def test_suite_subset(tmp_path):
    code, out = run(tmp_path, "suite", config={"criteria": ["1", "2", "12"]})
    s = struct(out)
    assert code == 0 and s["info"]["criteria"] == {"1": True, "2": True, "12": True}
