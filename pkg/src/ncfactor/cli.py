"""Command line runner: fixtures, characteristic functions, regularity tests,
models, the full round trip and the acceptance suite.

Every command writes ``report.txt`` (for people) and ``report.struct``
(sorted JSON, byte-stable for a fixed config and seed) into ``--out``.
Exit status: 0 all checks pass, 1 some check fails, 2 bad input.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional

import jsonschema
import numpy as np

from . import __version__, fixtures as fx, fmodel, freeword as fw, rowcon, serial
from .errors import ConfigError, NcfactorError
from .manop import MultiAnalyticSymbol, grade_singular_values, szego_check
from .numsub import DEFAULT_TOL, Tolerance
from .pipeline import extract_chain, roundtrip
from .regfact import (FactorizationChain, all_partitions, check_partition_equivalence,
                      is_k_regular, verify_isometry_identity, z_decomposition_check)
from .suite import CheckRecord, SCENARIOS, criterion_verdicts, run_suite

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

# ---------------------------------------------------------------- config schema

_TOL = {"type": "object", "additionalProperties": False,
        "properties": {"rank_rel": {"type": "number", "exclusiveMinimum": 0},
                       "residual_abs": {"type": "number", "exclusiveMinimum": 0},
                       "angle": {"type": "number", "exclusiveMinimum": 0}}}
_COMMON = {"seed": {"type": "integer", "minimum": 0},
           "N": {"type": "integer", "minimum": 1, "maximum": 10},
           "tol": _TOL}
_GEN = {"kind": {"enum": ["random", "nilpotent", "scalar"]},
        "n": {"type": "integer", "minimum": 1, "maximum": 6},
        "d": {"type": "integer", "minimum": 1, "maximum": 12},
        "degree": {"type": "integer", "minimum": 1},
        "norm": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "values": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                               "minItems": 2, "maxItems": 2}},
        "subspaces": {"type": "integer", "minimum": 0, "maximum": 4}}
_INPUT = {"input": {"type": "string"}}


def _schema(props: dict) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props}


SCHEMAS = {
    "gen": _schema({**_COMMON, **_GEN}),
    "charfn": _schema({**_COMMON, **_GEN, **_INPUT}),
    "factor-test": _schema({**_COMMON, **_INPUT,
                            "source": {"enum": ["constant", "mixed"]},
                            "index": {"type": "integer", "minimum": 0},
                            "expect_regular": {"type": "boolean"}}),
    "model": _schema({**_COMMON, **_GEN, **_INPUT}),
    "roundtrip": _schema({**_COMMON, **_GEN, **_INPUT}),
    "suite": _schema({**_COMMON, "criteria": {"type": "array", "uniqueItems": True,
                                              "items": {"enum": list(SCENARIOS)}}}),
    "report": _schema({"input": {"type": "string"}}),
}


def load_config(cmd: str, path: Optional[str]) -> dict:
    cfg = serial.load(path) if path else {}
    try:
        jsonschema.validate(cfg, SCHEMAS[cmd])
    except jsonschema.ValidationError as exc:
        path = list(exc.absolute_path)
        msg = exc.message
        if exc.validator == "additionalProperties" and isinstance(exc.instance, dict):
            extra = sorted(set(exc.instance) - set(exc.schema.get("properties", {})))
            path.append(extra[0])
            msg = "unknown key"
        where = "config" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in path)
        raise ConfigError(f"{where}: {msg}") from None
    return cfg


def tolerance_from(cfg: dict, args) -> Tolerance:
    t = dict(rank_rel=DEFAULT_TOL.rank_rel, residual_abs=DEFAULT_TOL.residual_abs, angle=DEFAULT_TOL.angle)
    t.update(cfg.get("tol", {}))
    if getattr(args, "tol_rank", None) is not None:
        t["rank_rel"] = args.tol_rank
    if getattr(args, "tol_res", None) is not None:
        t["residual_abs"] = args.tol_res
    try:
        return Tolerance(**t)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def worker_count() -> int:
    raw = os.environ.get("NCMK_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        raise ConfigError(f"NCMK_THREADS must be a positive integer, got {raw!r}") from None
    if k < 1:
        raise ConfigError(f"NCMK_THREADS must be a positive integer, got {k}")
    return k


# ---------------------------------------------------------------- reports

class Run:
    """Collects check records and side files for one command."""

    def __init__(self, command: str, cfg: dict, seed: int, N: Optional[int], tol: Tolerance):
        self.command, self.cfg, self.seed, self.N, self.tol = command, cfg, seed, N, tol
        self.records: List[CheckRecord] = []
        self.files: Dict[str, str] = {}
        self.info: Dict[str, object] = {}
        self._t = time.perf_counter()

    def check(self, name, value, limit, detail="", le=True, criterion=0):
        now = time.perf_counter()
        ok = value <= limit if le else value >= limit
        self.records.append(CheckRecord(criterion, name, bool(ok), float(value), float(limit),
                                        detail, now - self._t))
        self._t = now

    def note(self, name, value, detail=""):
        now = time.perf_counter()
        self.records.append(CheckRecord(0, name, None, float(value), float("nan"), detail, now - self._t))
        self._t = now

    @property
    def passed(self) -> bool:
        return all(r.passed is not False for r in self.records)

    def machine(self) -> dict:
        return {"format": serial.FORMAT_VERSION, "command": self.command, "config": self.cfg,
                "environment": {"seed": self.seed, "N": self.N,
                                "tol": {"rank_rel": self.tol.rank_rel,
                                        "residual_abs": self.tol.residual_abs,
                                        "angle": self.tol.angle}},
                "info": self.info,
                "checks": [r.machine() for r in self.records],
                "passed": self.passed}

    def human(self) -> str:
        return render_human(self.machine(), [r.wallclock for r in self.records])


def render_human(m: dict, wallclock: Optional[List[float]] = None) -> str:
    env = m["environment"]
    lines = [f"ncfactor {m['command']}  seed={env['seed']}  N={'-' if env['N'] is None else env['N']}  "
             f"tol(rank={env['tol']['rank_rel']:g}, res={env['tol']['residual_abs']:g}, "
             f"angle={env['tol']['angle']:g})", ""]
    for key, val in sorted(m.get("info", {}).items()):
        lines.append(f"  {key}: {val}")
    if m.get("info"):
        lines.append("")
    for i, c in enumerate(m["checks"]):
        res, lim = c["residual"], c["tolerance"]
        res = f"{res:.3e}" if isinstance(res, float) else str(res)
        lim = f"{lim:.1e}" if isinstance(lim, float) else str(lim)
        tag = f"[{c['criterion']:>2}] " if c["criterion"] else ""
        wc = f"  {wallclock[i]:7.2f}s" if wallclock else ""
        lines.append(f"{c['verdict'].upper():4}  {tag}{c['name']:<45} {res:>10} / {lim:<8}{wc}"
                     + (f"  ({c['detail']})" if c["detail"] else ""))
    lines += ["", "PASS" if m["passed"] else "FAIL"]
    return "\n".join(lines) + "\n"


def write_outputs(run: Run, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.struct").write_text(serial.dumps(run.machine()), encoding="utf-8")
    (out / "report.txt").write_text(run.human(), encoding="utf-8")
    for name, text in run.files.items():
        (out / name).write_text(text, encoding="utf-8")


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------- inputs

def _generate(cfg: dict, seed: int):
    """Row contraction (and invariant subspaces for nilpotent tuples) from config keys."""
    kind = cfg.get("kind", "nilpotent")
    n, d = cfg.get("n", 2), cfg.get("d", 3)
    if kind == "scalar":
        vals = cfg.get("values", [[0.5, 0.0]])
        return rowcon.scalar([complex(a, b) for a, b in vals]), []
    if kind == "random":
        return rowcon.random_contraction(n, d, seed, cfg.get("norm")), []
    degree = min(cfg.get("degree", min(d, 3)), d)
    f = fx.nilpotent_fixture(seed, n, d, degree, cfg.get("subspaces", 1))
    return f.T, list(f.chain)


def _contraction(cfg, seed):
    if "input" in cfg:
        obj = serial.load_any(cfg["input"])
        if not isinstance(obj, tuple):
            raise ConfigError(f"{cfg['input']}: expected a row_contraction file")
        return obj
    return _generate(cfg, seed)


# ---------------------------------------------------------------- commands

def cmd_gen(run: Run, cfg: dict) -> None:
    T, subs = _generate(cfg, run.seed)
    fixture = serial.contraction_to_dict(T, subs, {"kind": cfg.get("kind", "nilpotent"), "seed": run.seed})
    text = serial.dumps(fixture)
    again = serial.dumps(serial.contraction_to_dict(*serial.contraction_from_dict(serial.loads(text)),
                                                    fixture["meta"]))
    run.check("fixture reload is bit-identical", int(text != again), 0)
    run.files["fixture.json"] = text
    N = run.N = run.N or 4
    sym = rowcon.char_function(T, N, run.tol)
    stext = serial.dumps(serial.symbol_to_dict(sym))
    stext2 = serial.dumps(serial.symbol_to_dict(serial.symbol_from_dict(serial.loads(stext))))
    run.check("symbol reload is bit-identical", int(stext != stext2), 0)
    run.files["symbol.json"] = stext
    run.info.update({"n": T.n, "d": T.d, "subspace_dims": [S.rank for S in subs],
                     "symbol_shape": [sym.dimEstar, sym.dimE]})


def cmd_charfn(run: Run, cfg: dict) -> None:
    T, _ = _contraction(cfg, run.seed)
    dd = rowcon.defects(T, run.tol)
    R = T.row
    run.check("D_T^2 = I - T*T", float(np.linalg.norm(dd.D_T @ dd.D_T - (np.eye(T.n * T.d) - R.conj().T @ R))), 1e-10)
    run.check("D_T*^2 = I - TT*", float(np.linalg.norm(dd.D_Tstar @ dd.D_Tstar - (np.eye(T.d) - R @ R.conj().T))), 1e-10)
    N = run.N = run.N or 4
    sym = rowcon.char_function(T, N, run.tol, dd)
    cls = rowcon.classify(T, tol=run.tol)
    run.info.update({"pure": cls.pure, "cnc": cls.cnc, "defect_dims": [sym.dimE, sym.dimEstar],
                     "support_size": len(sym.coeffs)})
    run.files["symbol.json"] = serial.dumps(serial.symbol_to_dict(sym))
    rows = [[fw.to_str(w), i, j, repr(float(A[i, j].real)), repr(float(A[i, j].imag))]
            for w, A in sym.coeffs.items() for i in range(A.shape[0]) for j in range(A.shape[1])]
    run.files["coefficients.csv"] = _csv(rows, ["word", "row", "col", "re", "im"])
    sv = [[g, k, repr(float(s))] for g in range(N + 1) for k, s in enumerate(grade_singular_values(sym, g))]
    run.files["singular_values.csv"] = _csv(sv, ["grade", "index", "value"])


def _chain_input(cfg: dict, run: Run) -> FactorizationChain:
    if "input" in cfg:
        obj = serial.load_any(cfg["input"])
        if not isinstance(obj, FactorizationChain):
            raise ConfigError(f"{cfg['input']}: expected a chain file")
        return FactorizationChain(obj.factors, run.N or obj.N, run.tol)
    idx = cfg.get("index", 0)
    if cfg.get("source", "constant") == "mixed":
        ch = fx.mixed_chain(run.seed * 131 + idx, run.N or 4)
        return FactorizationChain(ch.factors, ch.N, run.tol)
    case = fx.constant_cases(idx + 1, run.seed)[idx]
    return case.chain(run.N or 2, run.tol)


def cmd_factor_test(run: Run, cfg: dict) -> None:
    ch = _chain_input(cfg, run)
    run.N = ch.N
    rep = is_k_regular(ch, run.tol)
    run.info.update({"k": ch.k, "dims": ch.dims, "rank_W": rep.rank_W,
                     "sum_rank_Delta": rep.sum_rank_Delta_i, "regular": rep.regular,
                     "per_pair": list(rep.per_pair), "indeterminate": rep.indeterminate})
    if "expect_regular" in cfg:
        run.check("regularity matches expectation", int(rep.regular != cfg["expect_regular"]), 0)
    else:
        run.note("rank deficit of the stacked map", rep.sum_rank_Delta_i - rep.rank_W,
                 "regular" if rep.regular else "not regular")
    run.check("stacked isometry identity", verify_isometry_identity(ch), 1e-8, "interior grades")
    run.check("full vs split pairs", int(not rep.pairwise_consistent), 0)
    bad, z = 0, 0.0
    for p in all_partitions(ch.k):
        bad += not check_partition_equivalence(ch, p, run.tol).consistent
        z = max(z, z_decomposition_check(ch, p, run.tol))
    run.check("full vs aggregate and parts", bad, 0, f"{len(all_partitions(ch.k))} partitions")
    run.check("Z decomposition identity", z, 1e-9)


def cmd_model(run: Run, cfg: dict) -> None:
    N = run.N or 5
    run.N = N
    chain = None
    obj = serial.load_any(cfg["input"]) if "input" in cfg else _generate(cfg, run.seed)
    if isinstance(obj, MultiAnalyticSymbol):
        sym = obj
    elif isinstance(obj, FactorizationChain):
        chain = FactorizationChain(obj.factors, N, run.tol)
        sym = chain.product
    else:
        T, subs = obj
        if subs:
            chain = extract_chain(T, subs, N, run.tol)
            sym = chain.product
        else:
            sym = rowcon.char_function(T, N, run.tol)
    space, ops = fmodel.build_model(sym, N, run.tol)
    sz = szego_check(sym, N, run.tol)
    run.info.update({"model_dim": space.dim, "ambient_dim": space.ambient_dim,
                     "defect_rank": sum(space.defect_dims), "szego": sz.satisfied, "cuntz": sz.cuntz})
    run.check("row excess of the model tuple", ops.row_defect(), 1e-8)
    run.check("model space invariant under the ambient adjoints", ops.leakage, 1e-8)
    if chain is not None and chain.k > 1:
        ic = fmodel.invariant_chain_from_factorization(chain, space, run.tol)
        rep = fmodel.verify_chain(ops, ic, run.tol)
        run.info["chain_dims"] = [M.rank for M in ic.M]
        run.info["regular"] = ic.regular
        if ic.informational:
            run.note("chain invariance (non-regular, informational)", rep.max_invariance)
        else:
            run.check("chain invariance", rep.max_invariance, run.tol.residual_abs)
            run.check("chain co-invariance", max(rep.co_invariance, default=0.0), run.tol.residual_abs)
            run.check("chain inclusions", int(not all(rep.inclusions)), 0)
            run.check("H~ = M~_i + N~_i", rep.max_angle, run.tol.angle)
    rt = fmodel.model_char_roundtrip(sym, N, run.tol, model=(space, ops))
    if rt.verdict.ok:
        run.check("model char function coincides", rt.verdict.residual, run.tol.residual_abs)
    else:
        run.note("model char function coincidence", rt.verdict.residual, rt.verdict.reason or rt.verdict.level)


def cmd_roundtrip(run: Run, cfg: dict) -> None:
    N = run.N or 5
    run.N = N
    T, subs = _contraction(cfg, run.seed)
    if not subs:
        raise ConfigError("roundtrip needs at least one invariant subspace (config.subspaces >= 1)")
    r = roundtrip(T, subs, N, run.tol)
    ext = r.extraction
    run.info.update({"d": T.d, "subspace_dims": [S.rank for S in subs],
                     "factor_shapes": [[f.dimEstar, f.dimE] for f in r.chain.factors],
                     "part_dims": [P.rank for P in r.triangular.H_parts]})
    run.check("product coincides with char function", ext.coincidence.residual, 1e-8, ext.coincidence.level)
    run.check("extracted chain is regular", int(not ext.regularity.regular), 0)
    run.check("Phi(M_i) vs model M~_i", r.phi_angle, 1e-6)
    cr = r.chain_report
    run.check("model chain invariance", max(cr.max_invariance, max(cr.co_invariance, default=0.0)), 1e-8)
    run.check("model chain inclusions", int(not all(cr.inclusions)), 0)
    run.check("H~ = M~_i + N~_i", cr.max_angle, 1e-6)
    run.check("below-diagonal blocks", r.triangular.below_diagonal, 1e-9)
    for u in r.unitaries:
        if u.verdict == "hypothesis unmet":
            run.note(f"U_{u.index} intertwining (hypothesis unmet)", u.intertwining)
            continue
        run.check(f"U_{u.index} unitary", u.unitarity, 1e-10)
        run.check(f"U_{u.index} intertwining", u.intertwining, 1e-8)
    for i, v in enumerate(r.block_coincidence, start=1):
        run.check(f"block {i} coincidence", v.residual if v.ok else np.inf, 1e-7, v.level)
    run.files["blocks.csv"] = r.triangular.grid_csv()
    run.files["chain.json"] = serial.dumps(serial.chain_to_dict(r.chain))


def cmd_suite(run: Run, cfg: dict) -> None:
    recs = run_suite(run.seed, run.tol, cfg.get("criteria"), worker_count())
    run.records.extend(recs)
    run.info["criteria"] = {str(k): v for k, v in criterion_verdicts(recs).items()}


COMMANDS: Dict[str, Callable[[Run, dict], None]] = {
    "gen": cmd_gen, "charfn": cmd_charfn, "factor-test": cmd_factor_test,
    "model": cmd_model, "roundtrip": cmd_roundtrip, "suite": cmd_suite,
}

# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file")
    common.add_argument("--seed", type=int, help="overrides config.seed (default 0)")
    common.add_argument("--out", metavar="DIR", default="ncfactor-out", help="output directory")
    common.add_argument("--tol-rank", type=float, help="relative rank cutoff")
    common.add_argument("--tol-res", type=float, help="absolute residual tolerance")
    common.add_argument("--quiet", action="store_true", help="no summary on stdout")
    p = argparse.ArgumentParser(prog="ncfactor", description=__doc__.split("\n\n")[0].replace("\n", " "))
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["report"]:
        sp = sub.add_parser(name, parents=[common])
        if name == "report":
            sp.add_argument("path", nargs="?", help="report.struct to render")
    return p


def _cmd_report(args, cfg) -> int:
    path = args.path or cfg.get("input") or str(Path(args.out) / "report.struct")
    m = serial.load(path)
    if not isinstance(m, dict) or "checks" not in m:
        raise ConfigError(f"{path}: not a report file")
    text = render_human(m)
    if not args.quiet:
        sys.stdout.write(text)
    return EXIT_OK if m.get("passed") else EXIT_FAIL


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config)
        if args.command == "report":
            return _cmd_report(args, cfg)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        if seed < 0:
            raise ConfigError("seed must be >= 0")
        tol = tolerance_from(cfg, args)
        run = Run(args.command, cfg, seed, cfg.get("N"), tol)
        try:
            COMMANDS[args.command](run, cfg)
        except ConfigError:
            raise
        except NcfactorError as exc:
            if run.records or args.command not in ("gen", "charfn"):
                run.check(f"aborted: {type(exc).__name__}", np.inf, 0, str(exc))
            else:
                raise
    except (ConfigError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"ncfactor: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NcfactorError as exc:
        print(f"ncfactor: input error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    write_outputs(run, Path(args.out))
    if not args.quiet:
        sys.stdout.write(run.human())
    return EXIT_OK if run.passed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
