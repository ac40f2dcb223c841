"""``itc`` command-line entry point.

Exit codes: 0 on success (Related / Accept / equal), 1 when a check fails
(Reject, NotRelated, a validation or preservation violation, a runtime
error), 2 on usage or input errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import random
import sys
from fractions import Fraction
from importlib import resources
from typing import List, Optional

from . import __version__

OK, FAIL, USAGE = 0, 1, 2


class InputError(Exception):
    pass


def _frac(text: str) -> Fraction:
    """Parse ``1/2^20``, ``1/1048576`` or ``0.001`` as an exact rational."""
    try:
        if "/" in text:
            num, den = text.split("/", 1)
            if "^" in den:
                base, exp = den.split("^", 1)
                return Fraction(int(num), int(base) ** int(exp))
            return Fraction(int(num), int(den))
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}")


def _fj(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _resolve(path: str) -> str:
    """A file path, or the name of a bundled sample program (``coin``)."""
    if os.path.exists(path):
        return path
    bundled = resources.files("itc") / "programs" / f"{path.removesuffix('.itc')}.itc"
    if bundled.is_file():
        return str(bundled)
    return path


def _load(path: str):
    from .lang import parse
    path = _resolve(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}")
    return parse(text, path)


def _emit(args, obj) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2)
    print(text)
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _passes(text: str) -> List[str]:
    from .passes import PASSES
    names = [p for p in text.split(",") if p] if text else []
    for p in names:
        if p not in PASSES:
            raise InputError(f"unknown pass {p!r}; choose from {', '.join(PASSES)}")
    return names


def _arg_value(args):
    from .lang import Word
    return Word(args.arg) if args.arg is not None else None


def _entry(p, args):
    from .lang import Word
    if args.fn not in p:
        raise InputError(f"no function named {args.fn!r}")
    f = p[args.fn]
    if f.param is not None and args.arg is None:
        return Word(0)
    return _arg_value(args)


# ---------------------------------------------------------------- subcommands

def _ast(node):
    if dataclasses.is_dataclass(node):
        out = {"node": type(node).__name__}
        for f in dataclasses.fields(node):
            if f.name == "pos":
                continue
            out[f.name] = _ast(getattr(node, f.name))
        return out
    if isinstance(node, tuple):
        return [_ast(x) for x in node]
    return node


def cmd_parse(args) -> int:
    from .lang import pretty
    p = _load(args.file)
    if args.plain:
        print(pretty(p), end="")
    else:
        _emit(args, _ast(p))
    return OK


def cmd_run(args) -> int:
    from .itree import ErrEncountered, FuelExhausted, Rnd, observe
    from .lang import render_value
    from .sem import SemConfig, run_function
    p = _load(args.file)
    arg = _entry(p, args)
    cfg = SemConfig(args.chunk_bits, p)
    rng = random.Random(args.seed)

    def oracle(e):
        if isinstance(e, Rnd):
            return tuple(rng.randrange(1 << args.chunk_bits) for _ in range(e.n))
        raise InputError(f"no answer for event {e!r}")

    def show(trace):
        rows = []
        for s in trace:
            if s.kind == "tau":
                rows.append({"step": "tau"})
            elif s.kind == "vis":
                rows.append({"step": "vis", "event": repr(s.event), "answer": list(s.answer)})
            else:
                mem, v = s.value
                rows.append({"step": "ret", "value": render_value(v), "memory": render_value(mem)})
        return rows

    try:
        trace = observe(run_function(cfg, args.fn, arg), args.fuel, oracle)
    except ErrEncountered as exc:
        _emit(args, {"status": "error", "error": exc.message, "trace": show(exc.trace)})
        return FAIL
    except FuelExhausted as exc:
        _emit(args, {"status": "fuel_exhausted", "trace": show(exc.trace)})
        return FAIL
    if args.plain:
        for row in show(trace):
            print(" ".join(f"{k}={row[k]}" for k in sorted(row)))
        return OK
    _emit(args, {"status": "ok", "trace": show(trace)})
    return OK


def cmd_dist(args) -> int:
    from .lang import render_value
    from .prob import semp
    from .sem import SemConfig, run_function
    p = _load(args.file)
    arg = _entry(p, args)
    cfg = SemConfig(args.chunk_bits, p)
    r = semp(run_function(cfg, args.fn, arg), args.n_max, args.eps, chunk_bits=args.chunk_bits)
    d = r.dist if args.with_memory else r.dist.map(lambda mv: mv[1])
    out = d.to_json()
    out["distribution"] = {render_value(v): _fj(q) for v, q in d.support.items()}
    out["n_used"] = r.n_used
    out["converged"] = r.converged
    _emit(args, out)
    if args.figure:
        from .report import plot_distribution
        rows = sorted(((render_value(v), q) for v, q in d.support.items()), key=lambda x: x[0])
        plot_distribution(rows, args.figure, f"{args.fn} result", d.residual, d.error)
    if args.trace_figure:
        from .report import plot_convergence
        plot_convergence(r.trace, args.trace_figure)
    return OK


def cmd_compile(args) -> int:
    from .lang import pretty
    from .passes import pipeline
    p = _load(args.file)
    keep = [k for k in args.keep.split(",") if k] if args.keep else []
    q, _ = pipeline(p, _passes(args.passes), keep=keep)
    text = pretty(q)
    print(text, end="")
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    return OK


def cmd_validate(args) -> int:
    from .passes import ValidationConfig, ValidationFailure, pipeline
    p = _load(args.file)
    vc = ValidationConfig(chunk_bits=args.chunk_bits, runs=args.runs, seed=args.seed,
                          depth=args.depth, tau_budget=args.tau_budget, n_max=args.n_max,
                          entry=args.fn)
    keep = [k for k in args.keep.split(",") if k] if args.keep else []
    try:
        _, reports = pipeline(p, _passes(args.passes), validate=True, keep=keep, vc=vc)
    except ValidationFailure as exc:
        out = {"status": "failed", "pass": exc.pass_name}
        if args.explain:
            w = exc.witness
            out["witness"] = w.to_json() if hasattr(w, "to_json") else w
        _emit(args, out)
        return FAIL
    _emit(args, {"status": "ok", "passes": [r.to_json() for r in reports]})
    return OK


def _parse_delta(specs: Optional[List[str]]):
    """``f:y=rdi,z=rsi`` entries into {function: RenMap}."""
    from .lang import FrozenMap
    out = {}
    for spec in specs or []:
        if ":" not in spec:
            raise InputError(f"bad --delta {spec!r}; expected FN:SRC=TGT[,SRC=TGT]")
        fn, body = spec.split(":", 1)
        pairs = {}
        for item in filter(None, body.split(",")):
            if "=" not in item:
                raise InputError(f"bad --delta entry {item!r}")
            a, b = item.split("=", 1)
            pairs[a.strip()] = b.strip()
        out[fn.strip()] = FrozenMap(pairs)
    return out


def cmd_alpha(args) -> int:
    from .passes import alpha_check
    src, tgt = _load(args.source), _load(args.target)
    v = alpha_check(src, tgt, _parse_delta(args.delta))
    out = v.to_json()
    if not args.explain and "source" in out:
        out = {k: out[k] for k in ("verdict", "function", "reason")}
    _emit(args, out)
    return OK if v else FAIL


def cmd_rhl(args) -> int:
    from .rhl import RULES, rule_soundness_suite
    rules = [r for r in args.rules.split(",") if r] if args.rules else list(RULES)
    for r in rules:
        if r not in RULES:
            raise InputError(f"unknown rule {r!r}")
    reps = rule_soundness_suite(args.seed, args.instances, rules, pairs=args.pairs)
    rows = [r.to_json() for r in reps]
    ok = all(r.ok for r in reps)
    _emit(args, {"seed": args.seed, "ok": ok, "rules": rows})
    if args.figure:
        from .report import plot_rule_suite
        plot_rule_suite(rows, args.figure)
    return OK if ok else FAIL


def _exp_cfg(args):
    from .crypto import ExperimentConfig
    return ExperimentConfig(chunk_bits=args.chunk_bits, msg_chunks=args.msg_chunks,
                            n_max=args.n_max, policy=args.policy)


def _adversaries(text: str):
    from .crypto import adversary
    try:
        return [adversary(a) for a in text.split(",") if a]
    except KeyError as exc:
        raise InputError(exc.args[0])


def cmd_experiment(args) -> int:
    from .crypto import (ErrorMassPresent, NonConvergent, evaluate, make_challenger)
    p = _load(args.file)
    cfg = _exp_cfg(args)
    ch = make_challenger(p, chunk_bits=cfg.chunk_bits)
    rows = {}
    try:
        for adv in _adversaries(args.adversary):
            rows[adv.name] = evaluate(ch, adv, cfg).to_json()
    except (ErrorMassPresent, NonConvergent) as exc:
        _emit(args, {"status": "failed", "error": str(exc)})
        return FAIL
    _emit(args, {"status": "ok", "results": rows})
    if args.figure:
        from .report import plot_advantages
        pairs = [(k, Fraction(v["advantage"]), Fraction(v["advantage"])) for k, v in rows.items()]
        plot_advantages(pairs, args.figure, "advantage (source only)")
    return OK


def cmd_preserve(args) -> int:
    from .crypto import InitializationViolation, PreservationViolated, preservation_check
    p = _load(args.file)
    cfg = _exp_cfg(args)
    passes = _passes(args.passes)
    reports = []
    try:
        for adv in _adversaries(args.adversary):
            reports.append(preservation_check(p, passes, adv, cfg, depth=args.depth,
                                              tau_budget=args.tau_budget))
    except InitializationViolation as exc:
        _emit(args, {"status": "rejected", "component": exc.component, "reason": exc.detail})
        return FAIL
    except PreservationViolated as exc:
        _emit(args, {"status": "violated", "advantage_src": _fj(exc.adv_src),
                     "advantage_tgt": _fj(exc.adv_tgt), "witness": exc.witness})
        return FAIL
    rows = [r.to_json() for r in reports]
    ok = all(r.equal and r.eutt_verdict == "Related" for r in reports)
    _emit(args, {"status": "ok" if ok else "violated", "reports": rows})
    if args.figure:
        from .report import plot_advantages
        plot_advantages([(r.adversary, r.advantage_src, r.advantage_tgt) for r in reports],
                        args.figure)
    return OK if ok else FAIL


# ---------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="itc", description="Interaction-tree compiler workbench.",
        epilog="FILE is a path or the name of a bundled sample (coin, cp, kem_otp, ...).")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, chunk_bits=8):
        sp.add_argument("-o", "--output", help="also write the output to this file")
        sp.add_argument("--chunk-bits", type=int, default=chunk_bits, choices=range(1, 9),
                        metavar="B", help=f"bits per random chunk (default {chunk_bits})")
        sp.add_argument("--seed", type=int, default=0)

    def entry(sp):
        sp.add_argument("--fn", default="main", help="function to run (default main)")
        sp.add_argument("--arg", type=int, help="argument value for the function's parameter")

    sp = sub.add_parser("parse", help="parse a program and dump its AST")
    sp.add_argument("file", metavar="FILE")
    sp.add_argument("--plain", action="store_true", help="pretty-print instead of JSON")
    sp.add_argument("-o", "--output")
    sp.set_defaults(run=cmd_parse)

    sp = sub.add_parser("run", help="run a function along seeded random answers")
    sp.add_argument("file", metavar="FILE")
    common(sp)
    entry(sp)
    sp.add_argument("--fuel", type=int, default=100_000, help="maximum nodes to force")
    sp.add_argument("--plain", action="store_true")
    sp.set_defaults(run=cmd_run)

    sp = sub.add_parser("dist", help="exact result distribution")
    sp.add_argument("file", metavar="FILE")
    common(sp, chunk_bits=2)
    entry(sp)
    sp.add_argument("--n-max", type=int, default=2 ** 14)
    sp.add_argument("--eps", type=_frac, default=None, help="early-stop threshold, e.g. 1/2^20")
    sp.add_argument("--with-memory", action="store_true", help="keep final memory in outcomes")
    sp.add_argument("--figure", help="write a bar chart of the distribution")
    sp.add_argument("--trace-figure", help="write the returned-mass curve")
    sp.set_defaults(run=cmd_dist)

    sp = sub.add_parser("compile", help="apply passes and print the program")
    sp.add_argument("file", metavar="FILE")
    sp.add_argument("--passes", default="", help="comma-separated: const_prop,dce,inline")
    sp.add_argument("--keep", default="", help="variables dce must keep live at exit")
    sp.add_argument("-o", "--output")
    sp.set_defaults(run=cmd_compile)

    sp = sub.add_parser("validate", help="apply passes with per-pass validation")
    sp.add_argument("file", metavar="FILE")
    common(sp, chunk_bits=2)
    sp.add_argument("--passes", default="")
    sp.add_argument("--keep", default="")
    sp.add_argument("--fn", default="main")
    sp.add_argument("--runs", type=int, default=4, help="generated inputs per pass")
    sp.add_argument("--depth", type=int, default=200)
    sp.add_argument("--tau-budget", type=int, default=1000)
    sp.add_argument("--n-max", type=int, default=2 ** 14)
    sp.add_argument("--explain", action="store_true", help="include failure witnesses")
    sp.set_defaults(run=cmd_validate)

    sp = sub.add_parser("alpha-check", help="check two programs are equal up to renaming")
    sp.add_argument("source")
    sp.add_argument("target")
    sp.add_argument("--delta", action="append",
                    help="initial renaming FN:SRC=TGT[,SRC=TGT] (repeatable)")
    sp.add_argument("--explain", action="store_true")
    sp.add_argument("-o", "--output")
    sp.set_defaults(run=cmd_alpha)

    sp = sub.add_parser("rhl-suite", help="rule soundness on generated instances")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--instances", type=int, default=100)
    sp.add_argument("--pairs", type=int, default=8, help="state pairs per tuple check")
    sp.add_argument("--rules", default="", help="comma-separated subset of rules")
    sp.add_argument("--figure")
    sp.add_argument("-o", "--output")
    sp.set_defaults(run=cmd_rhl)

    for name, fn, help_ in (("experiment", cmd_experiment, "exact IND-CCA advantage"),
                            ("preserve", cmd_preserve, "advantage before and after compilation")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("file", metavar="FILE")
        common(sp, chunk_bits=2)
        sp.add_argument("--adversary", default="constant,replay",
                        help="comma-separated adversaries (constant, replay)")
        sp.add_argument("--msg-chunks", type=int, default=1)
        sp.add_argument("--n-max", type=int, default=2 ** 14)
        sp.add_argument("--policy", choices=("zero", "abort"), default="zero",
                        help="answer to challenge-ciphertext queries")
        sp.add_argument("--figure")
        if name == "preserve":
            sp.add_argument("--passes", default="const_prop,dce,inline")
            sp.add_argument("--depth", type=int, default=200)
            sp.add_argument("--tau-budget", type=int, default=1000)
        sp.set_defaults(run=fn)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    from .lang import DuplicateFunction, UnknownFunction
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else OK
    try:
        return args.run(args)
    except (InputError, SyntaxError, UnknownFunction, DuplicateFunction) as exc:
        print(f"itc: error: {exc}", file=sys.stderr)
        return USAGE
    except Exception as exc:  # missing names, overflow of exact mode, ...
        from .crypto import MissingName
        from .prob import ExactModeOverflow, UnsupportedEvent
        if isinstance(exc, (MissingName, ExactModeOverflow, UnsupportedEvent)):
            print(f"itc: error: {exc}", file=sys.stderr)
            return USAGE
        raise


if __name__ == "__main__":
    sys.exit(main())
