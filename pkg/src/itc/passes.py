"""Front-end passes: constant propagation, dead-code elimination, inlining,
the register-renaming alpha-equivalence check, and a validating pipeline."""
from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .equiv import ERR_LEFT, check_xrutt, equality_contract
from .lang import (ArrRead, Assign, Bool, CallCmd, Const, FrozenMap, FunDef, If, LArr,
                   LMem, LTuple, LVar, MemRead, Op, Program, Rand, Seq, Skip, TupleE, Var,
                   While, Word, expr_vars, flatten, lval_defs, lval_uses, pretty_cmd, seq)
from .rhl import RENAMING, RenMap, run_checker_explain
from .sem import EvalError, SemConfig, _apply, run_function


# ------------------------------------------------------------ constant prop

ConstEnv = Dict[str, object]  # variable -> Word | Bool


def _const_of(v) -> Optional[Const]:
    if isinstance(v, Word):
        return Const(v.v)
    if isinstance(v, Bool):
        return Const(v.b)
    return None


def _value_of(c: Const):
    return Bool(c.value) if isinstance(c.value, bool) else Word(c.value)


def _is_word(e, n: int) -> bool:
    return isinstance(e, Const) and not isinstance(e.value, bool) and e.value == n


def fold_expr(e, env: ConstEnv):
    """Substitute known constants and simplify; never introduces errors."""
    if isinstance(e, Var):
        v = env.get(e.name)
        return _const_of(v) if v is not None else e
    if isinstance(e, Const):
        return e
    if isinstance(e, MemRead):
        return MemRead(fold_expr(e.addr, env))
    if isinstance(e, ArrRead):
        return ArrRead(e.name, fold_expr(e.index, env))
    if isinstance(e, TupleE):
        return TupleE(tuple(fold_expr(x, env) for x in e.items))
    args = tuple(fold_expr(x, env) for x in e.args)
    if all(isinstance(a, Const) for a in args):
        try:
            return _const_of(_apply(e.op, [_value_of(a) for a in args]))
        except EvalError:
            return Op(e.op, args)
    if len(args) == 2:
        a, b = args
        if a == b and _same_types(a, b):
            if e.op in ("==", "<="):
                return Const(True)
            if e.op == "<":
                return Const(False)
            if e.op == "-":
                return Const(0)
        if e.op == "+":
            if _is_word(b, 0):
                return a
            if _is_word(a, 0):
                return b
        if e.op == "-" and _is_word(b, 0):
            return a
        if e.op == "*":
            if _is_word(b, 1):
                return a
            if _is_word(a, 1):
                return b
            if _is_word(a, 0) or _is_word(b, 0):
                return Const(0)
    return Op(e.op, args)


def _same_types(a, b) -> bool:
    # Structural equality ignores Python's True == 1; make it strict for constants.
    if isinstance(a, Const):
        return type(a.value) is type(b.value)
    return True


def _fold_lval(lv, env):
    if isinstance(lv, LArr):
        return LArr(lv.name, fold_expr(lv.index, env))
    if isinstance(lv, LMem):
        return LMem(fold_expr(lv.addr, env))
    if isinstance(lv, LTuple):
        # Tuple components are written in order; index expressions see earlier writes.
        return lv
    return lv


def _kill(env: ConstEnv, names: Iterable[str]) -> ConstEnv:
    names = set(names)
    if not names & env.keys():
        return env
    return {k: v for k, v in env.items() if k not in names}


def _meet(a: ConstEnv, b: ConstEnv) -> ConstEnv:
    return {k: v for k, v in a.items() if b.get(k) == v}


def _is_false(e) -> bool:
    return isinstance(e, Const) and e.value is False


def _cp(c, env: ConstEnv):
    if isinstance(c, Skip):
        return c, env
    if isinstance(c, Seq):
        out = []
        for x in flatten(c):
            x2, env = _cp(x, env)
            out.append(x2)
        return seq(*out), env
    if isinstance(c, Assign):
        e = fold_expr(c.e, env)
        lv = _fold_lval(c.lv, env)
        env = _kill(env, lval_defs(lv))
        if isinstance(lv, LVar) and isinstance(e, Const):
            env = dict(env)
            env[lv.name] = _value_of(e)
        return Assign(lv, e), env
    if isinstance(c, Rand):
        lv = _fold_lval(c.lv, env)
        return Rand(lv, fold_expr(c.e, env)), _kill(env, lval_defs(lv))
    if isinstance(c, CallCmd):
        lv = _fold_lval(c.lv, env)
        return CallCmd(lv, c.fname, fold_expr(c.arg, env)), _kill(env, lval_defs(lv))
    if isinstance(c, If):
        cond = fold_expr(c.cond, env)
        if isinstance(cond, Const) and isinstance(cond.value, bool):
            return _cp(c.then if cond.value else c.orelse, env)
        t, et = _cp(c.then, env)
        f, ef = _cp(c.orelse, env)
        return If(cond, t, f), _meet(et, ef)
    if isinstance(c, While):
        if _is_false(fold_expr(c.cond, env)):
            return Skip(), env
        head = env
        while True:
            _, out = _cp(c.body, head)
            nxt = _meet(head, out)
            if nxt == head:
                break
            head = nxt
        return While(fold_expr(c.cond, head), _cp(c.body, head)[0]), head
    raise TypeError(f"not a command: {c!r}")


def const_prop_cmd(c):
    """Constant-propagate a command, iterated to a fixpoint."""
    for _ in range(64):
        c2, _ = _cp(c, {})
        if c2 == c:
            return c2
        c = c2
    return c


def const_prop(p: Program) -> Program:
    return Program(tuple(_with_body(f, const_prop_cmd(f.body)) for f in p.funs))


def _with_body(f: FunDef, body) -> FunDef:
    return FunDef(f.name, f.param, f.result, body, f.inline, pos=f.pos)


# ------------------------------------------------------------------ dead code

def _assign_kills(lv) -> set:
    """Variables fully overwritten by a write through ``lv``."""
    if isinstance(lv, LVar):
        return {lv.name}
    if isinstance(lv, LTuple):
        return set().union(*(_assign_kills(x) for x in lv.items))
    return set()


def _removable(lv, live: set) -> bool:
    if isinstance(lv, LVar):
        return lv.name not in live
    if isinstance(lv, LArr):
        return lv.name not in live
    if isinstance(lv, LTuple):
        return all(isinstance(x, LVar) and x.name not in live for x in lv.items)
    return False


def _dce(c, live: set):
    """Returns (new command, live-in set)."""
    if isinstance(c, Skip):
        return c, live
    if isinstance(c, Seq):
        out = []
        for x in reversed(flatten(c)):
            x2, live = _dce(x, live)
            out.append(x2)
        return seq(*(x for x in reversed(out) if not isinstance(x, Skip))), live
    if isinstance(c, Assign):
        if _removable(c.lv, live):
            return Skip(), live
        live_in = (live - _assign_kills(c.lv)) | expr_vars(c.e) | lval_uses(c.lv)
        return c, live_in
    if isinstance(c, Rand):
        return c, (live - _assign_kills(c.lv)) | expr_vars(c.e) | lval_uses(c.lv)
    if isinstance(c, CallCmd):
        return c, (live - _assign_kills(c.lv)) | expr_vars(c.arg) | lval_uses(c.lv)
    if isinstance(c, If):
        t, lt = _dce(c.then, live)
        f, lf = _dce(c.orelse, live)
        if isinstance(t, Skip) and isinstance(f, Skip):
            return Skip(), live
        return If(c.cond, t, f), lt | lf | expr_vars(c.cond)
    if isinstance(c, While):
        head = set(live) | expr_vars(c.cond)
        while True:
            _, lb = _dce(c.body, head)
            nxt = head | lb
            if nxt == head:
                break
            head = nxt
        body, _ = _dce(c.body, head)
        return While(c.cond, body), head
    raise TypeError(f"not a command: {c!r}")


def dce_cmd(c, live_out: Iterable[str]):
    return _dce(c, set(live_out))[0]


def dce(p: Program, keep: Iterable[str] = ()) -> Program:
    keep = set(keep)
    return Program(tuple(_with_body(f, dce_cmd(f.body, keep | {f.result})) for f in p.funs))


dead_code_elim = dce


def count_assigns(p: Program) -> int:
    from .lang import walk
    return sum(1 for f in p.funs for c in walk(f.body) if isinstance(c, Assign))


# ------------------------------------------------------------------- inlining

class RecursiveInline(ValueError):
    def __init__(self, fname):
        super().__init__(f"inline function {fname!r} is recursive")
        self.fname = fname


_SUFFIX = re.compile(r"#([0-9]+)$")


def _base(name: str) -> str:
    return name.split("#", 1)[0]


def _rename_expr(e, m):
    if isinstance(e, Var):
        return Var(m(e.name))
    if isinstance(e, Const):
        return e
    if isinstance(e, TupleE):
        return TupleE(tuple(_rename_expr(x, m) for x in e.items))
    if isinstance(e, Op):
        return Op(e.op, tuple(_rename_expr(x, m) for x in e.args))
    if isinstance(e, ArrRead):
        return ArrRead(m(e.name), _rename_expr(e.index, m))
    if isinstance(e, MemRead):
        return MemRead(_rename_expr(e.addr, m))
    raise TypeError(e)


def _rename_lval(lv, m):
    if isinstance(lv, LVar):
        return LVar(m(lv.name))
    if isinstance(lv, LArr):
        return LArr(m(lv.name), _rename_expr(lv.index, m))
    if isinstance(lv, LMem):
        return LMem(_rename_expr(lv.addr, m))
    return LTuple(tuple(_rename_lval(x, m) for x in lv.items))


def rename_cmd(c, m):
    """Apply the variable renaming ``m`` throughout ``c``."""
    if isinstance(c, Skip):
        return c
    if isinstance(c, Seq):
        return seq(*(rename_cmd(x, m) for x in flatten(c)))
    if isinstance(c, Assign):
        return Assign(_rename_lval(c.lv, m), _rename_expr(c.e, m))
    if isinstance(c, Rand):
        return Rand(_rename_lval(c.lv, m), _rename_expr(c.e, m))
    if isinstance(c, CallCmd):
        return CallCmd(_rename_lval(c.lv, m), c.fname, _rename_expr(c.arg, m))
    if isinstance(c, If):
        return If(_rename_expr(c.cond, m), rename_cmd(c.then, m), rename_cmd(c.orelse, m))
    if isinstance(c, While):
        return While(_rename_expr(c.cond, m), rename_cmd(c.body, m))
    raise TypeError(c)


def _max_suffix(p: Program) -> int:
    from .lang import cmd_vars
    best = 0
    for f in p.funs:
        names = cmd_vars(f.body) | {f.result} | ({f.param} if f.param else set())
        for x in names:
            m = _SUFFIX.search(x)
            if m:
                best = max(best, int(m.group(1)))
    return best


class _Inliner:
    def __init__(self, p: Program):
        self.p = p
        self.k = _max_suffix(p)
        self.done: Dict[str, object] = {}
        self.active: List[str] = []

    def body(self, fname: str):
        if fname in self.done:
            return self.done[fname]
        if fname in self.active:
            raise RecursiveInline(fname)
        self.active.append(fname)
        out = self.cmd(self.p[fname].body)
        self.active.pop()
        self.done[fname] = out
        return out

    def cmd(self, c):
        if isinstance(c, Seq):
            return seq(*(self.cmd(x) for x in flatten(c)))
        if isinstance(c, If):
            return If(c.cond, self.cmd(c.then), self.cmd(c.orelse))
        if isinstance(c, While):
            return While(c.cond, self.cmd(c.body))
        if isinstance(c, CallCmd) and c.fname in self.p and self.p[c.fname].inline:
            return self.expand(c)
        return c

    def fresh(self) -> int:
        self.k += 1
        return self.k

    def expand(self, c: CallCmd):
        from .lang import cmd_vars
        f = self.p[c.fname]
        body = self.body(f.name)
        k = self.fresh()
        param = f.param if f.param is not None else "arg"
        names = cmd_vars(body) | {param, f.result}
        # Plain names get the call's suffix; names already carrying one
        # (from nested expansions) get a suffix of their own.
        table = {x: f"{x}#{k}" if "#" not in x else f"{_base(x)}#{self.fresh()}"
                 for x in sorted(names)}
        m = table.__getitem__
        return seq(Assign(LVar(m(param)), c.arg),
                   rename_cmd(body, m),
                   Assign(c.lv, Var(m(f.result))))


def inline_pass(p: Program) -> Program:
    """Replace every call to an inline function by a freshly renamed copy of its body."""
    inl = _Inliner(p)
    funs = []
    for f in p.funs:
        body = inl.body(f.name) if f.inline else inl.cmd(f.body)
        funs.append(_with_body(f, body))
    return Program(tuple(funs))


def inline_calls_left(p: Program) -> List[Tuple[str, str]]:
    from .lang import walk
    return [(f.name, c.fname) for f in p.funs for c in walk(f.body)
            if isinstance(c, CallCmd) and c.fname in p and p[c.fname].inline]


# -------------------------------------------------------------- alpha check

@dataclass
class Accept:
    maps: Dict[str, RenMap]

    def __bool__(self):
        return True

    def to_json(self):
        return {"verdict": "Accept",
                "maps": {f: dict(sorted(d.items())) for f, d in sorted(self.maps.items())}}


@dataclass
class Reject:
    fname: str
    pair: tuple
    reason: str

    def __bool__(self):
        return False

    def to_json(self):
        def show(c):
            return pretty_cmd(c).strip() if c is not None else None
        return {"verdict": "Reject", "function": self.fname, "reason": self.reason,
                "source": show(self.pair[0]), "target": show(self.pair[1])}


def default_delta(fs: FunDef, ft: FunDef) -> RenMap:
    if fs.param is not None and ft.param is not None:
        return FrozenMap({fs.param: ft.param})
    return FrozenMap()


def alpha_check(src: Program, tgt: Program,
                delta0: Optional[Dict[str, RenMap]] = None) -> object:
    """Check that ``tgt`` is ``src`` up to a register renaming."""
    delta0 = delta0 or {}
    if sorted(src.names) != sorted(tgt.names):
        return Reject("", (None, None), "function names differ")
    maps = {}
    for fs in src.funs:
        ft = tgt[fs.name]
        if (fs.param is None) != (ft.param is None):
            return Reject(fs.name, (None, None), "parameter lists differ")
        d0 = delta0.get(fs.name, default_delta(fs, ft))
        d, why = run_checker_explain(RENAMING, FrozenMap(d0), fs.body, ft.body)
        if d is None:
            return Reject(fs.name, (why[0], why[1]), why[2])
        if d.get(fs.result) != ft.result:
            return Reject(fs.name, (None, None),
                          f"result {fs.result} not renamed to {ft.result}")
        maps[fs.name] = d
    return Accept(maps)


# ------------------------------------------------------------------- pipeline

PASSES = {
    "const_prop": lambda p, keep: const_prop(p),
    "dce": lambda p, keep: dce(p, keep),
    "inline": lambda p, keep: inline_pass(p),
}


class ValidationFailure(Exception):
    def __init__(self, pass_name: str, witness):
        super().__init__(f"pass {pass_name} failed validation")
        self.pass_name = pass_name
        self.witness = witness


@dataclass
class PassReport:
    name: str
    checked: int = 0
    xrutt: str = "skipped"
    dist: str = "skipped"

    def to_json(self):
        return {"pass": self.name, "runs": self.checked, "xrutt": self.xrutt,
                "distribution": self.dist}


@dataclass
class ValidationConfig:
    chunk_bits: int = 2
    runs: int = 4
    seed: int = 0
    depth: int = 200
    tau_budget: int = 1000
    n_max: int = 2 ** 14
    entry: str = "main"


def validate_pair(src: Program, tgt: Program, vc: ValidationConfig, name: str = "pass",
                  entries: Optional[Sequence[str]] = None) -> PassReport:
    """Differential check of ``tgt`` against ``src`` on generated inputs."""
    from .gen import gen_mem
    from .prob import semp

    cfg_s, cfg_t = SemConfig(vc.chunk_bits, src), SemConfig(vc.chunk_bits, tgt)
    contract = equality_contract(vc.chunk_bits)
    rep = PassReport(name, xrutt="Related", dist="equal")
    rng = random.Random(vc.seed)
    entries = list(entries) if entries is not None else (
        [vc.entry] if vc.entry in src else src.names)
    any_dist = False
    for fname in entries:
        for _ in range(vc.runs):
            arg = Word(rng.randrange(8)) if src[fname].param is not None else None
            mem = gen_mem(rng, vc.chunk_bits)
            t1 = run_function(cfg_s, fname, arg, mem)
            t2 = run_function(cfg_t, fname, arg, mem)
            r = check_xrutt(t1, t2, _eq, contract, ERR_LEFT, vc.depth, vc.tau_budget)
            rep.checked += 1
            if not r:
                rep.xrutt = type(r).__name__
                raise ValidationFailure(name, r)
            # Exact comparison only where the source is safe and both runs converge.
            d1 = semp(t1, vc.n_max, chunk_bits=vc.chunk_bits)
            if d1.dist.error != 0 or not d1.converged:
                continue
            d2 = semp(t2, vc.n_max, chunk_bits=vc.chunk_bits)
            if not d2.converged:
                continue
            any_dist = True
            if d1.dist.support != d2.dist.support:
                rep.dist = "different"
                raise ValidationFailure(name, {"source": d1.to_json(), "target": d2.to_json()})
    if not any_dist:
        rep.dist = "skipped"
    return rep


def _eq(a, b):
    return a == b


def pipeline(p: Program, passes: Sequence[str], validate: bool = False,
             keep: Iterable[str] = (), vc: Optional[ValidationConfig] = None):
    """Apply ``passes`` in order; returns (program, per-pass reports)."""
    keep = tuple(keep)
    vc = vc or ValidationConfig()
    reports = []
    for name in passes:
        if name not in PASSES:
            raise ValueError(f"unknown pass {name!r}; choose from {', '.join(PASSES)}")
        q = PASSES[name](p, keep)
        if validate:
            reports.append(validate_pair(p, q, vc, name))
        else:
            reports.append(PassReport(name))
        p = q
    return p, reports
