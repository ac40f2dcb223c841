"""Denotational semantics of the core language as interaction trees.

``sem_intra`` leaves ``Call`` events visible; ``sem_inter`` runs callee bodies
through ``interp_mrec``; ``sem_inline`` handles only calls to inline-annotated
functions, one level deep.  Expressions and left-values are pure: the only
effect they can have is an ``Err`` event.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .itree import (Call, Err, ITree, Left, Right, Rnd, bind, interp,
                    interp_mrec, iter_, ret, trigger)
from .lang import (UNDEF, ArrRead, Assign, Bool, Bytes, CallCmd, Command, Const,
                   Expr, FrozenMap, FunDef, If, LArr, LMem, LTuple, LVar, Lval,
                   MachState, MemRead, Op, Program, Rand, Seq, Skip, TupleE, Tup,
                   UnknownFunction, Value, Var, While, Word, walk)


@dataclass(frozen=True)
class SemConfig:
    chunk_bits: int = 8
    program: Optional[Program] = None

    def __post_init__(self):
        if not 1 <= self.chunk_bits <= 8:
            raise ValueError(f"chunk_bits must be in 1..8, got {self.chunk_bits}")


DEFAULT = SemConfig()


class EvalError(Exception):
    """Raised by the pure evaluators; surfaces as an ``Err`` event in trees."""


# ---------------------------------------------------------------- expressions

def _word(v, what: str) -> int:
    if not isinstance(v, Word):
        raise EvalError(f"TypeMismatch {what}: expected word, got {_kind(v)}")
    return v.v


def _bool(v, what: str) -> bool:
    if not isinstance(v, Bool):
        raise EvalError(f"TypeMismatch {what}: expected bool, got {_kind(v)}")
    return v.b


def _kind(v) -> str:
    return type(v).__name__.lower()


def _apply(op: str, args: list) -> Value:
    if op == "+":
        return Word(_word(args[0], op) + _word(args[1], op))
    if op == "-":
        return Word(_word(args[0], op) - _word(args[1], op))
    if op == "*":
        return Word(_word(args[0], op) * _word(args[1], op))
    if op == "<=":
        return Bool(_word(args[0], op) <= _word(args[1], op))
    if op == "<":
        return Bool(_word(args[0], op) < _word(args[1], op))
    if op == "==":
        a, b = args
        if type(a) is not type(b):
            raise EvalError(f"TypeMismatch ==: {_kind(a)} vs {_kind(b)}")
        return Bool(a == b)
    if op == "&&":
        return Bool(_bool(args[0], op) & _bool(args[1], op))
    if op == "||":
        return Bool(_bool(args[0], op) | _bool(args[1], op))
    if op == "!":
        return Bool(not _bool(args[0], op))
    if op == "^":
        a, b = args
        if isinstance(a, Word) and isinstance(b, Word):
            return Word(a.v ^ b.v)
        if isinstance(a, Bool) and isinstance(b, Bool):
            return Bool(a.b != b.b)
        if isinstance(a, Bytes) and isinstance(b, Bytes) and len(a.chunks) == len(b.chunks):
            return Bytes(tuple(x ^ y for x, y in zip(a.chunks, b.chunks)))
        raise EvalError(f"TypeMismatch ^: {_kind(a)} vs {_kind(b)}")
    raise EvalError(f"unknown operator {op}")


def eval_value(e: Expr, s: MachState) -> Value:
    """Evaluate ``e`` in ``s``; sub-expressions left to right, no short-circuit."""
    if isinstance(e, Const):
        return Bool(e.value) if isinstance(e.value, bool) else Word(e.value)
    if isinstance(e, Var):
        v = s.get(e.name)
        if v is UNDEF:
            raise EvalError(f"UndefVariable {e.name}")
        return v
    if isinstance(e, TupleE):
        return Tup(tuple(eval_value(x, s) for x in e.items))
    if isinstance(e, Op):
        return _apply(e.op, [eval_value(x, s) for x in e.args])
    if isinstance(e, ArrRead):
        arr = s.get(e.name)
        if arr is UNDEF:
            raise EvalError(f"UndefVariable {e.name}")
        if not isinstance(arr, Bytes):
            raise EvalError(f"TypeMismatch {e.name}[]: expected bytes, got {_kind(arr)}")
        i = _word(eval_value(e.index, s), "array index")
        if i >= len(arr.chunks):
            raise EvalError(f"ArrayOutOfBounds {e.name}[{i}]")
        return Word(arr.chunks[i])
    if isinstance(e, MemRead):
        a = _word(eval_value(e.addr, s), "address")
        if a not in s.mem:
            raise EvalError(f"UnmappedAddress {a}")
        return Word(s.mem[a])
    raise TypeError(f"not an expression: {e!r}")


def write_value(lv: Lval, v: Value, s: MachState, chunk_bits: int = 8) -> MachState:
    """Write ``v`` through ``lv``; tuple components are written left to right."""
    mask = (1 << chunk_bits) - 1
    if isinstance(lv, LVar):
        return s.set(lv.name, v)
    if isinstance(lv, LArr):
        arr = s.get(lv.name)
        if arr is UNDEF:
            raise EvalError(f"UndefVariable {lv.name}")
        if not isinstance(arr, Bytes):
            raise EvalError(f"TypeMismatch {lv.name}[]: expected bytes, got {_kind(arr)}")
        i = _word(eval_value(lv.index, s), "array index")
        if i >= len(arr.chunks):
            raise EvalError(f"ArrayOutOfBounds {lv.name}[{i}]")
        c = _word(v, "array element")
        chunks = list(arr.chunks)
        chunks[i] = c & mask
        return s.set(lv.name, Bytes(tuple(chunks)))
    if isinstance(lv, LMem):
        a = _word(eval_value(lv.addr, s), "address")
        c = _word(v, "memory write")
        return s.with_mem(s.mem.set(a, c & mask))
    if isinstance(lv, LTuple):
        if not isinstance(v, Tup) or len(v.items) != len(lv.items):
            got = len(v.items) if isinstance(v, Tup) else _kind(v)
            raise EvalError(f"ArityMismatch: {len(lv.items)} left-values, got {got}")
        for sub, x in zip(lv.items, v.items):
            s = write_value(sub, x, s, chunk_bits)
        return s
    raise TypeError(f"not a left-value: {lv!r}")


def _lift(f: Callable, *args) -> ITree:
    try:
        return ret(f(*args))
    except EvalError as exc:
        return trigger(Err(str(exc)))


def eval_expr(e: Expr, s: MachState) -> ITree:
    return _lift(eval_value, e, s)


def write_lval(lv: Lval, v: Value, s: MachState, cfg: SemConfig = DEFAULT) -> ITree:
    return _lift(write_value, lv, v, s, cfg.chunk_bits)


# -------------------------------------------------------------------- commands

def _guard(e: Expr, s: MachState, k_true, k_false) -> ITree:
    def branch(v):
        if not isinstance(v, Bool):
            return trigger(Err(f"TypeMismatch guard: expected bool, got {_kind(v)}"))
        return k_true() if v.b else k_false()

    return bind(eval_expr(e, s), branch)


def sem_intra(c: Command, s: MachState, cfg: SemConfig = DEFAULT) -> ITree:
    """Intraprocedural semantics over {Call, Rnd, Err}."""
    if isinstance(c, Skip):
        return ret(s)
    if isinstance(c, Assign):
        return bind(eval_expr(c.e, s), lambda v: write_lval(c.lv, v, s, cfg))
    if isinstance(c, Rand):
        def sample(n):
            if not isinstance(n, Word):
                return trigger(Err(f"TypeMismatch rand count: expected word, got {_kind(n)}"))
            return bind(trigger(Rnd(n.v)),
                        lambda a: write_lval(c.lv, Bytes(tuple(a)), s, cfg))
        return bind(eval_expr(c.e, s), sample)
    if isinstance(c, Seq):
        return bind(sem_intra(c.first, s, cfg), lambda s1: sem_intra(c.rest, s1, cfg))
    if isinstance(c, If):
        return _guard(c.cond, s,
                      lambda: sem_intra(c.then, s, cfg),
                      lambda: sem_intra(c.orelse, s, cfg))
    if isinstance(c, While):
        def body(st):
            return _guard(c.cond, st,
                          lambda: bind(sem_intra(c.body, st, cfg), lambda s1: ret(Left(s1))),
                          lambda: ret(Right(st)))
        return iter_(body, s)
    if isinstance(c, CallCmd):
        def call(v):
            def after(answer):
                mem, res = answer
                return write_lval(c.lv, res, s.with_mem(mem), cfg)
            return bind(trigger(Call(c.fname, s.mem, v)), after)
        return bind(eval_expr(c.arg, s), call)
    raise TypeError(f"not a command: {c!r}")


def run_body(f: FunDef, mem: FrozenMap, arg, sem: Callable, cfg: SemConfig) -> ITree:
    """Run ``f``'s body on a fresh variable map; answer (final memory, result)."""
    vm = FrozenMap({f.param: arg}) if f.param is not None else FrozenMap()

    def finish(st: MachState):
        r = st.get(f.result)
        if r is UNDEF:
            return trigger(Err(f"UndefVariable {f.result}"))
        return ret((st.mem, r))

    return bind(sem(f.body, MachState(vm, mem), cfg), finish)


def handler_call(cfg: SemConfig) -> Callable[[Call], ITree]:
    prog = cfg.program

    def handle(e: Call) -> ITree:
        if prog is None or e.fname not in prog:
            return trigger(Err(f"UnknownFunction {e.fname}"))
        return run_body(prog[e.fname], e.mem, e.arg, sem_intra, cfg)

    return handle


def _handler_for(cfg: SemConfig):
    # One handler object per configuration keeps tree keys stable across calls.
    h = cfg.__dict__.get("_call_handler")
    if h is None:
        h = handler_call(cfg)
        object.__setattr__(cfg, "_call_handler", h)
    return h


def sem_inter(c: Command, s: MachState, cfg: SemConfig) -> ITree:
    """Interprocedural semantics over {Rnd, Err}."""
    return interp_mrec(_handler_for(cfg), sem_intra(c, s, cfg))


def handler_inline(cfg: SemConfig) -> Callable:
    prog = cfg.program
    call = _handler_for(cfg)

    def handle(e):
        if not isinstance(e, Call):
            return None
        if prog is not None and e.fname in prog and prog[e.fname].inline:
            return call(e)
        return trigger(e)

    return handle


def sem_inline(c: Command, s: MachState, cfg: SemConfig) -> ITree:
    """One-step inlining semantics: inline calls run one level, others stay."""
    h = cfg.__dict__.get("_inline_handler")
    if h is None:
        h = handler_inline(cfg)
        object.__setattr__(cfg, "_inline_handler", h)
    return interp(h, sem_intra(c, s, cfg))


def run_function(cfg: SemConfig, fname: str, arg=None, mem: Optional[FrozenMap] = None,
                 sem: Callable = sem_inter) -> ITree:
    """Tree of (final memory, result value) for a top-level run of ``fname``."""
    prog = cfg.program
    if prog is None or fname not in prog:
        raise UnknownFunction(fname)
    return run_body(prog[fname], mem if mem is not None else FrozenMap(), arg, sem, cfg)


# ------------------------------------------------------------ partial evaluator

def _event_free(c: Command) -> bool:
    return not any(isinstance(x, (While, Rand, CallCmd)) for x in walk(c))


def peval(c: Command, s: MachState, cfg: SemConfig = DEFAULT) -> Optional[MachState]:
    """Evaluate a loop- and event-free command directly; None on any failure."""
    if not _event_free(c):
        return None
    try:
        return _peval(c, s, cfg.chunk_bits)
    except EvalError:
        return None


def _peval(c: Command, s: MachState, chunk_bits: int) -> MachState:
    if isinstance(c, Skip):
        return s
    if isinstance(c, Assign):
        return write_value(c.lv, eval_value(c.e, s), s, chunk_bits)
    if isinstance(c, Seq):
        return _peval(c.rest, _peval(c.first, s, chunk_bits), chunk_bits)
    if isinstance(c, If):
        g = eval_value(c.cond, s)
        if not isinstance(g, Bool):
            raise EvalError("TypeMismatch guard")
        return _peval(c.then if g.b else c.orelse, s, chunk_bits)
    raise EvalError(f"not event-free: {c!r}")
