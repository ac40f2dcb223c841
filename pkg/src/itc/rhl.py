"""Relational Hoare tuples: semantic validity checks and the checker framework.

A command tuple ``{P} c1 ~ c2 {Q}`` is checked by sampling pre-related state
pairs from ``P``'s generator and running the bounded xrutt checker on the two
semantics with ``Q`` as the result relation.  Validity over a finite sample is
a testing stand-in for the universally quantified definition; every run is
seeded.
"""
from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass
from typing import Any, Callable, Iterable, List, Optional, Sequence

from .equiv import (DEFAULT_DEPTH, DEFAULT_TAU_BUDGET, ERR_LEFT, NO_CUTOFFS, RELATED,
                    BudgetExhausted, Related, Cutoffs, EventContract, NotRelated, check_xrutt,
                    equality_contract)
from .gen import VARS, gen_mem, gen_state, gen_word
from .itree import Call, Err, Rnd, rnd_answers
from .lang import (ArrRead, Assign, CallCmd, Const, Expr, FrozenMap, If, LArr, LMem,
                   LTuple, LVar, Lval, MachState, MemRead, Op, Rand, Seq, Skip, TupleE,
                   Var, While, Word, flatten, render_value)
from .sem import SemConfig, run_function, sem_inter, sem_intra

DEFAULT_PAIRS = 64


class EmptyPrecondition(ValueError):
    pass


# ------------------------------------------------------------------ relations

@dataclass
class Rel:
    """A decidable binary relation with a generator of related pairs.

    ``gen(rng)`` proposes a pair; proposals that fail ``holds`` are dropped,
    so a generator only needs to be biased toward the relation.
    """

    holds: Callable[[Any, Any], bool]
    gen: Callable[[random.Random], Optional[tuple]]
    name: str = "rel"

    def sample(self, rng: random.Random, n: int, tries: Optional[int] = None) -> list:
        out = []
        tries = tries if tries is not None else 20 * n
        for _ in range(tries):
            if len(out) >= n:
                break
            p = self.gen(rng)
            if p is not None and self.holds(*p):
                out.append(p)
        return out

    def __and__(self, other: "Rel") -> "Rel":
        return Rel(lambda a, b: self.holds(a, b) and other.holds(a, b), self.gen,
                   f"({self.name} & {other.name})")

    def where(self, pred: Callable[[Any, Any], bool], name: str = "cond") -> "Rel":
        return Rel(lambda a, b: self.holds(a, b) and pred(a, b), self.gen,
                   f"({self.name} & {name})")


StateRel = Rel
ValueRel = Rel


def eq_on(names: Iterable[str], universe: Sequence[str] = VARS, mem: bool = True,
          chunk_bits: int = 2) -> Rel:
    """States agreeing on ``names`` (and on memory when ``mem``)."""
    names = tuple(sorted(set(names)))
    others = [x for x in universe if x not in names]

    def holds(s1: MachState, s2: MachState) -> bool:
        if mem and s1.mem != s2.mem:
            return False
        return all(s1.get(x) == s2.get(x) for x in names)

    def gen(rng):
        s1 = gen_state(rng, tuple(universe) + tuple(x for x in names if x not in universe),
                       chunk_bits)
        s2 = s1
        for x in others:
            if rng.random() < 0.5:
                s2 = s2.set(x, gen_word(rng))
        if not mem and rng.random() < 0.5:
            s2 = s2.with_mem(gen_mem(rng, chunk_bits))
        return s1, s2

    return Rel(holds, gen, f"eq_on{{{','.join(names)}}}")


def eq_all(universe: Sequence[str] = VARS, chunk_bits: int = 2) -> Rel:
    def gen(rng):
        s = gen_state(rng, universe, chunk_bits)
        return s, s

    return Rel(lambda s1, s2: s1 == s2, gen, "eq")


def compose_eq(a: Iterable[str], b: Iterable[str], **kw) -> Rel:
    """``eq_on(a) ; eq_on(b)`` as a relation: agreement on the intersection."""
    return eq_on(set(a) & set(b), **kw)


# --------------------------------------------------------------------- tuples

def intra(cfg: SemConfig) -> Callable:
    return lambda c, s: sem_intra(c, s, cfg)


def inter(cfg: SemConfig) -> Callable:
    return lambda c, s: sem_inter(c, s, cfg)


def check_cmd_tuple(sem_L: Callable, sem_R: Callable, c1, c2, pre: Rel, post: Rel,
                    contract: Optional[EventContract] = None, cutoffs: Cutoffs = NO_CUTOFFS,
                    pairs: int = DEFAULT_PAIRS, seed: int = 0, depth: int = DEFAULT_DEPTH,
                    tau_budget: int = DEFAULT_TAU_BUDGET, chunk_bits: int = 2,
                    allow_calls: bool = False):
    """Check ``{pre} c1 ~ c2 {post}`` on generated pre-related state pairs."""
    rng = random.Random(seed)
    sample = pre.sample(rng, pairs)
    if not sample:
        raise EmptyPrecondition(f"no state pairs satisfy {pre.name}")
    contract = contract or equality_contract(chunk_bits)
    exhausted = None
    for s1, s2 in sample:
        r = check_xrutt(sem_L(c1, s1), sem_R(c2, s2), post.holds, contract, cutoffs,
                        depth, tau_budget, allow_calls)
        if isinstance(r, NotRelated):
            return dataclasses.replace(r, context={
                "state_pair": [render_value(s1), render_value(s2)], "seed": seed})
        if isinstance(r, BudgetExhausted) and exhausted is None:
            exhausted = r
    return exhausted or RELATED


@dataclass
class FunSpec:
    """Relational spec of a function pair on (memory, argument) and (memory, result)."""

    f: str
    g: str
    pre: Rel
    post: Rel


def io_equality(chunk_bits: int = 2, args: int = 8) -> tuple:
    """Pre/post relations demanding equal inputs and equal outputs."""

    def gen(rng):
        x = (gen_mem(rng, chunk_bits), Word(rng.randrange(args)))
        return x, x

    pre = Rel(lambda a, b: a == b, gen, "io_eq")
    post = Rel(lambda a, b: a == b, gen, "io_eq")
    return pre, post


def check_prog_tuple(p1, p2, specs: Sequence[FunSpec], contract: Optional[EventContract] = None,
                     cutoffs: Cutoffs = NO_CUTOFFS, pairs: int = 16, seed: int = 0,
                     depth: int = DEFAULT_DEPTH, tau_budget: int = DEFAULT_TAU_BUDGET,
                     chunk_bits: int = 2):
    """Check every function pair of ``specs`` on the interprocedural semantics."""
    cfg1, cfg2 = SemConfig(chunk_bits, p1), SemConfig(chunk_bits, p2)
    contract = contract or equality_contract(chunk_bits)
    exhausted = None
    for spec in specs:
        rng = random.Random(seed)
        sample = spec.pre.sample(rng, pairs)
        if not sample:
            raise EmptyPrecondition(f"no inputs satisfy {spec.pre.name} for {spec.f}/{spec.g}")
        for (m1, a1), (m2, a2) in sample:
            t1 = run_function(cfg1, spec.f, a1, m1)
            t2 = run_function(cfg2, spec.g, a2, m2)
            r = check_xrutt(t1, t2, spec.post.holds, contract, cutoffs, depth, tau_budget)
            if isinstance(r, NotRelated):
                return dataclasses.replace(r, context={
                    "functions": [spec.f, spec.g],
                    "inputs": [render_value((m1, a1)), render_value((m2, a2))],
                    "seed": seed})
            if isinstance(r, BudgetExhausted) and exhausted is None:
                exhausted = r
    return exhausted or RELATED


def call_contract(chunk_bits: int = 2, results: Sequence[int] = (0, 1, 2)) -> EventContract:
    """Equality contract that also answers Call events from a finite sample.

    A call is answered with its own memory, or that memory with address 0
    flipped, paired with each of ``results``.
    """

    def enum(e):
        if isinstance(e, Rnd):
            return list(rnd_answers(e.n, chunk_bits))
        if isinstance(e, Err):
            return []
        if isinstance(e, Call):
            mems = [e.mem, e.mem.set(0, (e.mem.get(0, 0) + 1) % (1 << chunk_bits))]
            return [(m, Word(v)) for m in mems for v in results]
        raise ValueError(f"no answers for {e!r}")

    return equality_contract(chunk_bits, enum)


# --------------------------------------------------------- checker framework

@dataclass
class CheckerIface:
    """An abstract domain with expression and left-value checkers."""

    interp: Callable[[Any], Rel]
    chk_e: Callable[[Any, Expr, Expr], Optional[Any]]
    chk_lv: Callable[[Any, Lval, Lval], Optional[Any]]
    meet: Callable[[Any, Any], Any]
    leq: Callable[[Any, Any], bool]
    s_rel: Callable[[Any, Any], bool]
    name: str = "checker"


RenMap = FrozenMap


def _ren_expr(d: RenMap, e1, e2) -> bool:
    stack = [(e1, e2)]
    while stack:
        a, b = stack.pop()
        if isinstance(a, Const):
            # Const(True) == Const(1) in Python; compare types as well.
            if not isinstance(b, Const) or type(a.value) is not type(b.value) or a.value != b.value:
                return False
        elif isinstance(a, Var):
            if not isinstance(b, Var) or d.get(a.name) != b.name:
                return False
        elif isinstance(a, Op):
            if not isinstance(b, Op) or a.op != b.op or len(a.args) != len(b.args):
                return False
            stack.extend(zip(a.args, b.args))
        elif isinstance(a, TupleE):
            if not isinstance(b, TupleE) or len(a.items) != len(b.items):
                return False
            stack.extend(zip(a.items, b.items))
        elif isinstance(a, ArrRead):
            if not isinstance(b, ArrRead) or d.get(a.name) != b.name:
                return False
            stack.append((a.index, b.index))
        elif isinstance(a, MemRead):
            if not isinstance(b, MemRead):
                return False
            stack.append((a.addr, b.addr))
        else:
            return False
    return True


def ren_chk_e(d: RenMap, e1, e2) -> Optional[RenMap]:
    return d if _ren_expr(d, e1, e2) else None


def ren_chk_lv(d: RenMap, lv1, lv2) -> Optional[RenMap]:
    if isinstance(lv1, LVar) and isinstance(lv2, LVar):
        x, y = lv1.name, lv2.name
        kept = {k: v for k, v in d.items() if v != y and k != x}
        kept[x] = y
        return FrozenMap(kept)
    if isinstance(lv1, LArr) and isinstance(lv2, LArr):
        if d.get(lv1.name) != lv2.name or not _ren_expr(d, lv1.index, lv2.index):
            return None
        return d
    if isinstance(lv1, LMem) and isinstance(lv2, LMem):
        return d if _ren_expr(d, lv1.addr, lv2.addr) else None
    if isinstance(lv1, LTuple) and isinstance(lv2, LTuple):
        if len(lv1.items) != len(lv2.items):
            return None
        for a, b in zip(lv1.items, lv2.items):
            d = ren_chk_lv(d, a, b)
            if d is None:
                return None
        return d
    return None


def ren_meet(d1: RenMap, d2: RenMap) -> RenMap:
    return FrozenMap({k: v for k, v in d1.items() if d2.get(k) == v})


def ren_leq(d1: RenMap, d2: RenMap) -> bool:
    """``d1`` carries no fact missing from ``d2``."""
    return all(d2.get(k) == v for k, v in d1.items())


def csim(d: RenMap, universe_src: Sequence[str] = VARS,
         universe_tgt: Optional[Sequence[str]] = None, chunk_bits: int = 2) -> Rel:
    """Equal memories, and ``s1(x) == s2(d[x])`` on the domain of ``d``."""
    universe_tgt = tuple(universe_tgt) if universe_tgt is not None else tuple(universe_src)
    tgt_names = tuple(dict.fromkeys(tuple(universe_tgt) + tuple(d.values())))
    src_names = tuple(dict.fromkeys(tuple(universe_src) + tuple(d.keys())))

    def holds(s1: MachState, s2: MachState) -> bool:
        return s1.mem == s2.mem and all(s1.get(x) == s2.get(y) for x, y in d.items())

    def gen(rng):
        s2 = gen_state(rng, tgt_names, chunk_bits)
        s1 = gen_state(rng, src_names, chunk_bits).with_mem(s2.mem)
        for x, y in d.items():
            s1 = s1.set(x, s2.get(y))
        return s1, s2

    body = ", ".join(f"{k}->{v}" for k, v in sorted(d.items()))
    return Rel(holds, gen, f"csim{{{body}}}")


RENAMING = CheckerIface(
    interp=csim,
    chk_e=ren_chk_e,
    chk_lv=ren_chk_lv,
    meet=ren_meet,
    leq=ren_leq,
    s_rel=lambda v1, v2: v1 == v2,
    name="renaming",
)

MAX_ITER = 32


class _Mismatch(Exception):
    def __init__(self, c1, c2, reason):
        super().__init__(reason)
        self.pair = (c1, c2)
        self.reason = reason


def run_checker(iface: CheckerIface, d0, c1, c2, max_iter: int = MAX_ITER):
    """Output domain of a checker derivation for ``c1 ~ c2``, or None."""
    try:
        return _run(iface, d0, c1, c2, max_iter)
    except _Mismatch:
        return None


def run_checker_explain(iface: CheckerIface, d0, c1, c2, max_iter: int = MAX_ITER):
    """Like :func:`run_checker` but returns ``(domain, None)`` or ``(None, (c1, c2, reason))``."""
    try:
        return _run(iface, d0, c1, c2, max_iter), None
    except _Mismatch as m:
        return None, (m.pair[0], m.pair[1], m.reason)


def _need(d, c1, c2, reason):
    if d is None:
        raise _Mismatch(c1, c2, reason)
    return d


def _run(iface, d, c1, c2, max_iter):
    if isinstance(c1, Seq) or isinstance(c2, Seq):
        xs, ys = flatten(c1), flatten(c2)
        if len(xs) != len(ys):
            raise _Mismatch(c1, c2, "sequences differ in length")
        for a, b in zip(xs, ys):
            d = _run(iface, d, a, b, max_iter)
        return d
    if isinstance(c1, Skip) and isinstance(c2, Skip):
        return d
    if isinstance(c1, Assign) and isinstance(c2, Assign):
        d = _need(iface.chk_e(d, c1.e, c2.e), c1, c2, "expressions differ")
        return _need(iface.chk_lv(d, c1.lv, c2.lv), c1, c2, "left-values differ")
    if isinstance(c1, Rand) and isinstance(c2, Rand):
        d = _need(iface.chk_e(d, c1.e, c2.e), c1, c2, "sample sizes differ")
        return _need(iface.chk_lv(d, c1.lv, c2.lv), c1, c2, "left-values differ")
    if isinstance(c1, CallCmd) and isinstance(c2, CallCmd):
        if c1.fname != c2.fname:
            raise _Mismatch(c1, c2, "callees differ")
        d = _need(iface.chk_e(d, c1.arg, c2.arg), c1, c2, "arguments differ")
        return _need(iface.chk_lv(d, c1.lv, c2.lv), c1, c2, "left-values differ")
    if isinstance(c1, If) and isinstance(c2, If):
        d = _need(iface.chk_e(d, c1.cond, c2.cond), c1, c2, "guards differ")
        dt = _run(iface, d, c1.then, c2.then, max_iter)
        de = _run(iface, d, c1.orelse, c2.orelse, max_iter)
        return iface.meet(dt, de)
    if isinstance(c1, While) and isinstance(c2, While):
        inv = d
        for _ in range(max_iter):
            dg = _need(iface.chk_e(inv, c1.cond, c2.cond), c1, c2, "guards differ")
            db = _run(iface, dg, c1.body, c2.body, max_iter)
            if iface.leq(inv, db):
                return dg
            inv = iface.meet(inv, db)
        raise _Mismatch(c1, c2, "loop invariant not stable")
    raise _Mismatch(c1, c2, "commands differ in shape")


# -------------------------------------------------------- rule soundness suite

RULES = ("Skip", "Seq", "Assign", "Case", "While", "Rand", "Call", "Assign_L", "Case_L",
         "Conseq", "Trans", "Rec-bounded", "Assign_L-specialized", "If_L-prologue", "If_b",
         "Unroll_L", "Assign_chk", "Case_chk")


@dataclass
class Instance:
    """Premises (thunks returning a verdict or bool) and a conclusion thunk."""

    premises: List[Callable[[], Any]]
    conclusion: Callable[[], Any]
    describe: str = ""


@dataclass
class RuleReport:
    rule: str
    instances: int = 0
    attempts: int = 0
    failures: list = dataclasses.field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self):
        return {"rule": self.rule, "instances": self.instances, "attempts": self.attempts,
                "failures": self.failures}


class _Suite:
    """Instance builders for each rule; every builder returns an Instance or None."""

    def __init__(self, pairs: int, chunk_bits: int = 2):
        self.pairs = pairs
        self.cb = chunk_bits
        self.cfg = SemConfig(chunk_bits)
        self.S = intra(self.cfg)

    # helpers
    def tup(self, c1, c2, pre, post, sem_L=None, sem_R=None, cut=ERR_LEFT, contract=None,
            allow_calls=False, seed=0):
        def run():
            return check_cmd_tuple(sem_L or self.S, sem_R or self.S, c1, c2, pre, post,
                                   contract, cut, self.pairs, seed, chunk_bits=self.cb,
                                   allow_calls=allow_calls)
        return run

    def cmd(self, rng, rands=1, loops=0, names=VARS):
        from .gen import gen_cmd
        return gen_cmd(rng, 2, names, rands=rands, loops=loops, size=3)

    def subset(self, rng, names=VARS):
        return [x for x in names if rng.random() < 0.6]

    def peval_rel(self, c, post: Rel, left_only=False, base: Optional[Rel] = None) -> Rel:
        from .sem import peval

        def holds(s1, s2):
            t1 = peval(c, s1, self.cfg)
            if t1 is None:
                return False
            t2 = s2 if left_only else peval(c, s2, self.cfg)
            return t2 is not None and post.holds(t1, t2)

        base = base or eq_all(chunk_bits=self.cb)
        return Rel(holds, base.gen, f"wp({post.name})")

    def guard_rel(self, base: Rel, g, value: bool) -> Rel:
        from .sem import EvalError, eval_value

        def holds(s1, s2):
            try:
                v1, v2 = eval_value(g, s1), eval_value(g, s2)
            except EvalError:
                return False
            return v1.b is value and v2.b is value

        return base.where(holds, f"guard={value}")

    # rules
    def Skip(self, rng):
        P = eq_on(self.subset(rng), chunk_bits=self.cb)
        return Instance([], self.tup(Skip(), Skip(), P, P), P.name)

    def Seq(self, rng):
        from .passes import const_prop_cmd, dce_cmd
        V = self.subset(rng)
        c1 = self.cmd(rng)
        c2 = const_prop_cmd(c1)
        d1 = self.cmd(rng)
        d2 = dce_cmd(d1, V)
        E, Q = eq_all(chunk_bits=self.cb), eq_on(V, chunk_bits=self.cb)
        return Instance([self.tup(c1, c2, E, E), self.tup(d1, d2, E, Q)],
                        self.tup(Seq(c1, d1), Seq(c2, d2), E, Q))

    def Assign(self, rng):
        from .gen import gen_wexpr
        from .passes import fold_expr
        x = rng.choice(VARS)
        e1 = gen_wexpr(rng, 2, VARS)
        e2 = fold_expr(e1, {})
        Q = eq_on(self.subset(rng), chunk_bits=self.cb)
        # Weakest precondition of the pair of assignments, evaluated semantically.
        from .sem import EvalError, eval_value, write_value

        def holds(s1, s2):
            try:
                t1 = write_value(LVar(x), eval_value(e1, s1), s1, self.cb)
                t2 = write_value(LVar(x), eval_value(e2, s2), s2, self.cb)
            except EvalError:
                return False
            return Q.holds(t1, t2)

        P = Rel(holds, eq_on(VARS, chunk_bits=self.cb).gen, "wp")
        return Instance([], self.tup(Assign(LVar(x), e1), Assign(LVar(x), e2), P, Q))

    def Case(self, rng):
        from .gen import gen_bexpr
        from .passes import const_prop_cmd
        P = eq_all(chunk_bits=self.cb)
        Q = eq_on(self.subset(rng), chunk_bits=self.cb)
        g = gen_bexpr(rng, 1, VARS)
        c1, d1 = self.cmd(rng), self.cmd(rng)
        c2, d2 = const_prop_cmd(c1), const_prop_cmd(d1)
        return Instance(
            [self.tup(c1, c2, self.guard_rel(P, g, True), Q),
             self.tup(d1, d2, self.guard_rel(P, g, False), Q),
             self._synchronous(P, g, g)],
            self.tup(If(g, c1, d1), If(g, c2, d2), P, Q))

    def _synchronous(self, P: Rel, g1, g2):
        from .sem import EvalError, eval_value

        def run():
            for s1, s2 in P.sample(random.Random(1), self.pairs):
                try:
                    if eval_value(g1, s1) != eval_value(g2, s2):
                        return False
                except EvalError:
                    return False
            return True
        return run

    def _loop(self, rng):
        names = VARS + ("k",)
        body = seq_(self.cmd(rng, rands=0), Assign(LVar("k"), Op("+", (Var("k"), Const(1)))))
        g = Op("<", (Var("k"), Const(rng.randint(0, 3))))
        return names, g, body

    def While(self, rng):
        from .passes import const_prop_cmd
        names, g, body = self._loop(rng)
        I = eq_all(names, self.cb)
        body2 = const_prop_cmd(body)
        return Instance(
            [self.tup(body, body2, self.guard_rel(I, g, True), I), self._synchronous(I, g, g)],
            self.tup(While(g, body), While(g, body2), I, self.guard_rel(I, g, False)))

    def Rand(self, rng):
        x1, x2 = rng.choice(VARS), rng.choice(VARS)
        rest = [v for v in self.subset(rng) if v not in (x1, x2)]
        y = rng.choice(VARS)
        n2 = rng.choice((Const(1), Op("+", (Op("-", (Var(y), Var(y))), Const(1)))))
        P = eq_on(rest + [y], chunk_bits=self.cb)
        base = eq_on(rest, chunk_bits=self.cb)
        Q = base.where(lambda s1, s2: s1.get(x1) == s2.get(x2), f"{x1}={x2}")
        counts = self._synchronous(P, Const(1), n2)
        return Instance([counts], self.tup(Rand(LVar(x1), Const(1)), Rand(LVar(x2), n2), P, Q))

    def Call(self, rng):
        from .gen import gen_program, gen_wexpr
        from .passes import const_prop, dce
        p = gen_program(rng, n_funs=2, rands=1, inline_prob=0.0)
        q = dce(const_prop(p))
        pre, post = io_equality(self.cb)
        spec = [FunSpec("f0", "f0", pre, post)]
        x = rng.choice(VARS)
        arg = gen_wexpr(rng, 1, VARS)
        c = CallCmd(LVar(x), "f0", arg)
        E = eq_all(chunk_bits=self.cb)
        cfg1, cfg2 = SemConfig(self.cb, p), SemConfig(self.cb, q)

        def premise():
            return check_prog_tuple(p, q, spec, cutoffs=ERR_LEFT, pairs=self.pairs,
                                    chunk_bits=self.cb)
        return Instance([premise], self.tup(c, c, E, E, inter(cfg1), inter(cfg2)))

    def Assign_L(self, rng):
        from .gen import gen_wexpr
        V = self.subset(rng)
        x = rng.choice(VARS)
        if x in V and rng.random() < 0.7:
            V.remove(x)
        c = Assign(LVar(x), gen_wexpr(rng, 2, VARS))
        Q = eq_on(V, chunk_bits=self.cb)
        P = self.peval_rel(c, Q, left_only=True, base=eq_on(VARS, chunk_bits=self.cb))
        return Instance([], self.tup(c, Skip(), P, Q))

    def Case_L(self, rng):
        from .gen import gen_bexpr, gen_wexpr
        from .passes import const_prop_cmd
        V = self.subset(rng)
        dead = [x for x in VARS if x not in V] or ["z"]
        c = self.cmd(rng)
        c1 = const_prop_cmd(c)
        d1 = seq_(c, Assign(LVar(rng.choice(dead)), gen_wexpr(rng, 1, VARS)))
        g = gen_bexpr(rng, 1, VARS)
        P, Q = eq_all(chunk_bits=self.cb), eq_on(V, chunk_bits=self.cb)
        return Instance([self.tup(c1, c, self.guard_rel(P, g, True), Q),
                         self.tup(d1, c, self.guard_rel(P, g, False), Q)],
                        self.tup(If(g, c1, d1), c, P, Q))

    def Conseq(self, rng):
        from .passes import dce_cmd
        C = self.subset(rng)
        C2 = [x for x in C if rng.random() < 0.6]
        c = self.cmd(rng)
        c2 = dce_cmd(c, C)
        P1, Q1 = eq_on(VARS, chunk_bits=self.cb), eq_on(C, chunk_bits=self.cb)
        P, Q = eq_all(chunk_bits=self.cb), eq_on(C2, chunk_bits=self.cb)
        return Instance([self.tup(c, c2, P1, Q1), self._implies(P, P1), self._implies(Q1, Q)],
                        self.tup(c, c2, P, Q))

    def _implies(self, A: Rel, B: Rel):
        def run():
            return all(B.holds(s1, s2) for s1, s2 in A.sample(random.Random(2), self.pairs))
        return run

    def Trans(self, rng):
        from .passes import const_prop_cmd, dce_cmd
        B = self.subset(rng)
        B1 = sorted(set(B) | set(self.subset(rng)))
        c1 = self.cmd(rng)
        c2 = const_prop_cmd(c1)
        c3 = dce_cmd(c2, B)
        A = eq_on(VARS, chunk_bits=self.cb)
        return Instance([self.tup(c1, c2, A, eq_on(B1, chunk_bits=self.cb)),
                         self.tup(c2, c3, A, eq_on(B, chunk_bits=self.cb))],
                        self.tup(c1, c3, compose_eq(VARS, VARS, chunk_bits=self.cb),
                                 compose_eq(B1, B, chunk_bits=self.cb)))

    def Rec_bounded(self, rng):
        from .gen import gen_recursive_program
        from .passes import const_prop, dce
        p = gen_recursive_program(rng)
        q = dce(const_prop(p))
        pre, post = io_equality(self.cb, args=4)
        specs = [FunSpec(f, f, pre, post) for f in p.names]
        contract = call_contract(self.cb)
        premises = []
        for f in p.names:
            f1, f2 = p[f], q[f]

            def start(rng, f1=f1):
                s = MachState(FrozenMap({f1.param: Word(rng.randrange(4))}), gen_mem(rng, self.cb))
                return s, s

            body_pre = Rel(lambda s1, s2: s1 == s2, start, "entry")
            body_post = Rel(lambda s1, s2, r1=f1.result, r2=f2.result:
                            s1.mem == s2.mem and s1.get(r1) == s2.get(r2), start, "exit")
            premises.append(self.tup(f1.body, f2.body, body_pre, body_post,
                                     contract=contract, allow_calls=True))

        def conclusion():
            return check_prog_tuple(p, q, specs, cutoffs=ERR_LEFT, pairs=self.pairs,
                                    chunk_bits=self.cb)
        return Instance(premises, conclusion)

    def Assign_L_specialized(self, rng):
        from .gen import gen_wexpr
        V = self.subset(rng)
        dead = [x for x in VARS if x not in V]
        if not dead:
            return None
        # The right-hand side may read an undefined variable; Err is a left cutoff.
        e = gen_wexpr(rng, 2, VARS + ("undef",))
        c = Assign(LVar(rng.choice(dead)), e)
        P = eq_on(V, chunk_bits=self.cb)
        return Instance([lambda: all(x not in V for x in lval_names(c.lv))],
                        self.tup(c, Skip(), P, P))

    def If_L_prologue(self, rng):
        from .gen import gen_bexpr
        from .passes import const_prop_cmd, fold_expr
        fixed = [x for x in VARS if rng.random() < 0.5] or [VARS[0]]
        consts = {x: rng.randrange(8) for x in fixed}
        c0 = seq_(*(Assign(LVar(x), Const(v)) for x, v in consts.items()))
        g = gen_bexpr(rng, 1, fixed)
        c1, d1 = self.cmd(rng), self.cmd(rng)
        E = eq_all(chunk_bits=self.cb)
        # The prologue determines the guard exactly when the guard folds to a
        # boolean under the prologue's constants (memory reads never fold).
        folded = fold_expr(g, {x: Word(v) for x, v in consts.items()})
        determined = isinstance(folded, Const) and isinstance(folded.value, bool)
        b = folded.value if determined else True
        target = const_prop_cmd(seq_(c0, c1 if b else d1))
        return Instance([lambda: determined, self.tup(seq_(c0, c1 if b else d1), target, E, E)],
                        self.tup(seq_(c0, If(g, c1, d1)), target, E, E))

    def If_b(self, rng):
        from .gen import gen_bexpr
        from .passes import const_prop_cmd
        g = gen_bexpr(rng, 1, VARS)
        b = rng.random() < 0.5
        P = self.guard_rel(eq_all(chunk_bits=self.cb), g, b)
        c1, d1 = self.cmd(rng), self.cmd(rng)
        c = const_prop_cmd(c1 if b else d1)
        return Instance([self.tup(c1 if b else d1, c, P, eq_all(chunk_bits=self.cb))],
                        self.tup(If(g, c1, d1), c, P, eq_all(chunk_bits=self.cb)))

    def Unroll_L(self, rng):
        from .passes import const_prop_cmd
        names, g, body = self._loop(rng)
        loop = While(g, body)
        unrolled = If(g, seq_(body, loop), Skip())
        E = eq_all(names, self.cb)
        c2 = const_prop_cmd(loop) if rng.random() < 0.5 else loop
        return Instance([self.tup(unrolled, c2, E, E)], self.tup(loop, c2, E, E))

    def _rho(self, rng):
        rho = {x: f"r{i}" for i, x in enumerate(VARS)}
        d0 = FrozenMap({x: y for x, y in rho.items() if rng.random() < 0.75})
        return rho, d0

    def Assign_chk(self, rng):
        from .gen import gen_wexpr
        from .passes import _rename_expr
        rho, d = self._rho(rng)
        e1 = gen_wexpr(rng, 2, VARS)
        e2 = _rename_expr(e1, lambda x: rho.get(x, x))
        x = rng.choice(VARS)
        y = rho[x] if rng.random() < 0.8 else rng.choice(list(rho.values()))
        d1 = ren_chk_e(d, e1, e2)
        if d1 is None:
            return None
        d2 = ren_chk_lv(d1, LVar(x), LVar(y))
        R0 = csim(d, VARS, tuple(rho.values()), self.cb)
        R1 = csim(d2, VARS, tuple(rho.values()), self.cb)
        return Instance([], self.tup(Assign(LVar(x), e1), Assign(LVar(y), e2), R0, R1))

    def Case_chk(self, rng):
        from .gen import gen_bexpr
        from .passes import rename_cmd
        rho, d = self._rho(rng)
        g = gen_bexpr(rng, 1, VARS)
        c = If(g, self.cmd(rng), self.cmd(rng))
        extra = {}

        def m(x):
            return rho.get(x) or extra.setdefault(x, f"{x}_r")
        c2 = rename_cmd(c, m)
        d1 = run_checker(RENAMING, d, c, c2)
        if d1 is None:
            return None
        R0 = csim(d, VARS, tuple(rho.values()), self.cb)
        R1 = csim(d1, VARS, tuple(rho.values()), self.cb)
        return Instance([], self.tup(c, c2, R0, R1))


def seq_(*cmds):
    from .lang import seq
    return seq(*cmds)


def lval_names(lv) -> set:
    from .lang import lval_defs
    return lval_defs(lv)


def _verdict_ok(v) -> bool:
    return v is True or isinstance(v, Related)


def rule_soundness_suite(seed: int = 0, instances: int = 100, rules: Sequence[str] = RULES,
                         pairs: int = 8, max_attempts: int = 20) -> List[RuleReport]:
    """Check each rule's conclusion on generated premise-satisfying instances."""
    suite = _Suite(pairs)
    out = []
    for rule in rules:
        build = getattr(suite, rule.replace("-", "_"))
        rep = RuleReport(rule)
        i = 0
        while rep.instances < instances and rep.attempts < instances * max_attempts:
            tag = f"{seed}:{rule}:{i}"
            i += 1
            rep.attempts += 1
            inst = build(random.Random(tag))
            if inst is None:
                continue
            try:
                if not all(_verdict_ok(p()) for p in inst.premises):
                    continue
            except EmptyPrecondition:
                continue
            try:
                concl = inst.conclusion()
            except EmptyPrecondition:
                continue
            rep.instances += 1
            if not _verdict_ok(concl):
                detail = concl.to_json() if hasattr(concl, "to_json") else repr(concl)
                rep.failures.append({"instance": tag, "verdict": detail})
        out.append(rep)
    return out
