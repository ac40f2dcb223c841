"""Seeded generators for programs, states and trees used by the test harnesses.

Generated programs are safe by construction: every variable is initialised in
the function prologue, loops are bounded by a dedicated counter, memory is
only addressed at 0..3 (all mapped in :func:`gen_mem`), and random samples are
read back through ``t[0]`` right after sampling.
"""
from __future__ import annotations

import random
from typing import Optional, Sequence

from .itree import ITree, Left, Right, Rnd, bind, iter_, ret, tau, trigger
from .lang import (ArrRead, Assign, CallCmd, Const, FrozenMap, FunDef, If, LMem,
                   LVar, MachState, MemRead, Op, Program, Rand, Var, While,
                   Word, seq)

VARS = ("a", "b", "c", "d")
ADDRS = range(4)


# --------------------------------------------------------------------- values

def gen_word(rng: random.Random, hi: int = 8) -> Word:
    return Word(rng.randrange(hi))


def gen_mem(rng: random.Random, chunk_bits: int = 2) -> FrozenMap:
    return FrozenMap({a: rng.randrange(1 << chunk_bits) for a in ADDRS})


def gen_state(rng: random.Random, names: Sequence[str] = VARS,
              chunk_bits: int = 2) -> MachState:
    return MachState(FrozenMap({x: gen_word(rng) for x in names}), gen_mem(rng, chunk_bits))


# ---------------------------------------------------------------- expressions

def gen_wexpr(rng: random.Random, depth: int, names: Sequence[str]) -> Op:
    """A word-typed expression over ``names``."""
    r = rng.random()
    if depth <= 0 or r < 0.3:
        k = rng.random()
        if k < 0.45 and names:
            return Var(rng.choice(names))
        if k < 0.85:
            return Const(rng.randrange(8))
        return MemRead(Const(rng.choice(ADDRS)))
    op = rng.choice(("+", "+", "-", "*", "^"))
    return Op(op, (gen_wexpr(rng, depth - 1, names), gen_wexpr(rng, depth - 1, names)))


def gen_bexpr(rng: random.Random, depth: int, names: Sequence[str]):
    r = rng.random()
    if depth <= 0 or r < 0.6:
        if r < 0.05:
            return Const(rng.random() < 0.5)
        op = rng.choice(("<", "<=", "=="))
        return Op(op, (gen_wexpr(rng, 1, names), gen_wexpr(rng, 1, names)))
    if r < 0.75:
        return Op("!", (gen_bexpr(rng, depth - 1, names),))
    op = rng.choice(("&&", "||", "^"))
    return Op(op, (gen_bexpr(rng, depth - 1, names), gen_bexpr(rng, depth - 1, names)))


# ------------------------------------------------------------------- commands

class _Budget:
    def __init__(self, rands: int, loops: int):
        self.rands = rands
        self.loops = loops
        self.counter = 0
        self.samples = 0


def gen_cmd(rng: random.Random, depth: int, names: Sequence[str],
            callees: Sequence[str] = (), rands: int = 2, loops: int = 1,
            size: int = 4) -> object:
    """A safe command over ``names`` (all of which must be initialised)."""
    return _gen_block(rng, depth, list(names), list(callees), _Budget(rands, loops), size)


def _gen_block(rng, depth, names, callees, budget, size):
    n = rng.randint(1, size)
    return seq(*(_gen_one(rng, depth, names, callees, budget) for _ in range(n)))


def _gen_one(rng, depth, names, callees, budget):
    r = rng.random()
    x = rng.choice(names)
    if r < 0.34 or depth <= 0:
        return Assign(LVar(x), gen_wexpr(rng, 2, names))
    if r < 0.42:
        return Assign(LMem(Const(rng.choice(ADDRS))), gen_wexpr(rng, 1, names))
    if r < 0.60 and budget.rands > 0:
        budget.rands -= 1
        budget.samples += 1
        t = f"t{budget.samples}"
        return seq(Rand(LVar(t), Const(1)),
                   Assign(LVar(x), Op("+", (ArrRead(t, Const(0)), gen_wexpr(rng, 1, names)))))
    if r < 0.76 and callees:
        f = rng.choice(callees)
        return CallCmd(LVar(x), f, gen_wexpr(rng, 1, names))
    if r < 0.82:
        # Constant guards exercise branch elimination.
        y = rng.choice(names)
        cond = rng.choice((Op("==", (Var(y), Var(y))), Op("<", (Var(y), Var(y))),
                           Op("<=", (Var(y), Var(y)))))
        return If(cond, _gen_block(rng, depth - 1, names, callees, budget, 2),
                  _gen_block(rng, depth - 1, names, callees, budget, 2))
    if r < 0.92 or budget.loops <= 0:
        return If(gen_bexpr(rng, 1, names),
                  _gen_block(rng, depth - 1, names, callees, budget, 2),
                  _gen_block(rng, depth - 1, names, callees, budget, 2))
    budget.loops -= 1
    budget.counter += 1
    i = f"k{budget.counter}"
    # Loop bodies never sample, keeping exact enumeration small.
    saved, budget.rands = budget.rands, 0
    body = _gen_block(rng, depth - 1, names, callees, budget, 2)
    budget.rands = saved
    bound = rng.randint(0, 3)
    if rng.random() < 0.15:
        return While(Op("<", (Var(x), Var(x))), body)
    return seq(Assign(LVar(i), Const(0)),
               While(Op("<", (Var(i), Const(bound))),
                     seq(body, Assign(LVar(i), Op("+", (Var(i), Const(1)))))))


def prologue(rng: random.Random, names: Sequence[str], param: Optional[str]) -> object:
    out = []
    for x in names:
        if x == param:
            continue
        if param is not None and rng.random() < 0.3:
            out.append(Assign(LVar(x), Op("+", (Var(param), Const(rng.randrange(4))))))
        else:
            out.append(Assign(LVar(x), Const(rng.randrange(8))))
    return seq(*out)


def gen_program(rng: random.Random, n_funs: int = 2, rands: int = 2,
                inline_prob: float = 0.5, names: Sequence[str] = VARS) -> Program:
    """Functions f0..f{n-2} then ``main``; each may call earlier functions only."""
    funs = []
    for i in range(n_funs):
        fname = "main" if i == n_funs - 1 else f"f{i}"
        param = names[0]
        callees = [f.name for f in funs]
        body = seq(prologue(rng, names, param),
                   gen_cmd(rng, 2, names, callees, rands=rands if fname == "main" else 1,
                           size=6 if fname == "main" else 4))
        inline = fname != "main" and rng.random() < inline_prob
        funs.append(FunDef(fname, param, rng.choice(names), body, inline))
    return Program(tuple(funs))


def gen_recursive_program(rng: random.Random, names: Sequence[str] = VARS) -> Program:
    """A decreasing-argument recursive function and a ``main`` calling it."""
    n, r = names[0], names[1]
    step = gen_wexpr(rng, 1, [r] + list(names[2:]))
    body = seq(prologue(rng, names, n),
               If(Op("==", (Var(n), Const(0))),
                  Assign(LVar(r), Const(rng.randrange(4))),
                  seq(CallCmd(LVar(r), "rec", Op("-", (Var(n), Const(1)))),
                      Assign(LVar(r), Op("+", (Var(r), step))))))
    rec = FunDef("rec", n, r, body)
    main_body = seq(prologue(rng, names, n),
                    CallCmd(LVar(r), "rec", Const(rng.randrange(4))))
    return Program((rec, FunDef("main", n, r, main_body)))


# ---------------------------------------------------------------------- trees

def gen_tree(rng: random.Random, depth: int = 6, values: int = 3,
             rnd_n: int = 1, err_prob: float = 0.0) -> ITree:
    """A finite tree over {Rnd(rnd_n), Err} of height at most ``depth``.

    Vis continuations branch on the answer through a seeded lookup table so
    the tree is a pure function of its answers.
    """
    seed = rng.randrange(1 << 30)
    return _tree_from(seed, depth, values, rnd_n, err_prob)


def _tree_from(seed: int, depth: int, values: int, rnd_n: int, err_prob: float) -> ITree:
    from .itree import Err
    r = random.Random(seed)
    x = r.random()
    if depth <= 0 or x < 0.25:
        return ret(r.randrange(values))
    if x < 0.25 + err_prob:
        return trigger(Err("generated"))
    if x < 0.55:
        return tau(_tree_from(r.randrange(1 << 30), depth - 1, values, rnd_n, err_prob))
    kseeds = {}

    def k(a):
        if a not in kseeds:
            kseeds[a] = random.Random(hash((seed, a))).randrange(1 << 30)
        return _tree_from(kseeds[a], depth - 1, values, rnd_n, err_prob)

    return bind(trigger(Rnd(rnd_n)), k)


def pad_taus(rng: random.Random, t: ITree, max_taus: int = 3, depth: int = 64) -> ITree:
    """A weakly bisimilar copy of ``t``: random Taus inserted, binds reassociated."""
    from .itree import Ret, Tau, delay

    seed = rng.randrange(1 << 30)

    def go(t, r, d):
        def step():
            node = t.force()
            if isinstance(node, Ret):
                out = ret(node.value)
            elif isinstance(node, Tau):
                out = tau(go(node.next, r, d))
            else:
                k = node.k
                ev = node.event
                sub = r.randrange(1 << 30)
                out = bind(trigger(ev), lambda a: go(k(a), random.Random(hash((sub, a))), d - 1))
            for _ in range(r.randrange(max_taus + 1)):
                out = tau(out)
            return out
        return delay(step)

    return go(t, random.Random(seed), depth)


def gen_loop_tree(rng: random.Random, chunk_bits: int = 1) -> ITree:
    """A terminating Rnd loop: sample until a random target chunk appears."""
    target = rng.randrange(1 << chunk_bits)
    acc0 = rng.randrange(4)

    def body(acc):
        return bind(trigger(Rnd(1)),
                    lambda a: ret(Right(acc)) if a[0] == target else ret(Left((acc + 1) % 4)))

    return iter_(body, acc0)
