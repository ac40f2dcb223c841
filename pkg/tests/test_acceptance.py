"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest (lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import random
import sys
import time
from fractions import Fraction as F
from importlib import resources

import pytest

from itc.crypto import ExperimentConfig, adversary, preservation_check
from itc.equiv import (ERR_LEFT, NO_CUTOFFS, BudgetExhausted, EventContract, NotRelated,
                       Related, check_eutt, check_rutt, check_xrutt,
                       rnd_enum)
from itc.gen import VARS, gen_program, gen_state, gen_tree, gen_wexpr, pad_taus
from itc.itree import (Ret, Rnd, Tau, Vis, bind, fmap, interp, interp_mrec, ret, rnd_answers,
                       spin, structurally_equal, tau, trigger)
from itc.lang import (Const, FrozenMap, LMem, LTuple, LVar, Tup, Word, parse, parse_cmd,
                      pretty_cmd)
from itc.passes import (PASSES, ValidationConfig, ValidationFailure, _rename_expr,
                        const_prop_cmd, dce, dce_cmd, inline_pass, validate_pair)
from itc.prob import SideConditionViolated, dnull, dunit, lifted_equality_check, semp, semp_n
from itc.rhl import (RENAMING, call_contract, csim, ren_chk_e, ren_chk_lv, rule_soundness_suite,
                     run_checker)
from itc.sem import (SemConfig, _handler_for, eval_value, peval, run_body, sem_inline,
                     sem_inter, sem_intra, write_value)

LINES: list = []
TITLES = {
    1: "itree laws on 500 finite trees in under 10 s",
    2: "xrutt/rutt/eutt agreement on 500 tree pairs",
    3: "step-indexed distribution equations hold exactly",
    4: "divergence has returned mass 0 up to 2^14 steps",
    5: "weakly bisimilar pairs have equal distributions (200 pairs)",
    6: "passes preserve distributions and xrutt (200 programs per pass)",
    7: "micro-examples reproduce byte-exactly",
    8: "renaming checker laws on 500 cases each",
    9: "rule soundness suite, 100 instances per rule",
    10: "inlining lemmas on 200 programs",
    11: "IND-CCA advantage preserved for both KEMs and adversaries",
    12: "lifted set equality on 100 program pairs",
}


def record(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  [{n:>2}] {TITLES[n]}: {detail}"
    LINES.append(line)
    print(line)


def answers(chunk_bits):
    return lambda e: list(rnd_answers(e.n, chunk_bits)) if isinstance(e, Rnd) else []


def eq(a, b):
    return a == b


# ---------------------------------------------------------------------- 1

def crit_1():
    start = time.perf_counter()
    bad = []
    ans = answers(1)
    for i in range(500):
        rng = random.Random(1000 + i)
        t = gen_tree(rng, depth=6, values=4)
        s1, s2 = rng.randrange(1 << 30), rng.randrange(1 << 30)
        k1 = lambda x, s=s1: gen_tree(random.Random(s * 7 + x), depth=3, values=4)
        k2 = lambda x, s=s2: gen_tree(random.Random(s * 7 + x), depth=3, values=4)
        x = rng.randrange(4)
        checks = {
            "left identity": structurally_equal(bind(ret(x), k1), k1(x), 40, ans),
            "right identity": structurally_equal(bind(t, ret), t, 40, ans),
            "associativity": structurally_equal(bind(bind(t, k1), k2),
                                                bind(t, lambda v: bind(k1(v), k2)), 40, ans),
            "fmap identity": structurally_equal(fmap(lambda v: v, t), t, 40, ans),
            "interp identity": structurally_equal(interp(lambda e: None, t), t, 40, ans),
            "productive": _productive(bind(t, k1), ans),
        }
        bad += [(i, name) for name, ok in checks.items() if not ok]
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 10
    return ok, f"500 trees x 6 laws, {len(bad)} failures, {elapsed:.2f} s"


def _productive(t, ans, limit=10_000):
    """Every reachable node forces to a Ret/Tau/Vis; finite trees end in Ret or Err."""
    stack, seen = [t], 0
    while stack:
        node = stack.pop().force()
        seen += 1
        if seen > limit or not isinstance(node, (Ret, Tau, Vis)):
            return False
        if isinstance(node, Tau):
            stack.append(node.next)
        elif isinstance(node, Vis):
            stack.extend(node.k(a) for a in ans(node.event))
    return True


# ---------------------------------------------------------------------- 2

def _ref_eutt(t1, t2, ans):
    """Reference weak bisimilarity for finite trees: strip Taus, compare."""
    def strip(t):
        n = t.force()
        while isinstance(n, Tau):
            n = n.next.force()
        return n

    n1, n2 = strip(t1), strip(t2)
    if isinstance(n1, Ret) and isinstance(n2, Ret):
        return n1.value == n2.value
    if isinstance(n1, Vis) and isinstance(n2, Vis):
        return n1.event == n2.event and all(_ref_eutt(n1.k(a), n2.k(a), ans)
                                            for a in ans(n1.event))
    return False


def crit_2():
    enum = rnd_enum(1)
    flip = EventContract(lambda e1, e2: e1 == e2,
                         lambda e1, a1, e2, a2: a1 == tuple(1 - x for x in a2), enum)
    filtered_eq = EventContract(lambda e1, e2: e1 == e2, lambda e1, a1, e2, a2: a1 == a2, enum)
    parity = lambda a, b: a % 2 == b % 2
    dis = {"xrutt/rutt": 0, "rutt/eutt": 0, "eutt/reference": 0}
    related = 0
    for i in range(500):
        rng = random.Random(2000 + i)
        t1 = gen_tree(rng, depth=6, values=2)
        mode = i % 3
        t2 = pad_taus(rng, t1) if mode == 0 else (gen_tree(rng, depth=6, values=2) if mode == 1
                                                   else pad_taus(rng, gen_tree(rng, 3, 2)))
        for contract, phi in ((flip, parity), (filtered_eq, eq)):
            a = check_xrutt(t1, t2, phi, contract, NO_CUTOFFS)
            b = check_rutt(t1, t2, phi, contract)
            dis["xrutt/rutt"] += type(a) is not type(b)
        r = check_rutt(t1, t2, eq, filtered_eq)
        e = check_eutt(t1, t2, chunk_bits=1)
        dis["rutt/eutt"] += type(r) is not type(e)
        dis["eutt/reference"] += isinstance(e, Related) != _ref_eutt(t1, t2, answers(1))
        related += isinstance(e, Related)
    ok = not any(dis.values())
    return ok, f"disagreements {dis}; {related}/500 pairs Related"


# ---------------------------------------------------------------------- 3

def crit_3():
    fails = []
    coin = bind(trigger(Rnd(1)), lambda a: ret(a[0]))
    for i in range(100):
        t = gen_tree(random.Random(3000 + i), err_prob=0.1)
        if semp_n(t, 0, chunk_bits=1) != dnull():
            fails.append(("zero", i))
        for n in range(6):
            if semp_n(tau(t), n + 1, chunk_bits=1) != semp_n(t, n, chunk_bits=1):
                fails.append(("tau", i, n))
    for n in range(1, 8):
        if semp_n(ret("r"), n) != dunit("r"):
            fails.append(("ret", n))
    d = semp_n(coin, 2, chunk_bits=1)
    if d.support != {0: F(1, 2), 1: F(1, 2)} or d.residual != 0:
        fails.append(("coin", d.support))
    return not fails, f"{len(fails)} violations; coin = {_show(d.support)}"


def _show(support):
    return "{" + ", ".join(f"{k}: {v}" for k, v in sorted(support.items())) + "}"


# ---------------------------------------------------------------------- 4

def crit_4():
    p = parse((resources.files("itc") / "programs" / "spin.itc").read_text())
    out = []
    for name, t in (("spin()", spin()),
                    ("spin.itc", run_body(p["main"], FrozenMap(), None, sem_inter,
                                          SemConfig(2, p)))):
        r = semp(t, 2 ** 14)
        ok = r.n_used == 2 ** 14 and all(x == 0 for x in r.trace) and r.residual == 1
        out.append((name, ok, r.n_used))
    return all(o for _, o, _ in out), "; ".join(f"{n}: n={k} returned 0 residual 1"
                                               if o else f"{n}: FAILED" for n, o, k in out)


# ---------------------------------------------------------------------- 5

def crit_5():
    fails, nonzero_error = 0, 0
    eps = F(1, 2 ** 20)
    for i in range(200):
        rng = random.Random(5000 + i)
        t1 = gen_tree(rng, depth=6, values=3, rnd_n=1 + i % 2, err_prob=0.1 if i % 4 == 0 else 0)
        t2 = pad_taus(rng, bind(t1, ret))
        if not check_eutt(t1, t2, chunk_bits=1):
            fails += 1
            continue
        r1, r2 = semp(t1, chunk_bits=1), semp(t2, chunk_bits=1)
        if not (r1.residual < eps and r2.residual < eps and r1.dist == r2.dist):
            fails += 1
        nonzero_error += r1.dist.error > 0
    return fails == 0, f"{200 - fails}/200 equal ({nonzero_error} with error mass)"


# ---------------------------------------------------------------------- 6

def crit_6():
    start = time.perf_counter()
    vc = ValidationConfig(chunk_bits=2, runs=2, depth=200)
    stats = {}
    for name in ("const_prop", "dce", "inline"):
        fails = compared = changed = 0
        for i in range(200):
            p = gen_program(random.Random(6000 + i))
            q = PASSES[name](p, ())
            changed += q != p
            try:
                rep = validate_pair(p, q, vc, name)
            except ValidationFailure:
                fails += 1
                continue
            compared += rep.dist == "equal"
        stats[name] = (fails, compared, changed)
    elapsed = time.perf_counter() - start
    ok = all(f == 0 and c == 200 for f, c, _ in stats.values()) and elapsed < 300
    detail = "; ".join(f"{n}: {200 - f}/200 ok, {c} exact, {ch} changed"
                       for n, (f, c, ch) in stats.items())
    return ok, f"{detail}; {elapsed:.1f} s"


# ---------------------------------------------------------------------- 7

def crit_7():
    got = {
        "const_prop": pretty_cmd(dce_cmd(const_prop_cmd(parse_cmd("i = 3; x = i - 2;")), {"x"})),
        "if": pretty_cmd(const_prop_cmd(parse_cmd("if x == x { c = 1; } else { c = 2; }"))),
        "while": pretty_cmd(const_prop_cmd(parse_cmd("while x < x { c = 1; }"))),
        "rename": run_checker(RENAMING, FrozenMap({"y": "rdi"}), parse_cmd("x = y + 3;"),
                              parse_cmd("rdi = rdi + 3;")),
    }
    want = {"const_prop": "x = 1;", "if": "c = 1;", "while": "skip;",
            "rename": FrozenMap({"x": "rdi"})}
    peval_ok = True
    rng = random.Random(7)
    for _ in range(50):
        s = gen_state(rng)
        peval_ok &= peval(parse_cmd("x = 0;"), s) == s.set("x", Word(0))
    bad = [k for k in want if got[k] != want[k]] + ([] if peval_ok else ["peval"])
    return not bad, ("all 5 match" if not bad else f"mismatched: {bad}")


# ---------------------------------------------------------------------- 8

REGS = tuple(f"r{i}" for i in range(6))


def _gen_domain(rng):
    src = [x for x in VARS if rng.random() < 0.75]
    return FrozenMap(dict(zip(src, rng.sample(REGS, len(src)))))


def _gen_lval(rng, d, names):
    k = rng.random()
    if k < 0.5 or not d:
        x = rng.choice(VARS)
        return LVar(x), LVar(rng.choice(REGS))
    if k < 0.75:
        a = gen_wexpr(rng, 1, names)
        a = Const(rng.randrange(4)) if rng.random() < 0.7 else a
        return LMem(a), LMem(_rename_expr(a, lambda x: d[x]))
    xs = rng.sample(VARS, 2)
    ys = rng.sample(REGS, 2)
    return LTuple((LVar(xs[0]), LVar(xs[1]))), LTuple((LVar(ys[0]), LVar(ys[1])))


def crit_8():
    counts = {"Mono": 0, "Correct_e": 0, "Correct_lv": 0}
    fails = {k: 0 for k in counts}
    rng = random.Random(8000)
    tries = 0
    while min(counts.values()) < 500 and tries < 20000:
        tries += 1
        d = _gen_domain(rng)
        names = tuple(d)
        rel = csim(d, VARS, REGS)
        pairs = rel.sample(rng, 2)
        # expressions: mostly faithful renamings, sometimes unrelated
        e1 = gen_wexpr(rng, 2, names)
        e2 = (_rename_expr(e1, lambda x: d[x]) if rng.random() < 0.8
              else gen_wexpr(rng, 2, tuple(d.values())))
        d2 = ren_chk_e(d, e1, e2)
        if d2 is not None:
            for s1, s2 in pairs:
                counts["Mono"] += 1
                fails["Mono"] += not csim(d2, VARS, REGS).holds(s1, s2)
                counts["Correct_e"] += 1
                fails["Correct_e"] += not RENAMING.s_rel(eval_value(e1, s1), eval_value(e2, s2))
        lv1, lv2 = _gen_lval(rng, d, names)
        d3 = ren_chk_lv(d, lv1, lv2)
        if d3 is not None:
            for s1, s2 in pairs:
                v = Word(rng.randrange(4))
                if isinstance(lv1, LTuple):
                    v = Tup((Word(rng.randrange(4)), Word(rng.randrange(4))))
                t1 = write_value(lv1, v, s1, 2)
                t2 = write_value(lv2, v, s2, 2)
                counts["Correct_lv"] += 1
                fails["Correct_lv"] += not csim(d3, VARS, REGS).holds(t1, t2)
    ok = min(counts.values()) >= 500 and not any(fails.values())
    return ok, f"cases {counts}, failures {fails}"


# ---------------------------------------------------------------------- 9

def crit_9():
    start = time.perf_counter()
    reports = rule_soundness_suite(seed=0, instances=100)
    bad = [r.rule for r in reports if not r.ok]
    attempts = sum(r.attempts for r in reports)
    return not bad, (f"{len(reports)} rules x 100 instances, {attempts} attempts, "
                     f"failing: {bad or 'none'}; {time.perf_counter() - start:.1f} s")


# --------------------------------------------------------------------- 10

def crit_10():
    fails_a = fails_b = exhausted = runs = inlined = 0
    for i in range(200):
        rng = random.Random(10_000 + i)
        p = gen_program(rng)
        q = inline_pass(p)
        inlined += q != p
        cfg, cfg_q = SemConfig(2, p), SemConfig(2, q)
        for f in p.funs:
            for _ in range(2):
                arg = Word(rng.randrange(8)) if f.param is not None else None
                mem = FrozenMap({a: rng.randrange(4) for a in range(4)})
                runs += 1
                t_inter = run_body(f, mem, arg, sem_inter, cfg)
                t_inline = interp_mrec(_handler_for(cfg), run_body(f, mem, arg, sem_inline, cfg))
                ra = check_eutt(t_inter, t_inline, chunk_bits=2)
                fails_a += not isinstance(ra, Related)
                t_src = run_body(f, mem, arg, sem_inline, cfg_q)
                t_tgt = run_body(q[f.name], mem, arg, sem_intra, cfg_q)
                rb = check_xrutt(t_src, t_tgt, eq, call_contract(2), ERR_LEFT, allow_calls=True)
                fails_b += isinstance(rb, NotRelated)
                exhausted += isinstance(rb, BudgetExhausted)
    ok = fails_a == 0 and fails_b == 0 and exhausted == 0
    return ok, (f"{runs} runs over 200 programs ({inlined} changed by inlining); "
                f"eutt failures {fails_a}, xrutt failures {fails_b + exhausted}")


# --------------------------------------------------------------------- 11

def crit_11():
    rows, ok = [], True
    for kem in ("kem_otp", "kem_leaky"):
        p = parse((resources.files("itc") / "programs" / f"{kem}.itc").read_text())
        for adv in ("constant", "replay"):
            rep = preservation_check(p, ["const_prop", "dce", "inline"], adversary(adv),
                                     ExperimentConfig(chunk_bits=2))
            ok &= rep.equal and rep.eutt_verdict == "Related"
            rows.append(f"{kem}/{adv} {rep.advantage_src}={rep.advantage_tgt} {rep.eutt_verdict}")
    return ok, "; ".join(rows)


# --------------------------------------------------------------------- 12

def _gen_pred(rng, outcomes):
    """A predicate on (memory, result) plus an equivalent rewrite of it."""
    if len(outcomes) >= 2:
        chosen = rng.sample(outcomes, rng.randrange(1, len(outcomes)))
        keys = {(tuple(sorted(m.items())), v.v) for m, v in chosen}
        return (lambda o: o in chosen), (lambda o: (tuple(sorted(o[0].items())), o[1].v) in keys)
    kind = rng.randrange(3)
    if kind == 0:
        m, r = rng.randrange(2, 5), rng.randrange(2)
        return (lambda o: o[1].v % m == r), (lambda o: (o[1].v + m) % m == r)
    if kind == 1:
        a, c = rng.randrange(4), rng.randrange(4)
        return (lambda o: o[0].get(a) == c), (lambda o: not o[0].get(a) != c)
    lim = rng.randrange(1, 16)
    return (lambda o: o[1].v < lim), (lambda o: not o[1].v >= lim)


def crit_12():
    passed = unequal = nontrivial = controls = missed = 0
    i = 0
    while passed < 100 and i < 2000:
        rng = random.Random(12_000 + i)
        i += 1
        p = gen_program(rng)
        q = dce(p) if i % 2 else PASSES["const_prop"](p, ())
        arg = Word(rng.randrange(8))
        mem = FrozenMap({a: rng.randrange(4) for a in range(4)})
        t1 = run_body(p["main"], mem, arg, sem_inter, SemConfig(2, p))
        t2 = run_body(q["main"], mem, arg, sem_inter, SemConfig(2, q))
        outcomes = sorted(semp(t1, chunk_bits=2).dist.support, key=repr)
        if len(outcomes) < 2 and rng.random() < 0.8:
            continue  # favour programs whose result is actually random
        S, T = _gen_pred(rng, outcomes)
        rep = lifted_equality_check(t1, t2, eq, S, T, chunk_bits=2)
        passed += 1
        unequal += not rep.equal
        nontrivial += 0 < rep.pr_s < 1
        if passed % 5 == 0 and 0 < rep.pr_s:
            # negative control: a T that disagrees with S must be refused
            controls += 1
            try:
                lifted_equality_check(t1, t2, eq, S, lambda o: not T(o), chunk_bits=2)
                missed += 1
            except SideConditionViolated:
                pass
    ok = passed >= 100 and unequal == 0 and missed == 0
    return ok, (f"{passed} pairs, {unequal} unequal, {nontrivial} with 0 < Pr < 1; "
                f"{controls - missed}/{controls} non-equivalent controls rejected")


CRITERIA = {n: globals()[f"crit_{n}"] for n in TITLES}


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n):
    ok, detail = CRITERIA[n]()
    record(n, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]()
        record(n, ok, detail)
        failed += not ok
    sys.exit(1 if failed else 0)
