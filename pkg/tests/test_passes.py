import random

import pytest

from itc.equiv import ERR_LEFT, check_xrutt, equality_contract
from itc.gen import gen_program, gen_recursive_program
from itc.lang import (FrozenMap, Op, Program, Word, cmd_vars, parse, parse_cmd, pretty,
                      pretty_cmd)
from itc.passes import (Accept, Reject, RecursiveInline, ValidationConfig, ValidationFailure,
                        _with_body, alpha_check, const_prop, const_prop_cmd, count_assigns,
                        dce, dce_cmd, inline_calls_left, inline_pass, pipeline, rename_cmd,
                        validate_pair)
from itc.sem import SemConfig, run_function

CORPUS = [gen_program(random.Random(s)) for s in range(25)]


def test_const_prop_micro():
    assert pretty_cmd(const_prop_cmd(parse_cmd("i = 3; x = i - 2;"))) == "i = 3;\nx = 1;"


def test_constant_branch_micro():
    c = parse_cmd("if x == x { c = 1; } else { c = 2; }")
    assert pretty_cmd(const_prop_cmd(c)) == "c = 1;"
    assert pretty_cmd(const_prop_cmd(parse_cmd("while x < x { c = 1; }"))) == "skip;"


def test_const_prop_through_loops():
    c = parse_cmd("k = 1; i = 0; while i < 3 { i = i + k; }  y = k + 1;")
    assert pretty_cmd(const_prop_cmd(c)).endswith("y = 2;")
    c = parse_cmd("k = 1; while i < 3 { k = k + 1; i = i + 1; } y = k;")
    assert pretty_cmd(const_prop_cmd(c)).endswith("y = k;")


def test_const_prop_keeps_errors():
    c = parse_cmd("x = 1 + true;")
    assert const_prop_cmd(c) == c


def test_dce_micro():
    p = parse("fn f() -> y { x = 1; y = 2; }")
    assert pretty(dce(p)) == "fn f() -> y {\n    y = 2;\n}\n"


def test_dce_keeps_rands_memory_and_calls():
    c = parse_cmd("t =$ 1; [0] = 1; z = g(1); u = 3;")
    assert pretty_cmd(dce_cmd(c, ())) == "t =$ 1;\n[0] = 1;\nz = g(1);"


def test_inline_micro():
    p = parse("inline fn g(a) -> r { r = a + 1; } fn main() -> x { x = g(2); }")
    out = pretty(inline_pass(p)).split("fn main() -> x {\n", 1)[1]
    assert out == "    a#1 = 2;\n    r#1 = a#1 + 1;\n    x = r#1;\n}\n"


def test_inline_rejects_recursion():
    p = parse("inline fn f(a) -> r { r = f(a); } fn main() -> x { x = f(1); }")
    with pytest.raises(RecursiveInline):
        inline_pass(p)


@pytest.mark.parametrize("i", range(len(CORPUS)))
def test_pass_properties(i):
    p = CORPUS[i]
    cp = const_prop(p)
    assert const_prop(cp) == cp
    d = dce(p)
    assert dce(d) == d
    assert count_assigns(d) <= count_assigns(p)
    assert inline_calls_left(inline_pass(p)) == []


@pytest.mark.parametrize("i", range(10))
def test_validating_pipeline(i):
    p = CORPUS[i]
    _, reports = pipeline(p, ["const_prop", "dce", "inline"], validate=True,
                          vc=ValidationConfig(runs=2))
    assert [r.xrutt for r in reports] == ["Related"] * 3


def test_validation_catches_a_broken_pass():
    p = parse("fn main(a) -> r { t =$ 1; r = a + t[0]; }")

    def swap_ops(c):
        return parse_cmd(pretty_cmd(c).replace("+", "-"))

    q = Program(tuple(_with_body(f, swap_ops(f.body)) for f in p.funs))
    with pytest.raises(ValidationFailure) as exc:
        validate_pair(p, q, ValidationConfig(), "broken")
    assert exc.value.pass_name == "broken"
    assert exc.value.witness.to_json()["verdict"] == "NotRelated"


def test_recursive_programs_survive_pipeline():
    p = gen_recursive_program(random.Random(5))
    q, _ = pipeline(p, ["const_prop", "dce", "inline"], validate=True)
    t1 = run_function(SemConfig(2, p), "main")
    t2 = run_function(SemConfig(2, q), "main")
    assert check_xrutt(t1, t2, lambda a, b: a == b, equality_contract(2), ERR_LEFT)


# ----------------------------------------------------------------- alpha check

def test_alpha_micro():
    src = parse("fn f(y) -> x { x = y + 3; }")
    tgt = parse("fn f(rdi) -> rdi { rdi = rdi + 3; }")
    v = alpha_check(src, tgt)
    assert isinstance(v, Accept)
    assert v.maps["f"] == FrozenMap({"x": "rdi"})


def test_alpha_reject_witness():
    src = parse("fn f(y) -> x { x = y + 3; }")
    tgt = parse("fn f(rdi) -> rdi { rdi = rsi + 3; }")
    v = alpha_check(src, tgt)
    assert isinstance(v, Reject)
    js = v.to_json()
    assert js["source"] == "x = y + 3;" and js["target"] == "rdi = rsi + 3;"


def test_alpha_rejects_register_clash():
    src = parse("fn f(a) -> r { b = a + 1; c = a + 2; r = b + c; }")
    tgt = parse("fn f(r0) -> r0 { r1 = r0 + 1; r1 = r0 + 2; r0 = r1 + r1; }")
    assert isinstance(alpha_check(src, tgt), Reject)


@pytest.mark.parametrize("seed", range(15))
def test_alpha_accepts_bijective_renaming(seed):
    p = gen_program(random.Random(seed))
    names = sorted({x for f in p.funs for x in _vars(f)})
    rho = {x: f"r{i}" for i, x in enumerate(names)}
    funs = []
    for f in p.funs:
        body = rename_cmd(f.body, lambda x: rho[x])
        funs.append(type(f)(f.name, rho.get(f.param) if f.param else None, rho[f.result],
                            body, f.inline))
    q = Program(tuple(funs))
    v = alpha_check(p, q)
    assert isinstance(v, Accept), v.to_json()
    # Accepted programs agree on every input.
    for arg in range(3):
        t1 = run_function(SemConfig(2, p), "main", Word(arg))
        t2 = run_function(SemConfig(2, q), "main", Word(arg))
        assert check_xrutt(t1, t2, lambda a, b: a == b, equality_contract(2), ERR_LEFT)


def _vars(f):
    return cmd_vars(f.body) | {f.result} | ({f.param} if f.param else set())


def test_op_names_unchanged_by_rename():
    c = rename_cmd(parse_cmd("x = y + 1;"), lambda v: v.upper())
    assert pretty_cmd(c) == "X = Y + 1;"
    assert isinstance(c.e, Op)


@pytest.mark.parametrize("i", range(len(CORPUS)))
def test_inlined_programs_reparse(i):
    q = inline_pass(CORPUS[i])
    assert parse(pretty(q)) == q
