import random

import pytest

from itc.equiv import (ERR_LEFT, NO_CUTOFFS, BudgetExhausted, EventContract, NotRelated,
                       Related, UnsupportedEvent, check_eutt, check_rutt, check_xrutt,
                       equality_contract, replay_witness, rnd_enum)
from itc.gen import gen_loop_tree, gen_program, gen_tree, pad_taus
from itc.itree import Call, Err, Ret, Rnd, bind, ret, spin, tau, trigger
from itc.lang import Word
from itc.passes import dce
from itc.sem import SemConfig, run_function

EQ = lambda a, b: a == b
C1 = equality_contract(1)


def taus(t, k):
    for _ in range(k):
        t = tau(t)
    return t


def test_err_left_cutoff_relates_anything():
    t1 = bind(trigger(Err("x")), ret)
    assert check_xrutt(t1, spin(), EQ, C1, ERR_LEFT) == Related()
    assert isinstance(check_xrutt(t1, ret(1), EQ, C1, NO_CUTOFFS), NotRelated)


@pytest.mark.parametrize("seed", range(20))
def test_reflexive_on_random_trees(seed):
    t = gen_tree(random.Random(seed))
    assert check_xrutt(t, t, EQ, C1) == Related()
    assert check_eutt(t, t, chunk_bits=1) == Related()


def test_leaf_witness():
    r = check_eutt(ret(1), ret(2))
    assert isinstance(r, NotRelated)
    assert r.reason == "return values not related"
    assert (r.left_node, r.right_node) == ("Ret(1)", "Ret(2)")
    assert r.to_json()["verdict"] == "NotRelated"


def test_taus_within_budget():
    t = bind(trigger(Rnd(1)), lambda a: ret(a[0]))
    assert check_eutt(taus(t, 50), t, chunk_bits=1)
    assert check_eutt(t, taus(t, 50), tau_budget=10, chunk_bits=1) == BudgetExhausted("tau budget")


def test_contract_precondition_failure():
    never = EventContract(lambda e1, e2: False, lambda *a: True, rnd_enum(1))
    t = trigger(Rnd(1))
    r = check_rutt(t, t, EQ, never)
    assert isinstance(r, NotRelated) and r.reason == "event precondition fails"


def test_non_diagonal_contract():
    # answers related by a1 == 1 - a2
    flip = EventContract(lambda e1, e2: e1 == e2, lambda e1, a1, e2, a2: a1[0] == 1 - a2[0],
                         rnd_enum(1))
    t1 = bind(trigger(Rnd(1)), lambda a: ret(a[0]))
    t2 = bind(trigger(Rnd(1)), lambda a: ret(1 - a[0]))
    assert check_rutt(t1, t2, EQ, flip)
    assert not check_eutt(t1, t2, chunk_bits=1)


def test_calls_rejected_unless_allowed():
    t = trigger(Call("f", None, 0))
    with pytest.raises(UnsupportedEvent):
        check_eutt(t, t)


def test_spin_vs_ret():
    assert isinstance(check_eutt(spin(), ret(0)), BudgetExhausted)
    assert check_eutt(spin(), spin()) == Related()


def test_keyed_loops_close_coinductively():
    t = gen_loop_tree(random.Random(3), chunk_bits=1)
    assert check_eutt(t, t, chunk_bits=1, depth=5) == Related()


@pytest.mark.parametrize("seed", range(30))
def test_witness_replays_to_violation(seed):
    rng = random.Random(seed)
    t1, t2 = gen_tree(rng, values=2), gen_tree(rng, values=2)
    r = check_eutt(t1, t2, chunk_bits=1)
    if isinstance(r, NotRelated):
        n1, n2 = replay_witness(t1, t2, r)
        if r.reason == "return values not related":
            assert isinstance(n1, Ret) and isinstance(n2, Ret) and n1.value != n2.value
        elif r.reason == "node kinds differ":
            assert type(n1) is not type(n2)


@pytest.mark.parametrize("seed", range(30))
def test_symmetry_and_monotonicity(seed):
    rng = random.Random(seed)
    t1 = gen_tree(rng, values=2)
    t2 = pad_taus(rng, t1) if seed % 2 else gen_tree(rng, values=2)
    r12 = check_eutt(t1, t2, chunk_bits=1, depth=4, tau_budget=4)
    r21 = check_eutt(t2, t1, chunk_bits=1, depth=4, tau_budget=4)
    assert type(r12) is type(r21)
    big = check_eutt(t1, t2, chunk_bits=1)
    if not isinstance(r12, BudgetExhausted):
        assert type(big) is type(r12)


@pytest.mark.parametrize("seed", range(10))
def test_program_vs_dead_code_eliminated(seed):
    p = gen_program(random.Random(seed))
    q = dce(p)
    for arg in range(3):
        t1 = run_function(SemConfig(2, p), "main", Word(arg))
        t2 = run_function(SemConfig(2, q), "main", Word(arg))
        assert check_xrutt(t1, t2, EQ, equality_contract(2), ERR_LEFT)
