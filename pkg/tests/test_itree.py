import random

import pytest

from itc.equiv import check_eutt
from itc.gen import gen_tree
from itc.itree import (Call, Err, ErrEncountered, FuelExhausted, Left, Right, Ret, Rnd,
                       Tau, Vis, bind, fmap, interp, interp_mrec, iter_, observe, ret,
                       rnd_answers, spin, structurally_equal, tau, trigger)

ANS = lambda e: list(rnd_answers(e.n, 1)) if isinstance(e, Rnd) else []


def k1(x):
    return tau(ret(x + 1))


def k2(x):
    return bind(trigger(Rnd(1)), lambda a: ret(x * 2 + a[0]))


@pytest.mark.parametrize("seed", range(30))
def test_monad_laws(seed):
    t = gen_tree(random.Random(seed), depth=5)
    assert structurally_equal(bind(ret(3), k2), k2(3), 20, ANS)
    assert structurally_equal(bind(t, ret), t, 20, ANS)
    assert structurally_equal(bind(bind(t, k1), k2), bind(t, lambda x: bind(k1(x), k2)), 30, ANS)


def test_bind_observed_prefix():
    t = bind(trigger(Rnd(1)), lambda a: ret(a))
    trace = observe(t, 2, lambda e: (1,))
    assert [s.kind for s in trace] == ["vis", "ret"]
    assert trace[1].value == (1,)


def test_fmap_and_deep_bind_chain():
    t = ret(0)
    for _ in range(20000):
        t = bind(t, lambda x: ret(x + 1))
    assert t.force() == Ret(20000)
    assert fmap(str, ret(4)).force() == Ret("4")


def test_spin_is_productive():
    t = spin()
    for _ in range(1000):
        node = t.force()
        assert isinstance(node, Tau)
        t = node.next
    with pytest.raises(FuelExhausted):
        observe(spin(), 50, lambda e: None)


def test_iter_costs_one_tau_per_left():
    t = iter_(lambda i: ret(Left(i + 1)) if i < 3 else ret(Right(i)), 0)
    trace = observe(t, 100, lambda e: None)
    assert [s.kind for s in trace] == ["tau"] * 3 + ["ret"]
    assert trace[-1].value == 3


def test_interp_inserts_one_tau_per_event():
    t = bind(trigger(Call("f", None, 1)), lambda a: ret(a + 1))
    h = lambda e: ret(10) if isinstance(e, Call) else None
    trace = observe(interp(h, t), 10, lambda e: None)
    assert [s.kind for s in trace] == ["tau", "ret"]
    assert trace[-1].value == 11


def test_interp_passes_unhandled_events():
    t = bind(trigger(Rnd(1)), ret)
    out = interp(lambda e: None, t).force()
    assert isinstance(out, Vis) and out.event == Rnd(1)


def test_interp_mrec_recursion():
    # fact(n) via recursive Call events
    def body(e):
        n = e.arg
        if n == 0:
            return ret(1)
        return bind(trigger(Call("fact", None, n - 1)), lambda r: ret(n * r))

    t = interp_mrec(body, trigger(Call("fact", None, 5)))
    trace = observe(t, 1000, lambda e: None)
    assert trace[-1].value == 120
    assert sum(s.kind == "tau" for s in trace) == 6


def test_err_stops_observation():
    t = bind(trigger(Err("boom")), ret)
    with pytest.raises(ErrEncountered) as exc:
        observe(t, 10, lambda e: None)
    assert exc.value.message == "boom"


def test_eutt_ignores_finite_taus():
    assert check_eutt(tau(tau(ret(1))), ret(1))
    assert not check_eutt(ret(1), ret(2))
