import itertools
from fractions import Fraction as F
from importlib import resources

import pytest

from itc.crypto import (ExperimentConfig, InitializationViolation, MissingName, adversary,
                        evaluate, make_challenger, preservation_check)
from itc.lang import parse

W = 2  # chunk bits


def load(name):
    return parse((resources.files("itc") / "programs" / f"{name}.itc").read_text())


def brute_force(ct_of, guess):
    """Pr[win] by enumerating key, challenge message, random message and bit."""
    wins = total = 0
    for k, m0, m1, b in itertools.product(range(2 ** W), range(2 ** W), range(2 ** W), (0, 1)):
        ct = ct_of(k, m0)
        given = m0 if b == 0 else m1
        wins += guess(ct, given) == b
        total += 1
    return F(wins, total)


REPLAY = lambda ct, given: 0 if given == ct else 1
CONSTANT = lambda ct, given: 0
KEMS = {"kem_otp": lambda k, m: k ^ m, "kem_leaky": lambda k, m: m}


@pytest.mark.parametrize("kem", sorted(KEMS))
@pytest.mark.parametrize("adv,oracle", [("constant", CONSTANT), ("replay", REPLAY)])
def test_advantage_matches_enumeration(kem, adv, oracle):
    ch = make_challenger(load(kem), chunk_bits=W)
    r = evaluate(ch, adversary(adv), ExperimentConfig(chunk_bits=W))
    assert r.pr_win == brute_force(KEMS[kem], oracle)
    assert r.residual == 0 and r.dist.error == 0
    assert 0 <= r.advantage <= F(1, 2)


def test_frozen_values():
    ch = make_challenger(load("kem_leaky"), chunk_bits=W)
    assert evaluate(ch, adversary("replay")).advantage == F(3, 8)
    assert evaluate(ch, adversary("constant")).advantage == 0


@pytest.mark.parametrize("kem", sorted(KEMS))
@pytest.mark.parametrize("adv", ["constant", "replay"])
def test_bit_symmetry(kem, adv):
    ch = make_challenger(load(kem), chunk_bits=W)
    a = evaluate(ch, adversary(adv), ExperimentConfig(chunk_bits=W)).advantage
    b = evaluate(ch, adversary(adv), ExperimentConfig(chunk_bits=W, swap=True)).advantage
    assert a == b


def test_challenge_ciphertext_never_decapsulated():
    seen = []
    ch = make_challenger(load("kem_leaky"), chunk_bits=W)
    evaluate(ch, adversary("replay"), on_decap=lambda *a: seen.append(a))
    assert any(stage == "query" for stage, _, _ in seen)
    assert all(q != c for stage, q, c in seen if stage == "guess")


def test_abort_policy():
    ch = make_challenger(load("kem_leaky"), chunk_bits=W)
    r = evaluate(ch, adversary("replay"), ExperimentConfig(chunk_bits=W, policy="abort"))
    # Every replay query hits the challenge ciphertext and ends the game as a loss.
    assert r.pr_win == 0
    with pytest.raises(ValueError):
        ExperimentConfig(policy="retry")


def test_uninitialized_key_rejected():
    with pytest.raises(InitializationViolation) as exc:
        preservation_check(load("kem_uninit"), ["const_prop", "dce"], adversary("constant"))
    assert exc.value.component == "genkey"
    assert "UndefVariable sk" in exc.value.detail


def test_missing_names():
    with pytest.raises(MissingName):
        make_challenger(parse("fn genkey() -> pk { pk = 1; sk = 1; }"))
    with pytest.raises(MissingName):
        make_challenger(parse("""
        fn genkey() -> pk { pk = 1; }
        fn encap() -> ct { m = 1; ct = m; }
        fn decap() -> m { m = ct; }"""))


@pytest.mark.parametrize("kem", ["kem_otp", "kem_leaky"])
def test_preservation(kem):
    for adv in ("constant", "replay"):
        rep = preservation_check(load(kem), ["const_prop", "dce", "inline"], adversary(adv))
        assert rep.equal and rep.eutt_verdict == "Related"
        assert rep.to_json()["advantage_src"] == rep.to_json()["advantage_tgt"]


def test_compiled_otp_has_no_inline_calls():
    from itc.passes import inline_calls_left
    rep = preservation_check(load("kem_otp"), ["const_prop", "dce", "inline"],
                             adversary("constant"))
    assert inline_calls_left(rep.compiled) == []
    assert "spare" not in str(rep.compiled)
