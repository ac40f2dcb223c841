"""Bounded checkers for eutt, rutt and xrutt.

The coinductive relations are approximated by a depth-bounded search with a
three-valued verdict.  Vis levels consume ``depth``; silent steps are charged
per side against ``tau_budget`` and the counters reset after every Vis step.
Answers at Vis nodes are enumerated exhaustively, so only events with finite
answer domains (``Rnd`` at small ``chunk_bits``) can reach the checker unless
the contract supplies its own enumeration.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterable, Optional

from .itree import Call, Err, ITree, Ret, Rnd, Tau, Vis, rnd_answers

DEFAULT_DEPTH = 200
DEFAULT_TAU_BUDGET = 1000


class UnsupportedEvent(ValueError):
    pass


@dataclass
class EventContract:
    """Event precondition, answer postcondition, and answer enumeration."""

    pre: Callable[[Any, Any], bool]
    post: Callable[[Any, Any, Any, Any], bool]
    answer_enum: Callable[[Any], Iterable[Any]]
    pairs: Optional[Callable[[Any, Any], Iterable[tuple]]] = None

    def answer_pairs(self, e1, e2) -> Iterable[tuple]:
        if self.pairs is not None:
            return self.pairs(e1, e2)
        return ((a1, a2) for a1 in self.answer_enum(e1) for a2 in self.answer_enum(e2)
                if self.post(e1, a1, e2, a2))


def rnd_enum(chunk_bits: int) -> Callable[[Any], Iterable[Any]]:
    def enum(e):
        if isinstance(e, Rnd):
            return list(rnd_answers(e.n, chunk_bits))
        if isinstance(e, Err):
            return []
        raise UnsupportedEvent(f"no finite answer enumeration for {type(e).__name__} events")
    return enum


def equality_contract(chunk_bits: int = 8,
                      answer_enum: Optional[Callable[[Any], Iterable[Any]]] = None) -> EventContract:
    enum = answer_enum or rnd_enum(chunk_bits)

    def diagonal(e1, e2):
        return ((a, a) for a in enum(e1))

    return EventContract(
        pre=lambda e1, e2: e1 == e2,
        post=lambda e1, a1, e2, a2: a1 == a2,
        answer_enum=enum,
        pairs=diagonal,
    )


@dataclass(frozen=True)
class Cutoffs:
    left: Callable[[Any], bool] = lambda e: False
    right: Callable[[Any], bool] = lambda e: False


NO_CUTOFFS = Cutoffs()
ERR_LEFT = Cutoffs(left=lambda e: isinstance(e, Err))


# -------------------------------------------------------------------- verdicts

@dataclass(frozen=True)
class Related:
    def __bool__(self):
        return True

    def to_json(self):
        return {"verdict": "Related"}


@dataclass(frozen=True)
class NotRelated:
    """A failed rule together with the event/answer choices that reach it."""

    reason: str
    left_path: tuple = ()
    right_path: tuple = ()
    left_node: str = ""
    right_node: str = ""
    context: Any = None

    def __bool__(self):
        return False

    def to_json(self):
        from .lang import render_value

        def step(s):
            kind, ev, ans = s
            if kind == "tau":
                return {"step": "tau"}
            return {"step": "vis", "event": repr(ev), "answer": render_value(ans)}

        out = {
            "verdict": "NotRelated",
            "reason": self.reason,
            "left_path": [step(s) for s in self.left_path],
            "right_path": [step(s) for s in self.right_path],
            "left_node": self.left_node,
            "right_node": self.right_node,
        }
        if self.context is not None:
            out["context"] = self.context
        return out


@dataclass(frozen=True)
class BudgetExhausted:
    where: str = ""

    def __bool__(self):
        return False

    def to_json(self):
        return {"verdict": "BudgetExhausted", "where": self.where}


RELATED = Related()
CheckResult = Any  # Related | NotRelated | BudgetExhausted


def verdict_name(r) -> str:
    return type(r).__name__


# -------------------------------------------------------------------- checker

def _describe(node) -> str:
    from .lang import render_value
    if isinstance(node, Ret):
        return f"Ret({render_value(node.value)})"
    if isinstance(node, Tau):
        return "Tau"
    return f"Vis({node.event!r})"


@dataclass
class _Goal:
    t1: ITree
    t2: ITree
    depth: int
    path1: tuple = ()
    path2: tuple = ()


def check_xrutt(t1: ITree, t2: ITree, phi: Callable[[Any, Any], bool],
                contract: EventContract, cut: Cutoffs = NO_CUTOFFS,
                depth: int = DEFAULT_DEPTH, tau_budget: int = DEFAULT_TAU_BUDGET,
                allow_calls: bool = False) -> CheckResult:
    """Search for an xrutt derivation relating ``t1`` and ``t2``."""
    if depth < 0 or tau_budget < 1:
        raise ValueError("need depth >= 0 and tau_budget >= 1")
    exhausted: Optional[BudgetExhausted] = None
    seen: set = set()
    stack = [_Goal(t1, t2, depth)]
    while stack:
        g = stack.pop()
        a, b = g.t1, g.t2
        p1, p2 = g.path1, g.path2
        taus1 = taus2 = 0
        while True:
            n1 = a.force()
            if isinstance(n1, Vis) and cut.left(n1.event):
                break
            n2 = b.force()
            if isinstance(n2, Vis) and cut.right(n2.event):
                break
            if isinstance(n1, Tau) and isinstance(n2, Tau):
                a, b = n1.next, n2.next
                taus1 += 1
                taus2 += 1
                if a.key is not None and b.key is not None:
                    pair = (a.key, b.key)
                    if pair in seen:
                        break  # guarded revisit: coinductive closure
                    seen.add(pair)
            elif isinstance(n1, Tau):
                a = n1.next
                taus1 += 1
            elif isinstance(n2, Tau):
                b = n2.next
                taus2 += 1
            elif isinstance(n1, Ret) and isinstance(n2, Ret):
                if not phi(n1.value, n2.value):
                    return NotRelated("return values not related", p1, p2,
                                      _describe(n1), _describe(n2))
                break
            elif isinstance(n1, Vis) and isinstance(n2, Vis):
                e1, e2 = n1.event, n2.event
                if not allow_calls and (isinstance(e1, Call) or isinstance(e2, Call)):
                    raise UnsupportedEvent("Call events must be interpreted before checking")
                if not contract.pre(e1, e2):
                    return NotRelated("event precondition fails", p1, p2,
                                      _describe(n1), _describe(n2))
                if g.depth == 0:
                    if exhausted is None:
                        exhausted = BudgetExhausted(f"depth at {_describe(n1)} / {_describe(n2)}")
                    break
                k1, k2 = n1.k, n2.k
                for a1, a2 in reversed(list(contract.answer_pairs(e1, e2))):
                    stack.append(_Goal(k1(a1), k2(a2), g.depth - 1,
                                       p1 + (("vis", e1, a1),), p2 + (("vis", e2, a2),)))
                break
            else:
                return NotRelated("node kinds differ", p1, p2, _describe(n1), _describe(n2))
            if taus1 > tau_budget or taus2 > tau_budget:
                if exhausted is None:
                    exhausted = BudgetExhausted("tau budget")
                break
    return exhausted if exhausted is not None else RELATED


def check_rutt(t1: ITree, t2: ITree, phi, contract: EventContract,
               depth: int = DEFAULT_DEPTH, tau_budget: int = DEFAULT_TAU_BUDGET,
               allow_calls: bool = False) -> CheckResult:
    return check_xrutt(t1, t2, phi, contract, NO_CUTOFFS, depth, tau_budget, allow_calls)


def check_eutt(t1: ITree, t2: ITree, phi=None, depth: int = DEFAULT_DEPTH,
               tau_budget: int = DEFAULT_TAU_BUDGET, chunk_bits: int = 8) -> CheckResult:
    if phi is None:
        phi = _eq
    return check_rutt(t1, t2, phi, equality_contract(chunk_bits), depth, tau_budget)


def _eq(a, b):
    return a == b


def replay_witness(t1: ITree, t2: ITree, w: NotRelated) -> tuple:
    """Follow a witness's paths; returns the two nodes it ends at."""

    def follow(t, path):
        steps = list(path)
        while True:
            n = t.force()
            if isinstance(n, Tau):
                t = n.next
                continue
            if isinstance(n, Vis) and steps:
                _, ev, ans = steps.pop(0)
                if n.event != ev:
                    raise AssertionError("witness path does not match tree")
                t = n.k(ans)
                continue
            return n

    return follow(t1, w.left_path), follow(t2, w.right_path)
