"""Exact sub-distributions of Rnd-trees.

``semp_n(t, n)`` is the n-step approximation: each node (Ret, Tau or Vis)
costs one step, a Rnd node averages its continuations over every answer
vector, and whatever has not returned within n steps is residual mass.  Err
leaves are collected in a separate error bucket so unsafe programs remain
diagnosable.  All arithmetic is on :class:`fractions.Fraction`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, List, Optional

from .itree import Err, ITree, Ret, Rnd, Tau, rnd_answers

ZERO = Fraction(0)
ONE = Fraction(1)
DEFAULT_N_MAX = 2 ** 14
EXACT_LIMIT_BITS = 16


class UnsupportedEvent(ValueError):
    pass


class ExactModeOverflow(ValueError):
    pass


class SideConditionViolated(ValueError):
    def __init__(self, message, pair):
        super().__init__(message)
        self.pair = pair


@dataclass
class Dist:
    support: Dict[Any, Fraction] = field(default_factory=dict)
    error: Fraction = ZERO
    errors: Dict[str, Fraction] = field(default_factory=dict)  # by Err message

    @property
    def returned(self) -> Fraction:
        return sum(self.support.values(), ZERO)

    @property
    def residual(self) -> Fraction:
        return ONE - self.returned - self.error

    def __getitem__(self, value) -> Fraction:
        return self.support.get(value, ZERO)

    def __eq__(self, other):
        if not isinstance(other, Dist):
            return NotImplemented
        return self.support == other.support and self.error == other.error

    def map(self, f: Callable[[Any], Any]) -> "Dist":
        out: Dict[Any, Fraction] = {}
        for v, p in self.support.items():
            fv = f(v)
            out[fv] = out.get(fv, ZERO) + p
        return Dist(out, self.error, dict(self.errors))

    def to_json(self) -> dict:
        from .lang import render_value
        rows = [{"value": render_value(v), "numerator": p.numerator,
                 "denominator": p.denominator} for v, p in self.support.items()]
        rows.sort(key=lambda r: r["value"])
        return {
            "support": rows,
            "residual": _frac_json(self.residual),
            "error": _frac_json(self.error),
            "error_bucket_nonstandard": self.error != 0,
        }


def _frac_json(p: Fraction) -> dict:
    return {"numerator": p.numerator, "denominator": p.denominator}


def dnull() -> Dist:
    return Dist()


def dunit(r) -> Dist:
    return Dist({r: ONE})


def pr_set(d: Dist, pred: Callable[[Any], bool]) -> Fraction:
    return sum((p for v, p in d.support.items() if pred(v)), ZERO)


# ------------------------------------------------------------------- stepping

class _Stepper:
    """Layered breadth-first expansion; one layer per step."""

    def __init__(self, t: ITree, chunk_bits: int, limit_bits: int):
        self.chunk_bits = chunk_bits
        self.limit_bits = limit_bits
        self.frontier: List[list] = [[t, ONE]]
        self.dist = Dist()
        self.steps = 0

    def _push(self, layer: list, index: dict, t: ITree, w: Fraction):
        # Trees with equal keys denote the same tree; merge their weight.
        k = t.key
        if k is not None:
            slot = index.get(k)
            if slot is not None:
                slot[1] += w
                return
            slot = [t, w]
            index[k] = slot
            layer.append(slot)
        else:
            layer.append([t, w])

    def step(self) -> None:
        nxt: list = []
        index: dict = {}
        support = self.dist.support
        for t, w in self.frontier:
            node = t.force()
            if isinstance(node, Ret):
                support[node.value] = support.get(node.value, ZERO) + w
            elif isinstance(node, Tau):
                self._push(nxt, index, node.next, w)
            else:
                e = node.event
                if isinstance(e, Err):
                    self.dist.error += w
                    self.dist.errors[e.msg] = self.dist.errors.get(e.msg, ZERO) + w
                    continue
                if not isinstance(e, Rnd):
                    raise UnsupportedEvent(f"cannot interpret {e!r} probabilistically")
                bits = e.n * self.chunk_bits
                if bits > self.limit_bits:
                    raise ExactModeOverflow(
                        f"Rnd({e.n}) needs {bits} bits, limit is {self.limit_bits}")
                share = w / (1 << bits)
                for a in rnd_answers(e.n, self.chunk_bits):
                    self._push(nxt, index, node.k(a), share)
        self.frontier = nxt
        self.steps += 1

    @property
    def done(self) -> bool:
        return not self.frontier


def semp_n(t: ITree, n: int, chunk_bits: int = 8,
           limit_bits: int = EXACT_LIMIT_BITS) -> Dist:
    """The n-step approximation of the distribution of ``t``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    st = _Stepper(t, chunk_bits, limit_bits)
    while st.steps < n and not st.done:
        st.step()
    return _snapshot(st.dist)


def _snapshot(d: Dist) -> Dist:
    return Dist(dict(d.support), d.error, dict(d.errors))


@dataclass
class SempResult:
    dist: Dist
    n_used: int
    converged: bool
    trace: List[Fraction]  # returned mass after n steps, n = 0..n_used

    @property
    def residual(self) -> Fraction:
        return self.dist.residual

    def to_json(self) -> dict:
        out = self.dist.to_json()
        out["n_used"] = self.n_used
        out["converged"] = self.converged
        return out


def semp(t: ITree, n_max: int = DEFAULT_N_MAX, eps: Optional[Fraction] = None,
         chunk_bits: int = 8, limit_bits: int = EXACT_LIMIT_BITS) -> SempResult:
    """Approximate the limit distribution of ``t``.

    Runs up to ``n_max`` steps and stops early once no mass remains pending.
    With ``eps`` set, it also stops once the pending mass is at most ``eps``,
    or at the first power of two n where some mass had returned by n/2 and
    the returned mass grew by less than ``eps`` since then.  The residual
    mass of the result bounds the distance to the limit.
    """
    st = _Stepper(t, chunk_bits, limit_bits)
    trace = [ZERO]
    while st.steps < n_max and not st.done:
        st.step()
        trace.append(st.dist.returned)
        n = st.steps
        if eps is None:
            continue
        if st.dist.residual <= eps:
            break
        if n >= 2 and n & (n - 1) == 0 and trace[n // 2] > 0 and trace[n] - trace[n // 2] < eps:
            break
    return SempResult(_snapshot(st.dist), st.steps, st.done, trace)


# ------------------------------------------------------------ lifted equality

@dataclass
class LiftedReport:
    pr_s: Fraction
    pr_t: Fraction
    residual_left: Fraction
    residual_right: Fraction
    pairs_checked: int

    @property
    def equal(self) -> bool:
        return self.pr_s == self.pr_t

    def to_json(self) -> dict:
        return {
            "pr_s": _frac_json(self.pr_s),
            "pr_t": _frac_json(self.pr_t),
            "residual_left": _frac_json(self.residual_left),
            "residual_right": _frac_json(self.residual_right),
            "pairs_checked": self.pairs_checked,
            "equal": self.equal,
        }


def lifted_equality_check(t1: ITree, t2: ITree, csim: Callable[[Any, Any], bool],
                          S: Callable[[Any], bool], T: Callable[[Any], bool],
                          extra_pairs: Iterable[tuple] = (),
                          n_max: int = DEFAULT_N_MAX, chunk_bits: int = 8) -> LiftedReport:
    """Compare Pr[S] under ``t1`` with Pr[T] under ``t2``.

    The membership side condition ``csim(r1, r2) => (S(r1) <=> T(r2))`` is
    checked on every csim-related pair of support points and on
    ``extra_pairs``; a failing pair raises :class:`SideConditionViolated`.
    """
    d1 = semp(t1, n_max, chunk_bits=chunk_bits)
    d2 = semp(t2, n_max, chunk_bits=chunk_bits)
    checked = 0
    candidates = [(a, b) for a in d1.dist.support for b in d2.dist.support]
    candidates.extend(extra_pairs)
    for a, b in candidates:
        if not csim(a, b):
            continue
        checked += 1
        if bool(S(a)) != bool(T(b)):
            raise SideConditionViolated("S and T disagree on a csim-related pair", (a, b))
    return LiftedReport(pr_set(d1.dist, S), pr_set(d2.dist, T),
                        d1.residual, d2.residual, checked)
