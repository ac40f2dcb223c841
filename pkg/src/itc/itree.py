"""Interaction trees: lazily produced Ret / Tau / Vis nodes.

A tree is an :class:`ITree` wrapping a deferred step function.  Forcing the
tree runs the step once and caches the resulting node, so infinite trees
(spinning loops, unbounded recursion) are just trees whose nodes are never all
forced.  Step functions may return either a node or another tree to delegate
to; :meth:`ITree.force` trampolines the delegation so long bind chains do not
grow the Python stack.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Optional, Union

__all__ = [
    "Err", "Rnd", "Call", "Orac", "Event",
    "Ret", "Tau", "Vis", "Node", "ITree",
    "Left", "Right",
    "ret", "tau", "vis", "delay", "bind", "fmap", "iter_", "trigger",
    "interp", "interp_mrec", "observe", "Step",
    "ErrEncountered", "FuelExhausted",
    "rnd_answers", "structurally_equal", "spin",
]


# --------------------------------------------------------------------- events

@dataclass(frozen=True)
class Err:
    msg: str


@dataclass(frozen=True)
class Rnd:
    n: int


@dataclass(frozen=True)
class Call:
    fname: str
    mem: Any
    arg: Any


@dataclass(frozen=True)
class Orac:
    name: str
    arg: Any


Event = Union[Err, Rnd, Call, Orac]


def rnd_answers(n: int, chunk_bits: int) -> Iterable[tuple]:
    """All answer vectors of a ``Rnd(n)`` event, in lexicographic order."""
    return itertools.product(range(1 << chunk_bits), repeat=n)


# ---------------------------------------------------------------------- nodes

@dataclass(frozen=True)
class Ret:
    value: Any


@dataclass(frozen=True)
class Tau:
    next: "ITree"


@dataclass(frozen=True)
class Vis:
    event: Event
    k: Callable[[Any], "ITree"]


Node = Union[Ret, Tau, Vis]


class ITree:
    """A potentially infinite interaction tree.

    ``key`` is an optional hashable identity used by the equivalence checker
    to close loops coinductively; two trees with equal keys must denote the
    same tree.
    """

    __slots__ = ("_step", "_node", "key")

    def __init__(self, step: Optional[Callable[[], Union[Node, "ITree"]]] = None,
                 node: Optional[Node] = None, key: Any = None):
        self._step = step
        self._node = node
        self.key = key

    def force(self) -> Node:
        if self._node is not None:
            return self._node
        pending = []
        t = self
        while True:
            if t._node is not None:
                node = t._node
                break
            pending.append(t)
            out = t._step()
            if isinstance(out, ITree):
                t = out
                continue
            node = out
            break
        # Pure steps: a racing second force computes the same node.
        for p in pending:
            p._node = node
            p._step = None
        return node

    @property
    def forced(self) -> bool:
        return self._node is not None

    def __repr__(self):
        if self._node is None:
            return "ITree(<unforced>)"
        return f"ITree({self._node!r})"


@dataclass(frozen=True)
class Left:
    value: Any


@dataclass(frozen=True)
class Right:
    value: Any


# ---------------------------------------------------------------- combinators

def ret(value: Any) -> ITree:
    return ITree(node=Ret(value))


def tau(t: ITree) -> ITree:
    return ITree(node=Tau(t))


def vis(event: Event, k: Callable[[Any], ITree]) -> ITree:
    return ITree(node=Vis(event, k))


def delay(thunk: Callable[[], ITree], key: Any = None) -> ITree:
    """Defer building a tree until it is forced."""
    return ITree(thunk, key=key)


def _dead(_answer):
    raise AssertionError("continuation of an Err event invoked")


def trigger(event: Event) -> ITree:
    if isinstance(event, Err):
        return vis(event, _dead)
    return vis(event, ret)


class _Bind(ITree):
    __slots__ = ("src", "cont")

    def __init__(self, src: ITree, cont: Callable[[Any], ITree]):
        key = None
        if src.key is not None:
            key = ("bind", src.key, cont)
        super().__init__(self._run, key=key)
        self.src = src
        self.cont = cont

    def _run(self):
        src, k = self.src, self.cont
        # Reassociate left-nested binds so forcing stays iterative.
        while isinstance(src, _Bind) and src._node is None:
            k = _compose(src.cont, k)
            src = src.src
        node = src.force()
        if isinstance(node, Ret):
            return k(node.value)
        if isinstance(node, Tau):
            return Tau(bind(node.next, k))
        nk = node.k
        if isinstance(node.event, Err):
            return node
        return Vis(node.event, lambda a: bind(nk(a), k))


def _compose(k1, k2):
    return lambda x: bind(k1(x), k2)


def bind(t: ITree, k: Callable[[Any], ITree]) -> ITree:
    """Graft ``k(r)`` at every ``Ret(r)`` leaf of ``t``."""
    return _Bind(t, k)


def fmap(f: Callable[[Any], Any], t: ITree) -> ITree:
    return bind(t, lambda r: ret(f(r)))


def iter_(body: Callable[[Any], ITree], init: Any) -> ITree:
    """Run ``body`` until it returns ``Right``; each ``Left`` costs one Tau."""

    def loop(i):
        def after(x):
            if isinstance(x, Left):
                return tau(loop(x.value))
            if isinstance(x, Right):
                return ret(x.value)
            raise TypeError(f"iteration body returned {x!r}, expected Left/Right")

        try:
            hash(i)
            key = ("iter", body, i)
        except TypeError:
            key = None
        return delay(lambda: bind(body(i), after), key=key)

    return loop(init)


def spin() -> ITree:
    """The silently diverging tree ``Tau(Tau(...))``."""
    return iter_(lambda _: ret(Left(None)), None)


Handler = Callable[[Event], Optional[ITree]]


def interp(handler: Handler, t: ITree) -> ITree:
    """Fold ``handler`` over ``t``.

    ``handler`` returns ``None`` for events it does not handle; those are
    re-triggered unchanged.  A handled event is followed by one Tau.
    """

    def go(t: ITree) -> ITree:
        def step():
            node = t.force()
            if isinstance(node, Ret):
                return node
            if isinstance(node, Tau):
                return Tau(go(node.next))
            k = node.k
            h = handler(node.event)
            if h is None:
                if isinstance(node.event, Err):
                    return node
                return Vis(node.event, lambda a: go(k(a)))
            return bind(h, lambda a: tau(go(k(a))))

        key = ("interp", handler, t.key) if t.key is not None else None
        return ITree(step, key=key)

    return go(t)


def interp_mrec(handler: Callable[[Event], ITree], t: ITree,
                handles: Callable[[Event], bool] = lambda e: isinstance(e, Call)) -> ITree:
    """Interpret recursive events: handler output may itself raise handled events.

    Every handled event becomes one Tau followed by the handler's tree; other
    events stay visible.
    """

    def go(t: ITree) -> ITree:
        def step():
            node = t.force()
            if isinstance(node, Ret):
                return node
            if isinstance(node, Tau):
                return Tau(go(node.next))
            e, k = node.event, node.k
            if handles(e):
                return Tau(go(bind(handler(e), k)))
            if isinstance(e, Err):
                return node
            return Vis(e, lambda a: go(k(a)))

        key = ("mrec", handler, t.key) if t.key is not None else None
        return ITree(step, key=key)

    return go(t)


# ---------------------------------------------------------------- observation

class ErrEncountered(Exception):
    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.message = message
        self.trace = trace


class FuelExhausted(Exception):
    def __init__(self, trace: list):
        super().__init__(f"fuel exhausted after {len(trace)} nodes")
        self.trace = trace


@dataclass(frozen=True)
class Step:
    kind: str  # "tau" | "vis" | "ret"
    event: Any = None
    answer: Any = None
    value: Any = None

    def __repr__(self):
        if self.kind == "tau":
            return "Tau"
        if self.kind == "ret":
            return f"Ret({self.value!r})"
        return f"{self.event!r}↦{self.answer!r}"


def observe(t: ITree, fuel: int, oracle: Callable[[Event], Any]) -> list:
    """Force ``t`` along the path chosen by ``oracle``, at most ``fuel`` nodes."""
    trace: list = []
    while True:
        if len(trace) >= fuel:
            raise FuelExhausted(trace)
        node = t.force()
        if isinstance(node, Ret):
            trace.append(Step("ret", value=node.value))
            return trace
        if isinstance(node, Tau):
            trace.append(Step("tau"))
            t = node.next
            continue
        if isinstance(node.event, Err):
            raise ErrEncountered(node.event.msg, trace)
        answer = oracle(node.event)
        trace.append(Step("vis", event=node.event, answer=answer))
        t = node.k(answer)


def structurally_equal(t1: ITree, t2: ITree, depth: int,
                       answers: Callable[[Event], Iterable[Any]]) -> bool:
    """Node-for-node equality of the first ``depth`` levels of two trees.

    Vis continuations are compared on every answer from ``answers``.
    """
    stack = [(t1, t2, depth)]
    while stack:
        a, b, d = stack.pop()
        if d == 0:
            continue
        na, nb = a.force(), b.force()
        if type(na) is not type(nb):
            return False
        if isinstance(na, Ret):
            if na.value != nb.value:
                return False
        elif isinstance(na, Tau):
            stack.append((na.next, nb.next, d - 1))
        else:
            if na.event != nb.event:
                return False
            if isinstance(na.event, Err):
                continue
            for ans in answers(na.event):
                stack.append((na.k(ans), nb.k(ans), d - 1))
    return True
