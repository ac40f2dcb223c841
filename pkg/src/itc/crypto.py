"""IND-CCA experiment for toy KEMs built from programs, with exact advantages.

The challenger's three algorithms are the interprocedural semantics of three
function bodies run from a state with no variables defined; inputs are written
into named variables first and outputs read from named variables afterwards.
Adversaries are host-level tree builders over {Orac, Rnd}.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence

from .equiv import check_eutt
from .itree import Err, ITree, Orac, Ret, Rnd, Tau, Vis, bind, interp, ret, tau, trigger
from .lang import UNDEF, Bytes, FrozenMap, LVar, MachState, Program, cmd_vars
from .prob import Dist, pr_set, semp
from .sem import SemConfig, sem_inter, write_lval

HALF = Fraction(1, 2)


class MissingName(ValueError):
    pass


class NonConvergent(ValueError):
    def __init__(self, residual: Fraction):
        super().__init__(f"experiment did not converge; residual mass {residual}")
        self.residual = residual


class ErrorMassPresent(ValueError):
    def __init__(self, error: Fraction):
        super().__init__(f"experiment has error mass {error}")
        self.error = error


class InitializationViolation(ValueError):
    """A challenger component can fail, e.g. by leaving an output undefined."""

    def __init__(self, component: str, detail: str):
        super().__init__(f"{component} is unsafe: {detail}")
        self.component = component
        self.detail = detail


class PreservationViolated(AssertionError):
    def __init__(self, adv_src: Fraction, adv_tgt: Fraction, witness=None):
        super().__init__(f"advantage changed from {adv_src} to {adv_tgt}")
        self.adv_src = adv_src
        self.adv_tgt = adv_tgt
        self.witness = witness


@dataclass(frozen=True)
class KemNames:
    fn_genkey: str = "genkey"
    fn_encap: str = "encap"
    fn_decap: str = "decap"
    var_pk: str = "pk"
    var_sk: str = "sk"
    var_ct: str = "ct"
    var_msg: str = "m"

    @property
    def variables(self) -> tuple:
        return (self.var_pk, self.var_sk, self.var_ct, self.var_msg)


@dataclass(frozen=True)
class ExperimentConfig:
    chunk_bits: int = 2
    msg_chunks: int = 1
    n_max: int = 2 ** 14
    policy: str = "zero"  # "zero": reject with an all-zero message; "abort": output 0
    swap: bool = False  # give the adversary m1 for b = 0 and m0 for b = 1

    def __post_init__(self):
        if self.policy not in ("zero", "abort"):
            raise ValueError(f"unknown rejection policy {self.policy!r}")

    @property
    def zero_message(self) -> Bytes:
        return Bytes((0,) * self.msg_chunks)


# ----------------------------------------------------------------- challenger

@dataclass
class Challenger:
    genkey: Callable[[], ITree]
    encap: Callable[[Any], ITree]
    decap: Callable[[Any, Any], ITree]
    program: Optional[Program] = None


def _read(names: Sequence[str], single: bool = False):
    def finish(st: MachState) -> ITree:
        vals = []
        for x in names:
            v = st.get(x)
            if v is UNDEF:
                return trigger(Err(f"UndefVariable {x}"))
            vals.append(v)
        return ret(vals[0] if single else tuple(vals))
    return finish


def _write(st: MachState, writes: Sequence[tuple], cfg: SemConfig) -> ITree:
    t = ret(st)
    for name, v in writes:
        t = bind(t, lambda s, name=name, v=v: write_lval(LVar(name), v, s, cfg))
    return t


EMPTY_STATE = MachState(FrozenMap(), FrozenMap())


def make_challenger(p: Program, names: KemNames = KemNames(), chunk_bits: int = 2) -> Challenger:
    for f in (names.fn_genkey, names.fn_encap, names.fn_decap):
        if f not in p:
            raise MissingName(f"function {f!r} not found")
    g, e, d = p[names.fn_genkey], p[names.fn_encap], p[names.fn_decap]
    # Outputs must at least be mentioned; inputs may go unused.
    for fun, vs in ((g, (names.var_pk, names.var_sk)),
                    (e, (names.var_msg, names.var_ct)),
                    (d, (names.var_msg,))):
        present = cmd_vars(fun.body)
        for v in vs:
            if v not in present:
                raise MissingName(f"variable {v!r} does not occur in {fun.name}")
    cfg = SemConfig(chunk_bits, p)

    def genkey() -> ITree:
        return bind(sem_inter(g.body, EMPTY_STATE, cfg), _read((names.var_pk, names.var_sk)))

    def encap(pk) -> ITree:
        start = _write(EMPTY_STATE, [(names.var_pk, pk)], cfg)
        return bind(bind(start, lambda s: sem_inter(e.body, s, cfg)),
                    _read((names.var_msg, names.var_ct)))

    def decap(sk, ct) -> ITree:
        start = _write(EMPTY_STATE, [(names.var_sk, sk), (names.var_ct, ct)], cfg)
        return bind(bind(start, lambda s: sem_inter(d.body, s, cfg)),
                    _read((names.var_msg,), single=True))

    return Challenger(genkey, encap, decap, p)


# ------------------------------------------------------------------ adversary

@dataclass
class Adversary:
    name: str
    query: Callable[[Any], ITree]
    guess: Callable[[Any, Any, Any], ITree]


def _constant_adversary() -> Adversary:
    return Adversary("constant", lambda pk: ret(None), lambda mem, ct, m: ret(0))


def _replay_adversary() -> Adversary:
    def query(pk):
        # Learn something (or nothing) by decapsulating the public key.
        return trigger(Orac("decap", pk))

    def guess(mem, ct, m):
        # Replaying the challenge is refused by the oracle; then compare m to ct.
        return bind(trigger(Orac("decap", ct)), lambda _ans: ret(0 if m == ct else 1))

    return Adversary("replay", query, guess)


ADVERSARIES: Dict[str, Callable[[], Adversary]] = {
    "constant": _constant_adversary,
    "replay": _replay_adversary,
}


def adversary(name: str) -> Adversary:
    if name not in ADVERSARIES:
        raise KeyError(f"unknown adversary {name!r}; choose from {', '.join(sorted(ADVERSARIES))}")
    return ADVERSARIES[name]()


# ----------------------------------------------------------------- experiment

_ABORT = object()


def _interp_abortable(handler, t: ITree) -> ITree:
    """Like :func:`interp`, but a handler answer of ``_ABORT`` ends the tree."""

    def go(t):
        def step():
            node = t.force()
            if isinstance(node, Ret):
                return node
            if isinstance(node, Tau):
                return Tau(go(node.next))
            h = handler(node.event)
            k = node.k
            if h is _ABORT:
                return Ret(_ABORT)
            if h is None:
                if isinstance(node.event, Err):
                    return node
                return Vis(node.event, lambda a: go(k(a)))
            return bind(h, lambda a: tau(go(k(a))))
        return ITree(step)

    return go(t)


def run_experiment(ch: Challenger, adv: Adversary, cfg: ExperimentConfig = ExperimentConfig(),
                   on_decap: Optional[Callable[[str, Any, Any], None]] = None) -> ITree:
    """The IND-CCA experiment as a tree over {Rnd, Err} returning 0 or 1."""

    def note(stage, ct_query, ct_challenge):
        if on_decap is not None:
            on_decap(stage, ct_query, ct_challenge)

    def after_keys(keys):
        pk, sk = keys

        def full_oracle(e):
            if isinstance(e, Orac) and e.name == "decap":
                note("query", e.arg, None)
                return ch.decap(sk, e.arg)
            return None

        stage1 = interp(full_oracle, adv.query(pk))
        return bind(stage1, lambda mem: after_query(pk, sk, mem))

    def after_query(pk, sk, mem):
        def challenge(enc):
            m0, ct = enc

            def restricted(e):
                if isinstance(e, Orac) and e.name == "decap":
                    if e.arg == ct:
                        return _ABORT if cfg.policy == "abort" else ret(cfg.zero_message)
                    note("guess", e.arg, ct)
                    return ch.decap(sk, e.arg)
                return None

            def with_m1(a):
                m1 = Bytes(tuple(a))

                def with_b(bits):
                    b = bits[0] & 1
                    given = (m1 if b == 0 else m0) if cfg.swap else (m0 if b == 0 else m1)
                    stage2 = _interp_abortable(restricted, adv.guess(mem, ct, given))
                    return bind(stage2, lambda g: ret(0 if g is _ABORT else int(g == b)))

                return bind(trigger(Rnd(1)), with_b)

            return bind(trigger(Rnd(cfg.msg_chunks)), with_m1)

        return bind(ch.encap(pk), challenge)

    return bind(ch.genkey(), after_keys)


@dataclass
class ExperimentResult:
    dist: Dist
    pr_win: Fraction
    advantage: Fraction
    residual: Fraction
    n_used: int

    def to_json(self):
        return {
            "pr_win": _fj(self.pr_win),
            "advantage": _fj(self.advantage),
            "residual": _fj(self.residual),
            "error_mass": _fj(self.dist.error),
            "n_used": self.n_used,
        }


def _fj(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def evaluate(ch: Challenger, adv: Adversary, cfg: ExperimentConfig = ExperimentConfig(),
             on_decap=None) -> ExperimentResult:
    r = semp(run_experiment(ch, adv, cfg, on_decap), cfg.n_max, chunk_bits=cfg.chunk_bits)
    if r.dist.error != 0:
        raise ErrorMassPresent(r.dist.error)
    if r.residual != 0:
        raise NonConvergent(r.residual)
    p1 = pr_set(r.dist, lambda v: v == 1)
    return ExperimentResult(r.dist, p1, abs(p1 - HALF), r.residual, r.n_used)


def advantage(ch: Challenger, adv: Adversary, cfg: ExperimentConfig = ExperimentConfig()) -> Fraction:
    """|Pr[experiment = 1] - 1/2| as an exact rational."""
    return evaluate(ch, adv, cfg).advantage


# --------------------------------------------------------------- preservation

def safety_scan(ch: Challenger, cfg: ExperimentConfig) -> None:
    """Raise :class:`InitializationViolation` if any component can fail."""

    def dist(t):
        return semp(t, cfg.n_max, chunk_bits=cfg.chunk_bits)

    def check(name, r):
        if r.dist.error != 0:
            raise InitializationViolation(name, f"error mass {r.dist.error}"
                                          f" ({'; '.join(sorted(r.dist.errors))})")
        if not r.converged:
            raise InitializationViolation(name, f"does not terminate within {cfg.n_max} steps")

    g = dist(ch.genkey())
    check("genkey", g)
    for pk, sk in g.dist.support:
        e = dist(ch.encap(pk))
        check("encap", e)
        for _m, ct in e.dist.support:
            check("decap", dist(ch.decap(sk, ct)))


@dataclass
class PreservationReport:
    adversary: str
    passes: List[str]
    advantage_src: Fraction
    advantage_tgt: Fraction
    residual_src: Fraction
    residual_tgt: Fraction
    error_mass: Fraction
    eutt_verdict: str
    compiled: Optional[Program] = None

    @property
    def equal(self) -> bool:
        return self.advantage_src == self.advantage_tgt

    def to_json(self):
        return {
            "adversary": self.adversary,
            "passes": list(self.passes),
            "advantage_src": _fj(self.advantage_src),
            "advantage_tgt": _fj(self.advantage_tgt),
            "residuals": {"src": _fj(self.residual_src), "tgt": _fj(self.residual_tgt)},
            "error_mass": _fj(self.error_mass),
            "eutt_verdict": self.eutt_verdict,
            "equal": self.equal,
        }


def preservation_check(src: Program, passes: Sequence[str], adv: Adversary,
                       cfg: ExperimentConfig = ExperimentConfig(),
                       names: KemNames = KemNames(), depth: int = 200,
                       tau_budget: int = 1000) -> PreservationReport:
    """Compile ``src`` and compare the exact advantages of both challengers."""
    from .passes import pipeline

    ch_src = make_challenger(src, names, cfg.chunk_bits)
    safety_scan(ch_src, cfg)
    tgt, _ = pipeline(src, list(passes), keep=names.variables)
    ch_tgt = make_challenger(tgt, names, cfg.chunk_bits)
    r_src = evaluate(ch_src, adv, cfg)
    r_tgt = evaluate(ch_tgt, adv, cfg)
    verdict = check_eutt(run_experiment(ch_src, adv, cfg), run_experiment(ch_tgt, adv, cfg),
                         depth=depth, tau_budget=tau_budget, chunk_bits=cfg.chunk_bits)
    report = PreservationReport(adv.name, list(passes), r_src.advantage, r_tgt.advantage,
                                r_src.residual, r_tgt.residual,
                                r_src.dist.error + r_tgt.dist.error,
                                type(verdict).__name__, tgt)
    if not report.equal:
        witness = verdict.to_json() if hasattr(verdict, "to_json") else None
        raise PreservationViolated(r_src.advantage, r_tgt.advantage, witness)
    return report
