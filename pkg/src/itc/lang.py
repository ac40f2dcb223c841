"""Core language: values, machine states, AST, parser and pretty-printer.

Concrete syntax (``.itc`` files)::

    program := fundef*
    fundef  := ["inline"] "fn" NAME "(" [NAME] ")" "->" NAME "{" cmd* "}"
    cmd     := "skip" ";" | lv "=" e ";" | lv "=$" e ";" | lv "=" NAME "(" e ")" ";"
             | "if" e "{" cmd* "}" "else" "{" cmd* "}" | "while" e "{" cmd* "}"
    lv      := NAME | NAME "[" e "]" | "[" e "]" | "(" lv "," lv ("," lv)* ")"

Expressions use C-like precedence: ``||`` < ``&&`` < ``^`` < ``==`` <
``<``/``<=`` < ``+``/``-`` < ``*`` < ``!``.  ``#`` starts a line comment
unless it directly follows a name and is followed by digits (``x#3`` is the
fresh-name form used by inlining).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Union

WORD_BITS = 64
WORD_MOD = 1 << WORD_BITS


# --------------------------------------------------------------------- values

@dataclass(frozen=True, slots=True)
class Word:
    v: int

    def __post_init__(self):
        if not 0 <= self.v < WORD_MOD:
            object.__setattr__(self, "v", self.v % WORD_MOD)


@dataclass(frozen=True, slots=True)
class Bool:
    b: bool


@dataclass(frozen=True, slots=True)
class Bytes:
    chunks: tuple


@dataclass(frozen=True, slots=True)
class Tup:
    items: tuple


Value = Union[Word, Bool, Bytes, Tup]


class _Undef:
    __slots__ = ()

    def __repr__(self):
        return "Undef"

    def __reduce__(self):
        return (_undef, ())


def _undef():
    return UNDEF


UNDEF = _Undef.__new__(_Undef)


def render_value(v) -> str:
    """Human-readable rendering used in reports and JSON output."""
    if isinstance(v, Word):
        return str(v.v)
    if isinstance(v, Bool):
        return "true" if v.b else "false"
    if isinstance(v, Bytes):
        return "<" + ",".join(str(c) for c in v.chunks) + ">"
    if isinstance(v, Tup):
        return "(" + ", ".join(render_value(x) for x in v.items) + ")"
    if isinstance(v, FrozenMap):
        return "{" + ", ".join(f"{k}: {render_value(x)}" for k, x in sorted(v.items(), key=lambda kv: str(kv[0]))) + "}"
    if isinstance(v, MachState):
        return f"<vm={render_value(v.vm)} mem={render_value(v.mem)}>"
    if isinstance(v, tuple):
        return "(" + ", ".join(render_value(x) for x in v) + ")"
    if isinstance(v, int) and not isinstance(v, bool):
        return str(v)
    return repr(v)


class FrozenMap(Mapping):
    """Small immutable, hashable mapping with functional update."""

    __slots__ = ("_d", "_h")

    def __init__(self, data=None):
        self._d = dict(data) if data else {}
        self._h = None

    def __getitem__(self, key):
        return self._d[key]

    def __iter__(self):
        return iter(self._d)

    def __len__(self):
        return len(self._d)

    def __hash__(self):
        if self._h is None:
            self._h = hash(frozenset(self._d.items()))
        return self._h

    def __eq__(self, other):
        if isinstance(other, FrozenMap):
            return self._d == other._d
        return NotImplemented

    def set(self, key, value) -> "FrozenMap":
        d = dict(self._d)
        d[key] = value
        return FrozenMap(d)

    def remove(self, key) -> "FrozenMap":
        if key not in self._d:
            return self
        d = dict(self._d)
        del d[key]
        return FrozenMap(d)

    def __repr__(self):
        return f"FrozenMap({self._d!r})"


EMPTY_MAP = FrozenMap()


@dataclass(frozen=True)
class MachState:
    """Variable map (absent means Undef) and sparse byte-addressed memory."""

    vm: FrozenMap = EMPTY_MAP
    mem: FrozenMap = EMPTY_MAP

    def get(self, x: str):
        return self.vm.get(x, UNDEF)

    def set(self, x: str, v) -> "MachState":
        return MachState(self.vm.set(x, v), self.mem)

    def with_mem(self, mem: FrozenMap) -> "MachState":
        return MachState(self.vm, mem)

    @staticmethod
    def of(vm: Optional[dict] = None, mem: Optional[dict] = None) -> "MachState":
        return MachState(FrozenMap(vm or {}), FrozenMap(mem or {}))


# ------------------------------------------------------------------------ AST

def _pos():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Const:
    value: Union[int, bool]
    pos: Optional[tuple] = _pos()


@dataclass(frozen=True)
class Var:
    name: str
    pos: Optional[tuple] = _pos()


@dataclass(frozen=True)
class TupleE:
    items: tuple
    pos: Optional[tuple] = _pos()


@dataclass(frozen=True)
class Op:
    op: str
    args: tuple
    pos: Optional[tuple] = _pos()


@dataclass(frozen=True)
class ArrRead:
    name: str
    index: "Expr"
    pos: Optional[tuple] = _pos()


@dataclass(frozen=True)
class MemRead:
    addr: "Expr"
    pos: Optional[tuple] = _pos()


Expr = Union[Const, Var, TupleE, Op, ArrRead, MemRead]

BINOPS = ("+", "-", "*", "<=", "<", "==", "&&", "||", "^")
UNOPS = ("!",)
ARITY = {**{o: 2 for o in BINOPS}, "!": 1}


@dataclass(frozen=True)
class LVar:
    name: str
    pos: Optional[tuple] = _pos()


@dataclass(frozen=True)
class LArr:
    name: str
    index: Expr
    pos: Optional[tuple] = _pos()


@dataclass(frozen=True)
class LMem:
    addr: Expr
    pos: Optional[tuple] = _pos()


@dataclass(frozen=True)
class LTuple:
    items: tuple
    pos: Optional[tuple] = _pos()


Lval = Union[LVar, LArr, LMem, LTuple]


@dataclass(frozen=True)
class Skip:
    pos: Optional[tuple] = _pos()


@dataclass(frozen=True)
class Assign:
    lv: Lval
    e: Expr
    pos: Optional[tuple] = _pos()


@dataclass(frozen=True)
class Rand:
    lv: Lval
    e: Expr
    pos: Optional[tuple] = _pos()


@dataclass(frozen=True)
class Seq:
    first: "Command"
    rest: "Command"
    pos: Optional[tuple] = _pos()


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Command"
    orelse: "Command"
    pos: Optional[tuple] = _pos()


@dataclass(frozen=True)
class While:
    cond: Expr
    body: "Command"
    pos: Optional[tuple] = _pos()


@dataclass(frozen=True)
class CallCmd:
    lv: Lval
    fname: str
    arg: Expr
    pos: Optional[tuple] = _pos()


Command = Union[Skip, Assign, Rand, Seq, If, While, CallCmd]


def seq(*cmds: Command) -> Command:
    """Canonical right-nested sequence; nested Seqs are flattened."""
    flat = []
    for c in cmds:
        flat.extend(flatten(c))
    if not flat:
        return Skip()
    out = flat[-1]
    for c in reversed(flat[:-1]):
        out = Seq(c, out)
    return out


def flatten(c: Command) -> list:
    out = []
    stack = [c]
    while stack:
        c = stack.pop()
        if isinstance(c, Seq):
            stack.append(c.rest)
            stack.append(c.first)
        else:
            out.append(c)
    return out


@dataclass(frozen=True)
class FunDef:
    name: str
    param: Optional[str]
    result: str
    body: Command
    inline: bool = False
    pos: Optional[tuple] = _pos()


class DuplicateFunction(ValueError):
    pass


class UnknownFunction(ValueError):
    pass


@dataclass(frozen=True)
class Program:
    funs: tuple

    def __post_init__(self):
        seen = set()
        for f in self.funs:
            if f.name in seen:
                raise DuplicateFunction(f"duplicate function {f.name!r}")
            seen.add(f.name)

    def __getitem__(self, name: str) -> FunDef:
        for f in self.funs:
            if f.name == name:
                return f
        raise UnknownFunction(name)

    def __contains__(self, name: str) -> bool:
        return any(f.name == name for f in self.funs)

    @property
    def names(self) -> list:
        return [f.name for f in self.funs]

    def replace(self, fun: FunDef) -> "Program":
        return Program(tuple(fun if f.name == fun.name else f for f in self.funs))


# ------------------------------------------------------------ syntax helpers

def expr_vars(e: Expr) -> set:
    out = set()
    stack = [e]
    while stack:
        e = stack.pop()
        if isinstance(e, Var):
            out.add(e.name)
        elif isinstance(e, TupleE):
            stack.extend(e.items)
        elif isinstance(e, Op):
            stack.extend(e.args)
        elif isinstance(e, ArrRead):
            out.add(e.name)
            stack.append(e.index)
        elif isinstance(e, MemRead):
            stack.append(e.addr)
    return out


def lval_defs(lv: Lval) -> set:
    """Variables overwritten by a write through ``lv``."""
    if isinstance(lv, LVar):
        return {lv.name}
    if isinstance(lv, LArr):
        return {lv.name}
    if isinstance(lv, LTuple):
        return set().union(*(lval_defs(x) for x in lv.items))
    return set()


def lval_uses(lv: Lval) -> set:
    """Variables read while writing through ``lv`` (indices, addresses, arrays)."""
    if isinstance(lv, LArr):
        return {lv.name} | expr_vars(lv.index)
    if isinstance(lv, LMem):
        return expr_vars(lv.addr)
    if isinstance(lv, LTuple):
        return set().union(*(lval_uses(x) for x in lv.items))
    return set()


def cmd_vars(c: Command) -> set:
    out = set()
    for c in walk(c):
        if isinstance(c, (Assign, Rand)):
            out |= expr_vars(c.e) | lval_defs(c.lv) | lval_uses(c.lv)
        elif isinstance(c, CallCmd):
            out |= expr_vars(c.arg) | lval_defs(c.lv) | lval_uses(c.lv)
        elif isinstance(c, (If, While)):
            out |= expr_vars(c.cond)
    return out


def walk(c: Command) -> Iterator[Command]:
    """Pre-order traversal of all commands, including ``c`` itself."""
    stack = [c]
    while stack:
        c = stack.pop()
        yield c
        if isinstance(c, Seq):
            stack.append(c.rest)
            stack.append(c.first)
        elif isinstance(c, If):
            stack.append(c.orelse)
            stack.append(c.then)
        elif isinstance(c, While):
            stack.append(c.body)


# --------------------------------------------------------------------- parser

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\#[0-9]+)?)
  | (?P<comment>\#[^\n]*)
  | (?P<num>[0-9]+)
  | (?P<op>=\$|->|==|<=|&&|\|\||[-+*<!^=;,(){}\[\]])
""", re.VERBOSE)

KEYWORDS = {"fn", "inline", "if", "else", "while", "skip", "true", "false"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str, filename: str) -> list:
    toks = []
    line, col, i = 1, 1, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise SyntaxError(f"unexpected character {text[i]!r}",
                              (filename, line, col, _line_of(text, line)))
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        elif kind not in ("ws", "comment"):
            if kind == "name" and s in KEYWORDS:
                kind = "kw"
            toks.append(_Tok(kind, s, line, col))
            col += len(s)
        else:
            col += len(s)
        i = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


def _line_of(text: str, line: int) -> str:
    lines = text.splitlines()
    return lines[line - 1] if 0 < line <= len(lines) else ""


_PREC = [("||",), ("&&",), ("^",), ("==",), ("<", "<="), ("+", "-"), ("*",)]


class _Parser:
    def __init__(self, text: str, filename: str):
        self.text = text
        self.filename = filename
        self.toks = _lex(text, filename)
        self.i = 0

    # token helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k=1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Optional[_Tok] = None):
        tok = tok or self.tok
        shown = tok.text or "end of input"
        raise SyntaxError(f"{msg} at {shown!r} (line {tok.line}, column {tok.col})",
                          (self.filename, tok.line, tok.col, _line_of(self.text, tok.line)))

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "kw") and self.tok.text == text

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            self.error(f"expected {text!r}")
        t = self.tok
        self.i += 1
        return t

    def name(self) -> _Tok:
        if self.tok.kind != "name":
            self.error("expected a name")
        t = self.tok
        self.i += 1
        return t

    # grammar
    def program(self) -> Program:
        funs = []
        seen = set()
        while self.tok.kind != "eof":
            f = self.fundef()
            if f.name in seen:
                raise DuplicateFunction(f"duplicate function {f.name!r} (line {f.pos[0]})")
            seen.add(f.name)
            funs.append(f)
        prog = Program(tuple(funs))
        names = set(prog.names)
        for f in prog.funs:
            for c in walk(f.body):
                if isinstance(c, CallCmd) and c.fname not in names:
                    line = c.pos[0] if c.pos else "?"
                    raise UnknownFunction(f"call to unknown function {c.fname!r} (line {line})")
        return prog

    def fundef(self) -> FunDef:
        start = self.tok
        inline = False
        if self.at("inline"):
            inline = True
            self.i += 1
        self.expect("fn")
        name = self.name().text
        self.expect("(")
        param = None
        if self.tok.kind == "name":
            param = self.name().text
        self.expect(")")
        self.expect("->")
        result = self.name().text
        body = self.block()
        return FunDef(name, param, result, body, inline, pos=(start.line, start.col))

    def block(self) -> Command:
        self.expect("{")
        cmds = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("unterminated block")
            cmds.append(self.cmd())
        self.expect("}")
        return seq(*cmds)

    def cmd(self) -> Command:
        t = self.tok
        pos = (t.line, t.col)
        if self.at("skip"):
            self.i += 1
            self.expect(";")
            return Skip(pos=pos)
        if self.at("if"):
            self.i += 1
            cond = self.expr()
            then = self.block()
            self.expect("else")
            orelse = self.block()
            return If(cond, then, orelse, pos=pos)
        if self.at("while"):
            self.i += 1
            cond = self.expr()
            body = self.block()
            return While(cond, body, pos=pos)
        lv = self.lval()
        if self.at("=$"):
            self.i += 1
            e = self.expr()
            self.expect(";")
            return Rand(lv, e, pos=pos)
        self.expect("=")
        if self.tok.kind == "name" and self.peek().kind == "op" and self.peek().text == "(":
            fname = self.name().text
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            self.expect(";")
            return CallCmd(lv, fname, arg, pos=pos)
        e = self.expr()
        self.expect(";")
        return Assign(lv, e, pos=pos)

    def lval(self) -> Lval:
        t = self.tok
        pos = (t.line, t.col)
        if self.at("["):
            self.i += 1
            addr = self.expr()
            self.expect("]")
            return LMem(addr, pos=pos)
        if self.at("("):
            self.i += 1
            items = [self.lval()]
            while self.at(","):
                self.i += 1
                items.append(self.lval())
            self.expect(")")
            if len(items) < 2:
                self.error("tuple left-value needs at least two components", t)
            if any(isinstance(x, LTuple) for x in items):
                self.error("nested tuple left-values are not allowed", t)
            return LTuple(tuple(items), pos=pos)
        if t.kind != "name":
            self.error("expected a left-value")
        name = self.name().text
        if self.at("["):
            self.i += 1
            idx = self.expr()
            self.expect("]")
            return LArr(name, idx, pos=pos)
        return LVar(name, pos=pos)

    def expr(self, level: int = 0) -> Expr:
        if level == len(_PREC):
            return self.unary()
        left = self.expr(level + 1)
        while self.tok.kind == "op" and self.tok.text in _PREC[level]:
            t = self.tok
            self.i += 1
            right = self.expr(level + 1)
            left = Op(t.text, (left, right), pos=(t.line, t.col))
        return left

    def unary(self) -> Expr:
        t = self.tok
        if self.at("!"):
            self.i += 1
            return Op("!", (self.unary(),), pos=(t.line, t.col))
        return self.atom()

    def atom(self) -> Expr:
        t = self.tok
        pos = (t.line, t.col)
        if t.kind == "num":
            self.i += 1
            n = int(t.text)
            if n >= WORD_MOD:
                self.error("integer literal out of 64-bit range", t)
            return Const(n, pos=pos)
        if self.at("true") or self.at("false"):
            self.i += 1
            return Const(t.text == "true", pos=pos)
        if t.kind == "name":
            self.i += 1
            if self.at("["):
                self.i += 1
                idx = self.expr()
                self.expect("]")
                return ArrRead(t.text, idx, pos=pos)
            return Var(t.text, pos=pos)
        if self.at("["):
            self.i += 1
            addr = self.expr()
            self.expect("]")
            return MemRead(addr, pos=pos)
        if self.at("("):
            self.i += 1
            first = self.expr()
            if self.at(","):
                items = [first]
                while self.at(","):
                    self.i += 1
                    items.append(self.expr())
                self.expect(")")
                return TupleE(tuple(items), pos=pos)
            self.expect(")")
            return first
        self.error("expected an expression")


def parse(text: str, filename: str = "<input>") -> Program:
    return _Parser(text, filename).program()


def parse_cmd(text: str) -> Command:
    """Parse a bare command sequence (used in tests and the REPL-less CLI)."""
    p = _Parser("{" + text + "}", "<cmd>")
    c = p.block()
    if p.tok.kind != "eof":
        p.error("trailing input")
    return c


def parse_expr(text: str) -> Expr:
    p = _Parser(text, "<expr>")
    e = p.expr()
    if p.tok.kind != "eof":
        p.error("trailing input")
    return e


# ------------------------------------------------------------- pretty-printer

def pretty_expr(e: Expr) -> str:
    if isinstance(e, Const):
        if isinstance(e.value, bool):
            return "true" if e.value else "false"
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, TupleE):
        return "(" + ", ".join(pretty_expr(x) for x in e.items) + ")"
    if isinstance(e, ArrRead):
        return f"{e.name}[{pretty_expr(e.index)}]"
    if isinstance(e, MemRead):
        return f"[{pretty_expr(e.addr)}]"
    if e.op == "!":
        return "!" + _operand(e.args[0])
    return f"{_operand(e.args[0])} {e.op} {_operand(e.args[1])}"


def _operand(e: Expr) -> str:
    s = pretty_expr(e)
    return f"({s})" if isinstance(e, Op) else s


def pretty_lval(lv: Lval) -> str:
    if isinstance(lv, LVar):
        return lv.name
    if isinstance(lv, LArr):
        return f"{lv.name}[{pretty_expr(lv.index)}]"
    if isinstance(lv, LMem):
        return f"[{pretty_expr(lv.addr)}]"
    return "(" + ", ".join(pretty_lval(x) for x in lv.items) + ")"


def pretty_cmd(c: Command, indent: int = 0) -> str:
    pad = "    " * indent
    lines = []
    for c in flatten(c):
        if isinstance(c, Skip):
            lines.append(f"{pad}skip;")
        elif isinstance(c, Assign):
            lines.append(f"{pad}{pretty_lval(c.lv)} = {pretty_expr(c.e)};")
        elif isinstance(c, Rand):
            lines.append(f"{pad}{pretty_lval(c.lv)} =$ {pretty_expr(c.e)};")
        elif isinstance(c, CallCmd):
            lines.append(f"{pad}{pretty_lval(c.lv)} = {c.fname}({pretty_expr(c.arg)});")
        elif isinstance(c, If):
            lines.append(f"{pad}if {pretty_expr(c.cond)} {{")
            lines.append(pretty_cmd(c.then, indent + 1))
            lines.append(f"{pad}}} else {{")
            lines.append(pretty_cmd(c.orelse, indent + 1))
            lines.append(f"{pad}}}")
        elif isinstance(c, While):
            lines.append(f"{pad}while {pretty_expr(c.cond)} {{")
            lines.append(pretty_cmd(c.body, indent + 1))
            lines.append(f"{pad}}}")
    return "\n".join(lines)


def pretty_fun(f: FunDef) -> str:
    head = "inline fn" if f.inline else "fn"
    return (f"{head} {f.name}({f.param or ''}) -> {f.result} {{\n"
            f"{pretty_cmd(f.body, 1)}\n}}")


def pretty(p: Program) -> str:
    return "\n\n".join(pretty_fun(f) for f in p.funs) + "\n"
