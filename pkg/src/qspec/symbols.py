"""Arithmetic expressions for phase-space symbols.

Grammar (Pratt parser, loosest binding first)::

    expr   := expr ('+' | '-') expr          left associative
            | expr ('*' | '/') expr          left associative
            | '-' expr                       binds looser than '^'
            | expr '^' expr                  right associative, integer powers
            | NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

    FUNC   := cos | sin | exp | sqrt | abs

Variables are ``u``, ``phi`` on the sphere and ``x``, ``xi`` on the circle.
The parser can also run with ``domain=None``, which accepts any identifier.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Binary",
    "Call",
    "DOMAIN_VARS",
    "FUNCTIONS",
    "Neg",
    "Num",
    "SymbolError",
    "Var",
    "eval_symbol",
    "parse_symbol",
    "pretty",
]

DOMAIN_VARS = {"sphere": ("u", "phi"), "circle": ("x", "xi")}
FUNCTIONS = {
    "cos": np.cos,
    "sin": np.sin,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


class SymbolError(ValueError):
    """Lexing, parsing, domain, arity or evaluation failure.

    ``kind`` is one of ``lex``, ``parse``, ``domain``, ``arity``, ``eval``;
    ``offset`` is a byte offset into the UTF-8 source, when meaningful.
    """

    def __init__(self, kind: str, message: str, offset: int | None = None):
        self.kind = kind
        self.offset = offset
        where = f" at byte {offset}" if offset is not None else ""
        super().__init__(f"{kind} error{where}: {message}")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


# -- lexer ------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num | name | op | end
    text: str
    offset: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    boff = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise SymbolError("lex", f"unexpected character {src[pos]!r}", boff)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), boff))
        boff += len(m.group().encode("utf-8"))
        pos = m.end()
    toks.append(_Tok("end", "", boff))
    return toks


# -- parser -----------------------------------------------------------------

_BINARY_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_BP = 30
MAX_DEPTH = 200  # nesting limit, well inside the interpreter's recursion budget
MAX_TREE_DEPTH = 400


class _Parser:
    def __init__(self, toks, variables):
        self.toks = toks
        self.i = 0
        self.variables = variables
        self.depth = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.tok
        if t.text != text or t.kind != "op":
            found = repr(t.text) if t.kind != "end" else "end of input"
            raise SymbolError("parse", f"expected {text!r}, found {found}", t.offset)
        return self.advance()

    def expression(self, rbp=0):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise SymbolError("parse", f"expression nested deeper than {MAX_DEPTH}", self.tok.offset)
        left = self.nud(self.advance())
        while self.tok.kind == "op" and rbp < _BINARY_BP.get(self.tok.text, 0):
            t = self.advance()
            left = self.led(t, left)
        self.depth -= 1
        return left

    def nud(self, t: _Tok):
        if t.kind == "num":
            return Num(float(t.text))
        if t.kind == "name":
            if t.text in FUNCTIONS:
                if self.tok.text != "(":
                    raise SymbolError("arity", f"function {t.text} needs one parenthesised argument", self.tok.offset)
                self.advance()
                arg = self.expression()
                if self.tok.text == ",":
                    raise SymbolError("arity", f"function {t.text} takes exactly one argument", self.tok.offset)
                self.expect(")")
                return Call(t.text, arg)
            if self.variables is not None and t.text not in self.variables:
                raise SymbolError(
                    "domain", f"unknown variable {t.text!r}; expected one of {', '.join(self.variables)}", t.offset
                )
            return Var(t.text)
        if t.kind == "op" and t.text == "-":
            return Neg(self.expression(_UNARY_BP))
        if t.kind == "op" and t.text == "+":
            return self.expression(_UNARY_BP)
        if t.kind == "op" and t.text == "(":
            inner = self.expression()
            self.expect(")")
            return inner
        found = repr(t.text) if t.kind != "end" else "end of input"
        raise SymbolError("parse", f"unexpected {found}", t.offset)

    def led(self, t: _Tok, left):
        if t.text == "^":
            return Binary("^", left, self.expression(_BINARY_BP["^"] - 1))
        return Binary(t.text, left, self.expression(_BINARY_BP[t.text]))


def parse_symbol(src: str, domain: str | None = "sphere"):
    """Parse ``src`` into an immutable expression tree.

    ``domain`` restricts the admissible variables (``"sphere"``: u, phi;
    ``"circle"``: x, xi). ``None`` admits any identifier.
    """
    if domain is not None and domain not in DOMAIN_VARS:
        raise ValueError(f"unknown domain {domain!r}")
    if isinstance(src, bytes):
        try:
            src = src.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SymbolError("lex", "input is not valid UTF-8", exc.start) from None
    if not src.strip():
        raise SymbolError("parse", "empty expression", 0)
    p = _Parser(_tokenize(src), DOMAIN_VARS[domain] if domain else None)
    tree = p.expression()
    if p.tok.kind != "end":
        raise SymbolError("parse", f"unexpected {p.tok.text!r}", p.tok.offset)
    if _depth(tree) > MAX_TREE_DEPTH:
        # long left-associative chains: evaluation and printing recurse once per level
        raise SymbolError("parse", f"expression tree deeper than {MAX_TREE_DEPTH}", 0)
    return tree


def _depth(node) -> int:
    best, stack = 0, [(node, 1)]
    while stack:
        n, d = stack.pop()
        best = max(best, d)
        if isinstance(n, Binary):
            stack += [(n.left, d + 1), (n.right, d + 1)]
        elif isinstance(n, Neg):
            stack.append((n.operand, d + 1))
        elif isinstance(n, Call):
            stack.append((n.arg, d + 1))
    return best


# -- printing and evaluation -------------------------------------------------


def pretty(node) -> str:
    """Fully parenthesised source text; re-parsing it yields the same tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{pretty(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({pretty(node.arg)})"
    return f"({pretty(node.left)} {node.op} {pretty(node.right)})"


def variables(node) -> set:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Call)):
        return variables(node.operand if isinstance(node, Neg) else node.arg)
    return variables(node.left) | variables(node.right)


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise SymbolError("domain", f"no value bound for variable {node.name!r}") from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_eval(node.arg, env))
    a = _eval(node.left, env)
    b = _eval(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    bb = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(bb)) or np.any(bb != np.round(bb)):
        raise SymbolError("eval", "'^' needs an integer exponent")
    if np.all(bb == bb.flat[0]) and bb.size:
        n = int(bb.flat[0])
        if n < 0:
            return 1.0 / (np.asarray(a, dtype=float) ** (-n))
        return np.asarray(a, dtype=float) ** n
    return np.power(np.asarray(a, dtype=float), bb)


def eval_symbol(node, point=None, **values):
    """Evaluate ``node``; values may be scalars or broadcastable arrays.

    The point is given either as a mapping or as keyword arguments, e.g.
    ``eval_symbol(tree, u=0.5)``. Non-finite results raise ``SymbolError``.
    """
    env = dict(point or {})
    env.update(values)
    try:
        with np.errstate(all="ignore"):
            out = _eval(node, env)
    except (ZeroDivisionError, OverflowError) as exc:
        # plain Python floats raise where numpy would return inf or nan
        raise SymbolError("eval", f"symbol is not finite on its domain ({exc})") from None
    arr = np.asarray(out, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise SymbolError("eval", "symbol is not finite on its domain")
    return float(arr) if arr.ndim == 0 else arr
