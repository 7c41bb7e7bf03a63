"""A small expression language for symbols sigma(x, xi).

Grammar (Pratt parser, loosest to tightest)::

    expr   := expr ('+' | '-') expr
            | expr ('*' | '/') expr
            | '-' expr
            | expr '^' expr          (right-associative, binds tighter than unary minus)
            | NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names are ``x1..xd``, ``xi1..xil``, ``bracket`` (the frequency weight of the
bound system), ``pi``, and the functions sin, cos, exp, log, abs, sqrt.
Evaluation is real-valued.
"""

import dataclasses
import math
import re

import numpy as np

from .errors import NHSError, NumericalFailure

__all__ = [
    "SymbolSyntaxError",
    "LexError",
    "ParseError",
    "UnknownIdentifierError",
    "SymbolDomainError",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "SymbolExpr",
    "parse",
    "evaluate",
    "evaluate_array",
    "to_text",
    "sexpr",
    "variables",
]

# parenthesis/prefix nesting bound and tree height bound; both keep the
# recursive parser, printer and comparisons well inside the stack limit
MAX_DEPTH = 200
MAX_HEIGHT = 400

FUNCTIONS = {
    "sin": (math.sin, np.sin),
    "cos": (math.cos, np.cos),
    "exp": (math.exp, np.exp),
    "log": (math.log, np.log),
    "abs": (abs, np.abs),
    "sqrt": (math.sqrt, np.sqrt),
}
CONSTANTS = {"pi": math.pi}
_VAR_RE = re.compile(r"(?:x|xi)[1-9][0-9]*\Z", re.ASCII)


class SymbolSyntaxError(NHSError, ValueError):
    """Malformed symbol text; ``position`` is a 0-based character offset."""

    def __init__(self, message, position, text=None):
        self.position = int(position)
        self.text = text
        super().__init__(f"{message} at position {self.position}")


class LexError(SymbolSyntaxError):
    pass


class ParseError(SymbolSyntaxError):
    pass


class UnknownIdentifierError(SymbolSyntaxError):
    pass


class SymbolDomainError(NumericalFailure):
    """Evaluation left the real domain; ``subexpr`` is the offending piece."""

    def __init__(self, message, subexpr):
        self.subexpr = subexpr
        super().__init__(f"{message} in '{subexpr}'")


# ---------------------------------------------------------------------------
# AST

@dataclasses.dataclass(frozen=True)
class Num:
    value: float


@dataclasses.dataclass(frozen=True)
class Var:
    name: str


@dataclasses.dataclass(frozen=True)
class Neg:
    operand: object


@dataclasses.dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclasses.dataclass(frozen=True)
class Call:
    func: str
    arg: object


# ---------------------------------------------------------------------------
# lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE | re.ASCII,
)


def _tokens(text):
    pos = 0
    out = []
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise LexError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            val = m.group()
            if kind == "num":
                num = float(val)
                if not math.isfinite(num):
                    raise LexError(f"numeric literal {val!r} overflows", pos, text)
                out.append(("num", num, pos))
            else:
                out.append((kind, val, pos))
        pos = m.end()
    out.append(("end", None, n))
    return out


# ---------------------------------------------------------------------------
# parser

_INFIX = {"+": (10, 11), "-": (10, 11), "*": (20, 21), "/": (20, 21), "^": (40, 39)}
_PREFIX_NEG = 30


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokens(text)
        self.i = 0
        self.depth = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, val):
        tok = self.take()
        if tok[1] != val:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ParseError(f"expected {val!r}, found {what}", tok[2], self.text)

    def parse(self):
        node, _ = self.expr(0)
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2], self.text)
        return node

    def grow(self, height, pos):
        if height > MAX_HEIGHT:
            raise ParseError("expression tree too tall", pos, self.text)
        return height

    def expr(self, min_bp):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ParseError("expression nested too deeply", self.peek()[2], self.text)
        left, h = self.prefix()
        while True:
            tok = self.peek()
            if tok[0] != "op" or tok[1] not in _INFIX:
                break
            lbp, rbp = _INFIX[tok[1]]
            if lbp < min_bp:
                break
            self.take()
            right, hr = self.expr(rbp)
            left = BinOp(tok[1], left, right)
            h = self.grow(1 + max(h, hr), tok[2])
        self.depth -= 1
        return left, h

    def prefix(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(val), 1
        if kind == "op" and val == "-":
            node, h = self.expr(_PREFIX_NEG)
            return Neg(node), self.grow(h + 1, pos)
        if kind == "op" and val == "(":
            node, h = self.expr(0)
            self.expect(")")
            return node, h
        if kind == "name":
            if val in FUNCTIONS:
                nxt = self.peek()
                if nxt[1] != "(":
                    raise ParseError(f"function {val!r} needs parenthesized argument",
                                     nxt[2], self.text)
                self.take()
                arg, h = self.expr(0)
                self.expect(")")
                return Call(val, arg), self.grow(h + 1, pos)
            if val in CONSTANTS or val == "bracket" or _VAR_RE.match(val):
                return Var(val), 1
            raise UnknownIdentifierError(f"unknown identifier {val!r}", pos, self.text)
        what = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {what}", pos, self.text)


# ---------------------------------------------------------------------------
# printing

def _num_text(v):
    if v < 0:
        return "-" + _num_text(-v)
    if v == int(v) and v < 1e15:
        return str(int(v))
    return repr(v)


_PREC = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}


def _prec(node):
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg) or (isinstance(node, Num) and node.value < 0):
        return _PREFIX_NEG
    return 100


def to_text(node):
    """Canonical text with the minimum parentheses that reparse to ``node``."""
    if isinstance(node, Num):
        return _num_text(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, Neg):
        inner = to_text(node.operand)
        # '-a^b' reparses as -(a^b); anything looser needs parentheses
        if _prec(node.operand) < _PREFIX_NEG:
            inner = f"({inner})"
        return f"-{inner}"
    p = _PREC[node.op]
    left, right = to_text(node.left), to_text(node.right)
    if node.op == "^":
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < p and not isinstance(node.right, Neg):
            right = f"({right})"
        elif isinstance(node.right, Neg):
            right = f"({right})"
    else:
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
    sep = " " if p == 10 else ""
    return f"{left}{sep}{node.op}{sep}{right}"


def sexpr(node):
    """Prefix form, e.g. ``(+ (^ xi1 2) (cos x1))``."""
    if isinstance(node, Num):
        return _num_text(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"({node.func} {sexpr(node.arg)})"
    if isinstance(node, Neg):
        return f"(- {sexpr(node.operand)})"
    return f"({node.op} {sexpr(node.left)} {sexpr(node.right)})"


def variables(node):
    """Names of the variables appearing in ``node`` (constants excluded)."""
    out = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Var):
            if n.name not in CONSTANTS:
                out.add(n.name)
        elif isinstance(n, Neg):
            stack.append(n.operand)
        elif isinstance(n, BinOp):
            stack.extend((n.left, n.right))
        elif isinstance(n, Call):
            stack.append(n.arg)
    return out


# ---------------------------------------------------------------------------
# evaluation

def _domain_fail(node, what):
    raise SymbolDomainError(what, to_text(node))


def _apply_binop(op, a, b, node, arrays):
    with np.errstate(all="ignore"):
        if op == "+":
            r = a + b
        elif op == "-":
            r = a - b
        elif op == "*":
            r = a * b
        elif op == "/":
            if np.any(np.asarray(b) == 0):
                _domain_fail(node, "division by zero")
            r = a / b
        else:
            if np.any((np.asarray(a) < 0) & (np.asarray(b) != np.round(b))):
                _domain_fail(node, "negative base with non-integer exponent")
            if np.any((np.asarray(a) == 0) & (np.asarray(b) < 0)):
                _domain_fail(node, "zero raised to a negative power")
            if arrays:
                r = np.power(np.asarray(a, dtype=float), b)
            else:
                try:
                    r = math.pow(a, b)
                except OverflowError:
                    r = math.inf
    return r


def _apply_call(func, a, node, arrays):
    if func == "log" and np.any(np.asarray(a) <= 0):
        _domain_fail(node, "log of a non-positive value")
    if func == "sqrt" and np.any(np.asarray(a) < 0):
        _domain_fail(node, "sqrt of a negative value")
    scalar_f, array_f = FUNCTIONS[func]
    with np.errstate(all="ignore"):
        if arrays:
            return array_f(a)
        try:
            return scalar_f(a)
        except OverflowError:
            return math.inf


def _eval(node, env, arrays):
    # explicit stack keeps deep trees off the Python call stack
    stack = [(node, False)]
    values = []
    while stack:
        n, ready = stack.pop()
        if isinstance(n, Num):
            values.append(n.value)
            continue
        if isinstance(n, Var):
            if n.name in CONSTANTS:
                values.append(CONSTANTS[n.name])
                continue
            try:
                values.append(env[n.name])
            except KeyError:
                raise UnknownIdentifierError(f"variable {n.name!r} is not bound", 0) from None
            continue
        if not ready:
            stack.append((n, True))
            if isinstance(n, BinOp):
                stack.append((n.right, False))
                stack.append((n.left, False))
            elif isinstance(n, Neg):
                stack.append((n.operand, False))
            else:
                stack.append((n.arg, False))
            continue
        if isinstance(n, BinOp):
            b = values.pop()
            a = values.pop()
            r = _apply_binop(n.op, a, b, n, arrays)
        elif isinstance(n, Neg):
            r = -values.pop()
        else:
            r = _apply_call(n.func, values.pop(), n, arrays)
        if not np.all(np.isfinite(r)):
            _domain_fail(n, "non-finite result")
        values.append(r)
    return values[0]


@dataclasses.dataclass(frozen=True)
class SymbolExpr:
    """Parsed expression with its source text."""

    ast: object
    source: str

    @property
    def text(self):
        return to_text(self.ast)

    def variables(self):
        return variables(self.ast)

    def validate(self, d, l):
        """Raise UnknownIdentifierError unless all variables fit dimensions ``d`` and ``l``."""
        for name in sorted(self.variables()):
            if name == "bracket":
                continue
            if name.startswith("xi"):
                k, limit = int(name[2:]), l
            else:
                k, limit = int(name[1:]), d
            if k > limit:
                pos = self.source.find(name)
                raise UnknownIdentifierError(
                    f"variable {name!r} exceeds dimension {limit}", max(pos, 0), self.source)
        return self

    def depends_on_x(self):
        return any(n.startswith("x") and not n.startswith("xi") for n in self.variables())

    def depends_on_xi(self):
        return any(n.startswith("xi") or n == "bracket" for n in self.variables())

    def __str__(self):
        return self.text


def parse(text):
    """Parse symbol text into a :class:`SymbolExpr`.

    Raises LexError, ParseError or UnknownIdentifierError, each carrying the
    character position of the problem.
    """
    if not isinstance(text, str):
        raise TypeError("symbol text must be str")
    return SymbolExpr(_Parser(text).parse(), text)


def _env(x, xi, bracket):
    env = {}
    for j, v in enumerate(np.atleast_1d(x)):
        env[f"x{j + 1}"] = float(v)
    for j, v in enumerate(np.atleast_1d(xi)):
        env[f"xi{j + 1}"] = float(v)
    if bracket is not None:
        env["bracket"] = float(bracket)
    return env


def evaluate(expr, x, xi, system=None, bracket=None):
    """Real value of ``expr`` at the point ``x`` and index ``xi``.

    ``bracket`` is taken from ``system`` when not given explicitly.
    """
    if system is not None:
        expr.validate(system.dimension, system.index_dim)
        if bracket is None and "bracket" in expr.variables():
            bracket = system.eigen(tuple(np.atleast_1d(xi).astype(int))).bracket
    return float(_eval(expr.ast, _env(x, xi, bracket), arrays=False))


def evaluate_array(expr, env):
    """Vectorized evaluation; ``env`` maps names to broadcastable arrays.

    ``expr`` may be a SymbolExpr or a bare AST node.
    """
    node = expr.ast if isinstance(expr, SymbolExpr) else expr
    return np.asarray(_eval(node, env, arrays=True), dtype=float)
