"""Minimal symbolic expression layer shared by every other module.

Expressions are trees of rational constants, chart variables, sums,
products, quotients, integer powers and the unary functions sin, cos,
tan, exp and log.  They are stored as sympy objects behind an immutable
``Expr`` facade that pins every variable to a declared ``Chart`` symbol.

The concrete text grammar (also emitted by :func:`to_text`)::

    expr     :=  term (("+" | "-") term)*
    term     :=  unary (("*" | "/") unary)*
    unary    :=  ("+" | "-")* power
    power    :=  atom ("^" ["-"] INTEGER)?
    atom     :=  NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"
    NUMBER   :=  digits ["." digits]          (decimals become exact rationals)
    NAME     :=  letter (letter | digit | "_")*

``sin cos tan exp log`` are reserved function names; every other NAME
must be declared in the chart.  ``u3_1`` is the standard spelling for
the first derivative of the third input channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

import sympy as sp

__all__ = [
    "Chart",
    "Scalar",
    "Expr",
    "ExprError",
    "ExprSyntaxError",
    "UndeclaredSymbolError",
    "ExprDomainError",
    "EvaluationError",
    "MissingAssignmentError",
    "DivisionByZeroError",
    "ModeMixError",
    "parse_expr",
    "simplify",
    "differentiate",
    "evaluate",
    "to_text",
]

_FUNCTIONS = {
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "exp": sp.exp,
    "log": sp.log,
}
_FLOAT_FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
}

STATE = "state"
INPUT_JET = "input-jet"


class ExprError(Exception):
    """Base class for expression-layer failures."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UndeclaredSymbolError(ExprError):
    def __init__(self, name: str, position: int = -1):
        where = f" (at position {position})" if position >= 0 else ""
        super().__init__(f"symbol '{name}' is not declared in the chart{where}")
        self.name = name
        self.position = position


class ExprDomainError(ExprError):
    """Raised when a tree contains an undefined value such as 1/0."""


class EvaluationError(ExprError):
    """Base class for evaluation failures."""


class MissingAssignmentError(EvaluationError):
    def __init__(self, name: str):
        super().__init__(f"no value assigned to '{name}'")
        self.name = name


class DivisionByZeroError(EvaluationError):
    """Division by zero at the evaluation point; the sample should be
    discarded and redrawn."""


class ModeMixError(EvaluationError):
    """Exact and floating scalars were combined."""


class Chart:
    """Ordered list of declared symbols with roles.

    The order is fixed and defines the component indexing of every
    vector field and one-form on the chart.
    """

    __slots__ = ("names", "roles", "_index", "_syms", "_symset")

    def __init__(self, names: Sequence[str], roles: Sequence[str] | None = None):
        names = tuple(names)
        if len(set(names)) != len(names):
            raise ValueError("chart symbols must be unique")
        if roles is None:
            roles = tuple(STATE for _ in names)
        else:
            roles = tuple(roles)
            if len(roles) != len(names):
                raise ValueError("one role per symbol required")
        self.names = names
        self.roles = roles
        self._index = {n: i for i, n in enumerate(names)}
        self._syms = tuple(sp.Symbol(n, real=True) for n in names)
        self._symset = frozenset(self._syms)

    @classmethod
    def states(cls, prefix: str, n: int) -> "Chart":
        return cls(tuple(f"{prefix}{i}" for i in range(1, n + 1)))

    @property
    def dimension(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UndeclaredSymbolError(name) from None

    def sym(self, name: str) -> sp.Symbol:
        return self._syms[self.index(name)]

    @property
    def syms(self) -> tuple:
        return self._syms

    def contains_syms(self, symbols: Iterable[sp.Symbol]) -> bool:
        return all(s in self._symset for s in symbols)

    def extended(self, names: Sequence[str], roles: Sequence[str] | None = None) -> "Chart":
        extra_roles = tuple(roles) if roles is not None else tuple(STATE for _ in names)
        return Chart(self.names + tuple(names), self.roles + extra_roles)

    def state_names(self) -> tuple:
        return tuple(n for n, r in zip(self.names, self.roles) if r == STATE)

    def __eq__(self, other):
        return isinstance(other, Chart) and self.names == other.names

    def __hash__(self):
        return hash(self.names)

    def __repr__(self):
        return f"Chart({', '.join(self.names)})"


@dataclass(frozen=True)
class Scalar:
    """Either an exact rational or a floating value.

    The evaluation mode is explicit; exact values never silently turn
    into floats and mixing modes in arithmetic raises ``ModeMixError``.
    """

    value: Union[Fraction, float]
    exact: bool

    @classmethod
    def exact_(cls, value) -> "Scalar":
        return cls(Fraction(value), True)

    @classmethod
    def approx(cls, value: float) -> "Scalar":
        return cls(float(value), False)

    def as_float(self) -> float:
        return float(self.value)

    def _combine(self, other, op):
        if not isinstance(other, Scalar):
            other = Scalar.exact_(other) if not isinstance(other, float) else Scalar.approx(other)
        if self.exact != other.exact:
            raise ModeMixError("cannot mix exact and floating scalars")
        return Scalar(op(self.value, other.value), self.exact)

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __mul__(self, other):
        return self._combine(other, lambda a, b: a * b)

    def __truediv__(self, other):
        def div(a, b):
            if b == 0:
                raise DivisionByZeroError("scalar division by zero")
            return a / b

        return self._combine(other, div)

    def __neg__(self):
        return Scalar(-self.value, self.exact)

    def __eq__(self, other):
        if isinstance(other, Scalar):
            return self.exact == other.exact and self.value == other.value
        return self.value == other


def _check_finite(sym: sp.Expr):
    if sym.has(sp.zoo, sp.oo, -sp.oo, sp.nan):
        raise ExprDomainError(f"expression is undefined: {sym}")


class Expr:
    """Immutable scalar expression over a chart.

    Arithmetic operators build unsimplified trees; use :func:`simplify`
    for the canonical form.  Integer powers only.
    """

    __slots__ = ("chart", "sym")

    def __init__(self, chart: Chart, sym, _validate: bool = True):
        sym = sp.sympify(sym) if not isinstance(sym, sp.Basic) else sym
        if _validate:
            _check_finite(sym)
            free = sym.free_symbols
            if free and not chart.contains_syms(free):
                bad = sorted(str(s) for s in free if s not in chart._symset)
                raise UndeclaredSymbolError(bad[0])
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "sym", sym)

    def __setattr__(self, *args):
        raise AttributeError("Expr is immutable")

    @classmethod
    def zero(cls, chart: Chart) -> "Expr":
        return cls(chart, sp.S.Zero, _validate=False)

    @classmethod
    def one(cls, chart: Chart) -> "Expr":
        return cls(chart, sp.S.One, _validate=False)

    @classmethod
    def rational(cls, chart: Chart, value) -> "Expr":
        f = Fraction(value)
        return cls(chart, sp.Rational(f.numerator, f.denominator), _validate=False)

    @classmethod
    def var(cls, chart: Chart, name: str) -> "Expr":
        return cls(chart, chart.sym(name), _validate=False)

    def on_chart(self, chart: Chart) -> "Expr":
        """Reinterpret on a chart that declares at least the same symbols."""
        return Expr(chart, self.sym)

    @property
    def free_names(self) -> frozenset:
        return frozenset(str(s) for s in self.sym.free_symbols)

    def is_zero_tree(self) -> bool:
        return self.sym is sp.S.Zero or self.sym == 0

    def _coerce(self, other):
        if isinstance(other, Expr):
            if other.chart != self.chart:
                raise ValueError("operands live on different charts")
            return other.sym
        if isinstance(other, (int, Fraction)):
            f = Fraction(other)
            return sp.Rational(f.numerator, f.denominator)
        raise TypeError(f"cannot combine Expr with {type(other).__name__}")

    def __add__(self, other):
        return Expr(self.chart, self.sym + self._coerce(other), _validate=False)

    __radd__ = __add__

    def __sub__(self, other):
        return Expr(self.chart, self.sym - self._coerce(other), _validate=False)

    def __rsub__(self, other):
        return Expr(self.chart, self._coerce(other) - self.sym, _validate=False)

    def __mul__(self, other):
        return Expr(self.chart, self.sym * self._coerce(other), _validate=False)

    __rmul__ = __mul__

    def __truediv__(self, other):
        den = self._coerce(other)
        if den == 0:
            raise ExprDomainError("division by the zero expression")
        return Expr(self.chart, self.sym / den, _validate=False)

    def __rtruediv__(self, other):
        if self.sym == 0:
            raise ExprDomainError("division by the zero expression")
        return Expr(self.chart, self._coerce(other) / self.sym, _validate=False)

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise TypeError("only integer powers are supported")
        if k < 0 and self.sym == 0:
            raise ExprDomainError("zero raised to a negative power")
        return Expr(self.chart, self.sym ** k, _validate=False)

    def __neg__(self):
        return Expr(self.chart, -self.sym, _validate=False)

    def __eq__(self, other):
        return (
            isinstance(other, Expr)
            and self.chart == other.chart
            and self.sym == other.sym
        )

    def __hash__(self):
        return hash((self.chart, self.sym))

    def __repr__(self):
        return f"Expr({to_text(self)})"


# ---------------------------------------------------------------------------
# parsing


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def peek(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        if self.pos >= len(self.text):
            return ("end", "", self.pos)
        ch = self.text[self.pos]
        if ch.isdigit() or (ch == "." and self._digit_at(self.pos + 1)):
            j = self.pos
            seen_dot = False
            while j < len(self.text) and (self.text[j].isdigit() or (self.text[j] == "." and not seen_dot)):
                seen_dot = seen_dot or self.text[j] == "."
                j += 1
            return ("number", self.text[self.pos:j], self.pos)
        if ch.isalpha() or ch == "_":
            j = self.pos
            while j < len(self.text) and (self.text[j].isalnum() or self.text[j] == "_"):
                j += 1
            return ("name", self.text[self.pos:j], self.pos)
        if ch in "+-*/^()":
            return ("op", ch, self.pos)
        raise ExprSyntaxError(f"unexpected character '{ch}'", self.pos)

    def _digit_at(self, i):
        return i < len(self.text) and self.text[i].isdigit()

    def next(self):
        kind, text, pos = self.peek()
        self.pos = pos + len(text) if kind != "end" else self.pos
        return (kind, text, pos)


class _Parser:
    def __init__(self, text: str, chart: Chart):
        self.toks = _Tokenizer(text)
        self.chart = chart

    def parse(self):
        sym = self._sum()
        kind, text, pos = self.toks.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected '{text}'", pos)
        return sym

    def _sum(self):
        acc = self._term()
        while True:
            kind, text, pos = self.toks.peek()
            if kind == "op" and text in "+-":
                self.toks.next()
                rhs = self._term()
                acc = acc + rhs if text == "+" else acc - rhs
            else:
                return acc

    def _term(self):
        acc = self._unary()
        while True:
            kind, text, pos = self.toks.peek()
            if kind == "op" and text in "*/":
                self.toks.next()
                rhs = self._unary()
                if text == "*":
                    acc = acc * rhs
                else:
                    if rhs == 0:
                        raise ExprDomainError(f"division by zero (at position {pos})")
                    acc = acc / rhs
            else:
                return acc

    def _unary(self):
        sign = 1
        while True:
            kind, text, pos = self.toks.peek()
            if kind == "op" and text in "+-":
                self.toks.next()
                if text == "-":
                    sign = -sign
            else:
                break
        return sign * self._power()

    def _power(self):
        base = self._atom()
        kind, text, pos = self.toks.peek()
        if kind == "op" and text == "^":
            self.toks.next()
            k = self._exponent()
            if k < 0 and base == 0:
                raise ExprDomainError(f"zero to a negative power (at position {pos})")
            return base ** k
        return base

    def _exponent(self):
        sign = 1
        kind, text, pos = self.toks.peek()
        if kind == "op" and text == "-":
            self.toks.next()
            sign = -1
        kind, text, pos = self.toks.next()
        if kind != "number" or "." in text:
            raise ExprSyntaxError("exponent must be an integer literal", pos)
        return sign * int(text)

    def _atom(self):
        kind, text, pos = self.toks.next()
        if kind == "number":
            if "." in text:
                f = Fraction(text)
                return sp.Rational(f.numerator, f.denominator)
            return sp.Integer(int(text))
        if kind == "name":
            if text in _FUNCTIONS:
                kind2, text2, pos2 = self.toks.next()
                if kind2 != "op" or text2 != "(":
                    raise ExprSyntaxError(f"'{text}' requires parentheses", pos2)
                arg = self._sum()
                self._expect(")")
                return _FUNCTIONS[text](arg)
            try:
                return self.chart.sym(text)
            except UndeclaredSymbolError:
                raise UndeclaredSymbolError(text, pos) from None
        if kind == "op" and text == "(":
            inner = self._sum()
            self._expect(")")
            return inner
        raise ExprSyntaxError(f"unexpected '{text or 'end of input'}'", pos)

    def _expect(self, op):
        kind, text, pos = self.toks.next()
        if kind != "op" or text != op:
            raise ExprSyntaxError(f"expected '{op}'", pos)


def parse_expr(text: str, chart: Chart) -> Expr:
    """Parse ``text`` against the documented grammar.

    Raises ``ExprSyntaxError`` with a position on malformed input and
    ``UndeclaredSymbolError`` for names outside the chart.
    """
    sym = _Parser(text, chart).parse()
    return Expr(chart, sym)


# ---------------------------------------------------------------------------
# simplification


def _has_quotient(sym) -> bool:
    for node in sp.preorder_traversal(sym):
        if node.is_Pow and node.exp.is_Integer and node.exp < 0:
            return True
    return False


def simplify(e: Expr) -> Expr:
    """Deterministic canonical form.

    Polynomial parts are expanded and like terms collected; quotients
    are put over a common denominator and reduced by gcd.  Function
    applications are treated as opaque generators, so identities such
    as sin^2 + cos^2 = 1 are deliberately not applied here (the sampled
    zero test in the geometry module covers those).  Idempotent.
    """
    sym = e.sym
    if _has_quotient(sym):
        out = sp.cancel(sym)
    else:
        out = sp.expand(sym)
    _check_finite(out)
    return Expr(e.chart, out, _validate=False)


def differentiate(e: Expr, v: str) -> Expr:
    """Exact partial derivative with respect to the declared symbol ``v``."""
    s = e.chart.sym(v)
    return simplify(Expr(e.chart, sp.diff(e.sym, s), _validate=False))


# ---------------------------------------------------------------------------
# evaluation


def _point_env(e: Expr, point: Mapping) -> tuple[dict, bool]:
    env = {}
    exact = True
    for name in e.free_names:
        if name not in point:
            raise MissingAssignmentError(name)
        v = point[name]
        if isinstance(v, Scalar):
            exact = exact and v.exact
            env[name] = v.value
        elif isinstance(v, float):
            exact = False
            env[name] = v
        else:
            env[name] = Fraction(v)
    return env, exact


def _eval_exact(sym, env):
    if sym.is_Symbol:
        return env[sym.name]
    if sym.is_Rational:
        return Fraction(sym.p, sym.q)
    if sym.is_Add:
        acc = Fraction(0)
        for a in sym.args:
            acc += _eval_exact(a, env)
        return acc
    if sym.is_Mul:
        acc = Fraction(1)
        for a in sym.args:
            acc *= _eval_exact(a, env)
            if acc == 0:
                # keep scanning: a later factor may divide by zero
                continue
        return acc
    if sym.is_Pow:
        k = sym.exp
        if not k.is_Integer:
            raise EvaluationError(f"non-integer exponent in {sym}")
        base = _eval_exact(sym.base, env)
        k = int(k)
        if k < 0 and base == 0:
            raise DivisionByZeroError(f"division by zero while evaluating {sym}")
        return base ** k
    raise EvaluationError(f"cannot evaluate {sym} exactly")


def _eval_float(sym, env):
    if sym.is_Symbol:
        return float(env[sym.name])
    if sym.is_Rational:
        return sym.p / sym.q
    if sym.is_Add:
        return math.fsum(_eval_float(a, env) for a in sym.args)
    if sym.is_Mul:
        acc = 1.0
        for a in sym.args:
            acc *= _eval_float(a, env)
        return acc
    if sym.is_Pow:
        k = sym.exp
        if not k.is_Integer:
            raise EvaluationError(f"non-integer exponent in {sym}")
        base = _eval_float(sym.base, env)
        k = int(k)
        if k < 0 and base == 0.0:
            raise DivisionByZeroError(f"division by zero while evaluating {sym}")
        return base ** k
    if sym.func in (sp.sin, sp.cos, sp.tan, sp.exp, sp.log):
        arg = _eval_float(sym.args[0], env)
        return _FLOAT_FUNCTIONS[sym.func.__name__](arg)
    raise EvaluationError(f"cannot evaluate {sym}")


def _has_function(sym) -> bool:
    return bool(sym.atoms(sp.Function))


def evaluate(e: Expr, point: Mapping) -> Scalar:
    """Evaluate at a point mapping symbol names to values.

    An all-rational point and a function-free expression give an exact
    rational; otherwise the result is floating.  Division by zero
    raises ``DivisionByZeroError`` rather than producing NaN.
    """
    env, exact_point = _point_env(e, point)
    if exact_point and not _has_function(e.sym):
        return Scalar(_eval_exact(e.sym, env), True)
    return Scalar(_eval_float(e.sym, env), False)


# ---------------------------------------------------------------------------
# printing

_PREC_SUM, _PREC_PROD, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4


def _print_sym(sym, prec: int) -> str:
    if sym.is_Symbol:
        return sym.name
    if sym.is_Integer:
        s = str(sym.p)
        return s if sym.p >= 0 or prec <= _PREC_SUM else f"({s})"
    if sym.is_Rational:
        s = f"{sym.p}/{sym.q}"
        return s if (sym.p >= 0 and prec <= _PREC_PROD) or prec <= _PREC_SUM else f"({s})"
    if sym.is_Add:
        parts = []
        for i, term in enumerate(sym.args):
            txt = _print_sym(term, _PREC_SUM + 1)
            if i == 0:
                parts.append(txt)
            elif txt.startswith("-"):
                parts.append(f" - {txt[1:]}")
            else:
                parts.append(f" + {txt}")
        out = "".join(parts)
        return f"({out})" if prec > _PREC_SUM else out
    if sym.is_Mul:
        num, den = [], []
        coeff = sp.S.One
        for f in sym.args:
            if f.is_Rational:
                coeff *= f
            elif f.is_Pow and f.exp.is_Integer and f.exp < 0:
                den.append(f.base if f.exp == -1 else sp.Pow(f.base, -f.exp))
            else:
                num.append(f)
        sign = ""
        if coeff.is_negative:
            sign = "-"
            coeff = -coeff
        num_parts = []
        if coeff.p != 1 or not num:
            num_parts.append(str(coeff.p) if coeff.q == 1 and not num else str(coeff.p))
        if coeff.q != 1:
            den.insert(0, sp.Integer(coeff.q))
        if coeff.p == 1 and num:
            num_parts = []
        num_parts += [_print_sym(f, _PREC_PROD + 1) for f in num]
        out = "*".join(num_parts) if num_parts else "1"
        if den:
            den_txt = (
                _print_sym(den[0], _PREC_POW)
                if len(den) == 1
                else "(" + "*".join(_print_sym(f, _PREC_PROD + 1) for f in den) + ")"
            )
            out = f"{out}/{den_txt}"
        out = sign + out
        need_paren = prec > _PREC_PROD or (sign and prec > _PREC_SUM)
        return f"({out})" if need_paren else out
    if sym.is_Pow:
        k = sym.exp
        if not k.is_Integer:
            raise ExprError(f"cannot print non-integer power {sym}")
        if k < 0:
            inner = _print_sym(sp.Pow(sym.base, -k) if k != -1 else sym.base, _PREC_POW)
            out = f"1/{inner}"
            return f"({out})" if prec > _PREC_PROD else out
        return f"{_print_sym(sym.base, _PREC_ATOM)}^{int(k)}"
    if sym.func in (sp.sin, sp.cos, sp.tan, sp.exp, sp.log):
        return f"{sym.func.__name__}({_print_sym(sym.args[0], 0)})"
    raise ExprError(f"cannot print {sym!r}")


def to_text(e: Expr) -> str:
    """Render an expression in the same grammar accepted by the parser."""
    return _print_sym(e.sym, 0)
