"""Sparse multivariate polynomials with exact rational coefficients.

Transition probabilities of a parametric model are polynomials over the
declared parameters.  Terms are stored canonically (no zero coefficients,
no zero exponents) so that structural equality is polynomial equality.

Expression syntax::

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := base ('^' nonneg-int)?
    base   := number | identifier | '(' expr ')' | '-' factor
    number := integer ('/' positive-integer)? | decimal

Unary minus binds tighter than ``*``: ``-v*2`` is ``(-v)*2``.  Decimal
literals are converted exactly, so ``0.1`` is the rational 1/10.
"""
from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Polynomial",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "MissingParameterError",
    "parse_expr",
    "to_text",
]


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int, text: str = ""):
        super().__init__(f"{message} at offset {offset}" + (f" in {text!r}" if text else ""))
        self.offset = offset


class UnknownIdentifierError(ValueError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown parameter {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class MissingParameterError(KeyError):
    pass


# A monomial is a tuple of (name, exponent) pairs in parameter order, exponents > 0.
Monomial = tuple


class Polynomial:
    """Immutable polynomial over an ordered tuple of parameter names."""

    __slots__ = ("_terms", "_params", "_hash")

    def __init__(self, terms: Mapping[Monomial, Fraction] | None = None,
                 params: Iterable[str] = ()):
        self._params = tuple(params)
        order = {p: i for i, p in enumerate(self._params)}
        canon: dict[Monomial, Fraction] = {}
        for mono, coef in (terms or {}).items():
            coef = Fraction(coef)
            if coef == 0:
                continue
            key = _canon_monomial(mono, order)
            total = canon.get(key, Fraction(0)) + coef
            if total == 0:
                canon.pop(key, None)
            else:
                canon[key] = total
        self._terms = canon
        self._hash = None

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, value, params: Iterable[str] = ()) -> "Polynomial":
        return cls({(): Fraction(value)}, params)

    @classmethod
    def variable(cls, name: str, params: Iterable[str] = ()) -> "Polynomial":
        params = tuple(params) or (name,)
        if name not in params:
            raise UnknownIdentifierError(name, 0)
        return cls({((name, 1),): Fraction(1)}, params)

    # -- accessors ----------------------------------------------------------
    @property
    def params(self) -> tuple[str, ...]:
        return self._params

    @property
    def terms(self) -> dict[Monomial, Fraction]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(m == () for m in self._terms)

    def constant_value(self) -> Fraction:
        return self._terms.get((), Fraction(0))

    def variables(self) -> set[str]:
        return {name for mono in self._terms for name, _ in mono}

    def degree(self) -> int:
        return max((sum(e for _, e in m) for m in self._terms), default=0)

    # -- arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return other
        if isinstance(other, (int, Fraction)):
            return Polynomial.constant(other, self._params)
        return NotImplemented

    def _merged_params(self, other: "Polynomial") -> tuple[str, ...]:
        if other._params == self._params:
            return self._params
        extra = [p for p in other._params if p not in self._params]
        return self._params + tuple(extra)

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for m, c in other._terms.items():
            terms[m] = terms.get(m, Fraction(0)) + c
        return Polynomial(terms, self._merged_params(other))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({m: -c for m, c in self._terms.items()}, self._params)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: dict[Monomial, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                exps = dict(m1)
                for name, e in m2:
                    exps[name] = exps.get(name, 0) + e
                key = tuple(exps.items())
                terms[key] = terms.get(key, Fraction(0)) + c1 * c2
        return Polynomial(terms, self._merged_params(other))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = Polynomial.constant(1, self._params)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # -- comparison ---------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(other, self._params)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __repr__(self):
        return f"Polynomial({to_text(self)!r})"

    def __str__(self):
        return to_text(self)

    # -- evaluation ---------------------------------------------------------
    def eval(self, valuation: Mapping[str, float]):
        """Evaluate at ``valuation``; values may be floats or numpy arrays."""
        missing = [p for p in self.variables() if p not in valuation]
        if missing:
            raise MissingParameterError(f"no value for parameter(s) {sorted(missing)}")
        total = 0.0
        for mono, coef in self._terms.items():
            term = float(coef)
            for name, e in mono:
                term = term * valuation[name] ** e
            total = total + term
        if isinstance(total, float) or np.ndim(total) == 0:
            return float(total)
        return total

    __call__ = eval


def _canon_monomial(mono, order: Mapping[str, int]) -> Monomial:
    items = dict(mono) if not isinstance(mono, dict) else mono
    for name in items:
        if name not in order:
            raise UnknownIdentifierError(name, 0)
    return tuple(sorted(((n, e) for n, e in items.items() if e), key=lambda t: order[t[0]]))


# -- parsing ---------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<dec>\d+\.\d*|\.\d+)|(?P<int>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            offset = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[offset]!r}", offset, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, params: tuple[str, ...]):
        self.text = text
        self.params = params
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ExprSyntaxError(message, tok[2], self.text)

    def parse(self) -> Polynomial:
        p = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return p

    def expr(self):
        p = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self):
        p = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            p = p * self.factor()
        return p

    def factor(self):
        p = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            tok = self.take()
            if tok[0] != "int":
                raise self.error("exponent must be a non-negative integer", tok)
            p = p ** int(tok[1])
        return p

    def base(self):
        kind, value, offset = tok = self.take()
        if kind == "int":
            num = Fraction(int(value))
            if self.peek()[0] == "op" and self.peek()[1] == "/":
                self.take()
                den_tok = self.take()
                if den_tok[0] != "int":
                    raise self.error("denominator must be an integer literal", den_tok)
                if int(den_tok[1]) == 0:
                    raise ExprSyntaxError("zero denominator", den_tok[2], self.text)
                num = num / int(den_tok[1])
            return Polynomial.constant(num, self.params)
        if kind == "dec":
            return Polynomial.constant(Fraction(value), self.params)
        if kind == "ident":
            if value not in self.params:
                raise UnknownIdentifierError(value, offset)
            return Polynomial.variable(value, self.params)
        if kind == "op" and value == "(":
            p = self.expr()
            close = self.take()
            if close[1] != ")":
                raise self.error("expected ')'", close)
            return p
        if kind == "op" and value == "-":
            return -self.factor()
        if kind == "end":
            raise self.error("unexpected end of expression", tok)
        raise self.error(f"unexpected token {value!r}", tok)


def parse_expr(text: str, params: Iterable[str]) -> Polynomial:
    """Parse ``text`` into a canonical polynomial over ``params``."""
    return _Parser(text, tuple(params)).parse()


# -- printing --------------------------------------------------------------

def _term_order(params: tuple[str, ...]):
    index = {p: i for i, p in enumerate(params)}

    def key(mono: Monomial):
        exps = [0] * len(params)
        for name, e in mono:
            exps[index[name]] = e
        # higher total degree first, then lexicographically larger exponent vectors
        return (-sum(exps), [-e for e in exps])

    return key


def _coef_text(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def to_text(p: Polynomial) -> str:
    """Canonical text such that ``parse_expr(to_text(p), p.params) == p``."""
    if p.is_zero():
        return "0"
    parts = []
    for mono in sorted(p._terms, key=_term_order(p.params)):
        coef = p._terms[mono]
        factors = [n if e == 1 else f"{n}^{e}" for n, e in mono]
        mag = abs(coef)
        if not factors:
            body = _coef_text(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = "*".join([_coef_text(mag)] + factors)
        if not parts:
            parts.append(("-" if coef < 0 else "") + body)
        else:
            parts.append((" - " if coef < 0 else " + ") + body)
    return "".join(parts)
