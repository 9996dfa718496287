"""Exact multivariate polynomials over the rationals.

Variables are named ``x1..xn`` followed by ``y1..ym``; internally a monomial
is an exponent tuple of length ``n + m`` with the x-exponents first.
"""
from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

Monomial = tuple[int, ...]


class ExprError(ValueError):
    """Raised for malformed expressions or arity mismatches."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


def to_rational(value) -> Fraction:
    """Convert ints, Fractions, ``"p/q"`` strings and decimal strings exactly."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # floats carry binary rounding; only accepted when they are integral
        if value.is_integer():
            return Fraction(int(value))
        raise TypeError(f"refusing inexact float {value!r}; pass a string instead")
    if isinstance(value, str):
        text = value.strip()
        try:
            if "/" in text:
                p, q = text.split("/", 1)
                return Fraction(int(p), int(q))
            return Fraction(Decimal(text))
        except (ArithmeticError, ValueError) as exc:
            raise ExprError(f"not a rational number: {value!r}") from exc
    raise TypeError(f"cannot convert {type(value).__name__} to a rational")


def format_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _grlex_key(mono: Monomial):
    return (sum(mono), mono)


@dataclass(frozen=True, eq=False)
class PolyExpr:
    """Canonical expanded polynomial; ``terms`` never stores zero coefficients."""

    terms: Mapping[Monomial, Fraction]
    arity: tuple[int, int]

    def __post_init__(self):
        nv = self.arity[0] + self.arity[1]
        clean = {}
        for mono, c in self.terms.items():
            if len(mono) != nv or any(e < 0 for e in mono):
                raise ExprError(f"bad exponent vector {mono} for arity {self.arity}")
            c = to_rational(c)
            if c != 0:
                clean[tuple(mono)] = c
        object.__setattr__(self, "terms", clean)

    # construction -----------------------------------------------------
    @classmethod
    def zero(cls, arity) -> PolyExpr:
        return cls({}, tuple(arity))

    @classmethod
    def constant(cls, c, arity) -> PolyExpr:
        nv = arity[0] + arity[1]
        return cls({(0,) * nv: to_rational(c)}, tuple(arity))

    @classmethod
    def variable(cls, index: int, arity) -> PolyExpr:
        nv = arity[0] + arity[1]
        if not 0 <= index < nv:
            raise ExprError(f"variable index {index} out of range for arity {arity}")
        mono = tuple(1 if i == index else 0 for i in range(nv))
        return cls({mono: Fraction(1)}, tuple(arity))

    @classmethod
    def linear(cls, coeffs: Sequence, const, arity) -> PolyExpr:
        nv = arity[0] + arity[1]
        if len(coeffs) != nv:
            raise ExprError("coefficient vector length does not match arity")
        terms = {}
        for i, c in enumerate(coeffs):
            terms[tuple(1 if j == i else 0 for j in range(nv))] = to_rational(c)
        terms[(0,) * nv] = to_rational(const)
        return cls(terms, tuple(arity))

    # basic properties ---------------------------------------------------
    @property
    def nvars(self) -> int:
        return self.arity[0] + self.arity[1]

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(m) for m in self.terms), default=-1)

    def low_degree(self) -> int:
        return min((sum(m) for m in self.terms), default=-1)

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * self.nvars, Fraction(0))

    def homogeneous_part(self, deg: int) -> PolyExpr:
        return PolyExpr({m: c for m, c in self.terms.items() if sum(m) == deg}, self.arity)

    def initial_form(self) -> PolyExpr:
        """Lowest-degree homogeneous part."""
        return self.homogeneous_part(self.low_degree()) if self.terms else self

    def variables(self) -> set[int]:
        return {i for m in self.terms for i, e in enumerate(m) if e}

    def linear_part(self) -> list[Fraction]:
        nv = self.nvars
        out = [Fraction(0)] * nv
        for m, c in self.terms.items():
            if sum(m) == 1:
                out[m.index(1)] = c
        return out

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return sorted(self.terms.items(), key=lambda t: _grlex_key(t[0]), reverse=True)

    def __eq__(self, other):
        if not isinstance(other, PolyExpr):
            return NotImplemented
        return self.arity == other.arity and self.terms == other.terms

    def __hash__(self):
        return hash((self.arity, frozenset(self.terms.items())))

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> PolyExpr:
        if isinstance(other, PolyExpr):
            if other.arity != self.arity:
                raise ExprError(f"arity mismatch {self.arity} vs {other.arity}")
            return other
        return PolyExpr.constant(other, self.arity)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = terms.get(m, 0) + c
        return PolyExpr(terms, self.arity)

    __radd__ = __add__

    def __neg__(self):
        return PolyExpr({m: -c for m, c in self.terms.items()}, self.arity)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, PolyExpr):
            k = to_rational(other)
            return PolyExpr({m: c * k for m, c in self.terms.items()}, self.arity)
        other = self._coerce(other)
        terms: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                terms[m] = terms.get(m, 0) + c1 * c2
        return PolyExpr(terms, self.arity)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ExprError("exponent must be a nonnegative integer")
        result = PolyExpr.constant(1, self.arity)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # calculus and evaluation ---------------------------------------------
    def differentiate(self, var: int) -> PolyExpr:
        return differentiate(self, var)

    def evaluate(self, z: Sequence) -> Fraction:
        return evaluate(self, z)

    def substitute(self, mapping: Mapping[int, PolyExpr]) -> PolyExpr:
        """Replace variables by polynomials of the same arity."""
        result = PolyExpr.zero(self.arity)
        one = PolyExpr.constant(1, self.arity)
        for mono, c in self.terms.items():
            rest = [0] * self.nvars
            factor = one
            for i, e in enumerate(mono):
                if not e:
                    continue
                if i in mapping:
                    factor = factor * (mapping[i] ** e)
                else:
                    rest[i] = e
            result = result + factor * PolyExpr({tuple(rest): c}, self.arity)
        return result

    def shift(self, point: Sequence) -> PolyExpr:
        """Return ``p(point + u)`` as a polynomial in ``u``."""
        pt = [to_rational(v) for v in point]
        mapping = {
            i: PolyExpr.variable(i, self.arity) + pt[i] for i in range(self.nvars) if pt[i] != 0
        }
        return self.substitute(mapping) if mapping else self

    def embed(self, arity, position: Sequence[int]) -> PolyExpr:
        """Re-index into a larger variable space; variable ``i`` goes to ``position[i]``."""
        nv = arity[0] + arity[1]
        terms = {}
        for mono, c in self.terms.items():
            new = [0] * nv
            for i, e in enumerate(mono):
                new[position[i]] += e
            terms[tuple(new)] = c
        return PolyExpr(terms, tuple(arity))

    def to_float_function(self):
        """Vectorised float evaluator (numpy), for sampling oracles only."""
        import numpy as np

        monos = np.array(list(self.terms.keys()) or [[0] * self.nvars], dtype=float)
        coefs = np.array([float(c) for c in self.terms.values()] or [0.0])

        def f(z):
            z = np.asarray(z, dtype=float)
            return float(np.sum(coefs * np.prod(z[None, :] ** monos, axis=1)))

        return f

    def __str__(self):
        return format_poly(self)

    def __repr__(self):
        return f"PolyExpr({format_poly(self)!r}, arity={self.arity})"


def variable_name(index: int, arity) -> str:
    n = arity[0]
    return f"x{index + 1}" if index < n else f"y{index - n + 1}"


def format_poly(p: PolyExpr) -> str:
    """Canonical printed form: graded-lex descending, explicit ``*``, ``p/q`` rationals."""
    if p.is_zero():
        return "0"
    pieces = []
    for mono, c in p.sorted_terms():
        factors = []
        for i, e in enumerate(mono):
            if e == 1:
                factors.append(variable_name(i, p.arity))
            elif e > 1:
                factors.append(f"{variable_name(i, p.arity)}^{e}")
        mag = abs(c)
        if not factors:
            body = format_rational(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = format_rational(mag) + "*" + "*".join(factors)
        pieces.append(("-" if c < 0 else "+", body))
    sign, body = pieces[0]
    out = ("-" if sign == "-" else "") + body
    for sign, body in pieces[1:]:
        out += f" {sign} {body}"
    return out


# --------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text: str, arity):
        self.text = text
        self.arity = tuple(arity)
        self.pos = 0

    def error(self, msg):
        raise ExprError(msg, self.pos)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self) -> PolyExpr:
        if not self.text.strip():
            self.error("empty expression")
        p = self.expr()
        if self.peek():
            self.error(f"unexpected character {self.peek()!r}")
        return p

    def expr(self):
        sign = 1
        if self.peek() in "+-":
            sign = -1 if self.text[self.pos] == "-" else 1
            self.pos += 1
        p = self.term() * sign
        while self.peek() and self.peek() in "+-":
            op = self.text[self.pos]
            self.pos += 1
            t = self.term()
            p = p + t if op == "+" else p - t
        return p

    def term(self):
        p = self.unary()
        while self.peek() == "*":
            self.pos += 1
            p = p * self.unary()
        return p

    def unary(self):
        if self.peek() == "-":
            self.pos += 1
            return -self.unary()
        if self.peek() == "+":
            self.pos += 1
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == "^":
            self.pos += 1
            start = self.pos
            self.skip()
            if self.peek() == "(":
                # allow x^(2) but reject anything that is not a plain integer
                self.pos += 1
                k = self.exponent(start)
                if self.peek() != ")":
                    self.error("expected ')' after exponent")
                self.pos += 1
            else:
                k = self.exponent(start)
            return base ** k
        return base

    def exponent(self, start):
        self.skip()
        begin = self.pos
        if self.pos < len(self.text) and self.text[self.pos] in "-−":
            self.pos = start
            self.error("negative exponent")
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if begin == self.pos:
            self.error("exponent must be a nonnegative integer")
        digits = self.text[begin:self.pos]
        if self.pos < len(self.text) and self.text[self.pos] in "./":
            self.error("exponent must be a nonnegative integer")
        return int(digits)

    def atom(self):
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            p = self.expr()
            if self.peek() != ")":
                self.error("expected ')'")
            self.pos += 1
            return p
        if ch.isdigit() or ch == ".":
            return PolyExpr.constant(self.number(), self.arity)
        if ch in ("x", "y"):
            return self.var()
        if not ch:
            self.error("unexpected end of expression")
        self.error(f"unexpected character {ch!r}")

    def number(self) -> Fraction:
        begin = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isdigit() or self.text[self.pos] == "."):
            self.pos += 1
        lit = self.text[begin:self.pos]
        if lit.count(".") > 1 or lit == ".":
            self.pos = begin
            self.error(f"malformed number {lit!r}")
        value = Fraction(Decimal(lit))
        if self.pos < len(self.text) and self.text[self.pos] == "/":
            self.pos += 1
            dbeg = self.pos
            while self.pos < len(self.text) and self.text[self.pos].isdigit():
                self.pos += 1
            if dbeg == self.pos or "." in lit:
                self.error("rational literal must be p/q with integers")
            den = int(self.text[dbeg:self.pos])
            if den == 0:
                self.error("zero denominator")
            value = value / den
        return value

    def var(self):
        begin = self.pos
        kind = self.text[self.pos]
        self.pos += 1
        dbeg = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if dbeg == self.pos:
            self.pos = begin
            self.error("variable must carry an index, e.g. x1")
        k = int(self.text[dbeg:self.pos])
        n, m = self.arity
        limit = n if kind == "x" else m
        if not 1 <= k <= limit:
            self.pos = begin
            self.error(f"unknown variable {kind}{k} for arity {self.arity}")
        idx = k - 1 if kind == "x" else n + k - 1
        return PolyExpr.variable(idx, self.arity)


def parse_expr(text: str, arity) -> PolyExpr:
    """Parse ``text`` into its canonical expanded polynomial."""
    if len(arity) != 2 or min(arity) < 0:
        raise ExprError(f"bad arity {arity}")
    return _Parser(text, arity).parse()


def differentiate(p: PolyExpr, var: int) -> PolyExpr:
    if not 0 <= var < p.nvars:
        raise ExprError(f"variable index {var} out of range")
    terms = {}
    for mono, c in p.terms.items():
        e = mono[var]
        if e:
            new = list(mono)
            new[var] = e - 1
            terms[tuple(new)] = c * e
    return PolyExpr(terms, p.arity)


def evaluate(p: PolyExpr, z: Sequence) -> Fraction:
    if len(z) != p.nvars:
        raise ExprError(f"point has length {len(z)}, expected {p.nvars}")
    z = [to_rational(v) for v in z]
    total = Fraction(0)
    for mono, c in p.terms.items():
        t = c
        for v, e in zip(z, mono):
            if e:
                t *= v ** e
        total += t
    return total


def gradient(p: PolyExpr, z: Sequence, variables: Iterable[int] | None = None) -> list[Fraction]:
    variables = range(p.nvars) if variables is None else variables
    return [evaluate(differentiate(p, v), z) for v in variables]


def jacobian(ps: Sequence[PolyExpr], variables: Sequence[int] | range, z: Sequence, ncols: int | None = None):
    """Rows are gradients of ``ps`` restricted to ``variables``, evaluated at ``z``."""
    from .linalg import RationalMatrix

    variables = list(variables)
    if ps:
        arity = ps[0].arity
        if any(p.arity != arity for p in ps):
            raise ExprError("all polynomials in a Jacobian must share arity")
    rows = [gradient(p, z, variables) for p in ps]
    return RationalMatrix(rows, len(variables) if ncols is None else ncols)
