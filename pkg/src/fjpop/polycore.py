"""Sparse multivariate polynomial arithmetic over exact rationals.

Coefficients are `fractions.Fraction` throughout; floats appear only where a
caller explicitly asks for them (grid norms, SDP assembly).  Monomials are
ordered graded-lexicographically: total degree first, then lexicographic on
the exponent tuple, so for variables (x1, x2) the order-1 basis reads
[1, x2, x1].
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

Rational = Union[Fraction, int]

# degree of the zero polynomial; compares below every true degree
NEG_INF = float("-inf")


@total_ordering
class Monomial:
    """Exponent vector over a fixed ambient variable count."""

    __slots__ = ("exponents",)

    def __init__(self, exponents: Iterable[int]):
        exps = tuple(int(e) for e in exponents)
        if any(e < 0 for e in exps):
            raise ValueError(f"negative exponent in {exps}")
        self.exponents = exps

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    def _check_ambient(self, other: "Monomial") -> None:
        if len(self.exponents) != len(other.exponents):
            raise ValueError(
                "monomials over different ambient lengths are incomparable: "
                f"{len(self.exponents)} vs {len(other.exponents)}"
            )

    def __mul__(self, other: "Monomial") -> "Monomial":
        self._check_ambient(other)
        return Monomial(a + b for a, b in zip(self.exponents, other.exponents))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Monomial):
            return NotImplemented
        return self.exponents == other.exponents

    def __lt__(self, other: "Monomial") -> bool:
        self._check_ambient(other)
        return (self.degree, self.exponents) < (other.degree, other.exponents)

    def __hash__(self) -> int:
        return hash(self.exponents)

    def __repr__(self) -> str:
        return f"Monomial{self.exponents}"


class Polynomial:
    """Sparse polynomial: map Monomial -> nonzero Fraction over named variables."""

    __slots__ = ("var_names", "terms")

    def __init__(
        self,
        var_names: Sequence[str],
        terms: Mapping[Union[Monomial, tuple], Rational] = (),
    ):
        names = tuple(var_names)
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names: {names}")
        clean: dict[Monomial, Fraction] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for mono, coeff in items:
            if not isinstance(mono, Monomial):
                mono = Monomial(mono)
            if len(mono.exponents) != len(names):
                raise ValueError(
                    f"monomial arity {len(mono.exponents)} != {len(names)} variables"
                )
            c = Fraction(coeff)
            if c:
                clean[mono] = clean.get(mono, Fraction(0)) + c
                if not clean[mono]:
                    del clean[mono]
        self.var_names = names
        self.terms = clean

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, var_names: Sequence[str]) -> "Polynomial":
        return cls(var_names)

    @classmethod
    def constant(cls, var_names: Sequence[str], c: Rational) -> "Polynomial":
        n = len(tuple(var_names))
        return cls(var_names, {(0,) * n: c})

    @classmethod
    def variable(cls, var_names: Sequence[str], i: int) -> "Polynomial":
        names = tuple(var_names)
        exps = [0] * len(names)
        exps[i] = 1
        return cls(names, {tuple(exps): 1})

    # -- structure ---------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.var_names)

    @property
    def degree(self):
        if not self.terms:
            return NEG_INF
        return max(m.degree for m in self.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.var_names == other.var_names and self.terms == other.terms

    def __hash__(self) -> int:
        return hash((self.var_names, frozenset(self.terms.items())))

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return sorted(self.terms.items(), key=lambda t: (t[0].degree, t[0].exponents))

    # -- arithmetic --------------------------------------------------------

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.var_names != self.var_names:
                raise ValueError(
                    f"variable mismatch: {self.var_names} vs {other.var_names}"
                )
            return other
        return Polynomial.constant(self.var_names, other)

    def __add__(self, other) -> "Polynomial":
        other = self._coerce(other)
        out = dict(self.terms)
        for mono, coeff in other.terms.items():
            out[mono] = out.get(mono, Fraction(0)) + coeff
        return Polynomial(self.var_names, out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.var_names, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other) -> "Polynomial":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Polynomial":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            c = Fraction(other)
            return Polynomial(
                self.var_names, {m: c * v for m, v in self.terms.items()}
            )
        other = self._coerce(other)
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = m1 * m2
                out[m] = out.get(m, Fraction(0)) + c1 * c2
        return Polynomial(self.var_names, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0:
            raise ValueError("negative power")
        result = Polynomial.constant(self.var_names, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    # -- evaluation --------------------------------------------------------

    def evaluate(self, point: Sequence[Rational]) -> Fraction:
        """Exact value at a rational point."""
        if len(point) != self.n:
            raise ValueError(f"point length {len(point)} != {self.n} variables")
        pt = [Fraction(v) for v in point]
        total = Fraction(0)
        for mono, coeff in self.terms.items():
            val = coeff
            for x, e in zip(pt, mono.exponents):
                if e:
                    val *= x**e
            total += val
        return total

    def evaluate_float(self, point: Sequence[float]) -> float:
        if len(point) != self.n:
            raise ValueError(f"point length {len(point)} != {self.n} variables")
        total = 0.0
        for mono, coeff in self.terms.items():
            val = float(coeff)
            for x, e in zip(point, mono.exponents):
                if e:
                    val *= float(x) ** e
            total += val
        return total

    def lift(self, new_vars: Sequence[str]) -> "Polynomial":
        """Reinterpret over a larger variable list containing the current one."""
        names = tuple(new_vars)
        try:
            pos = [names.index(v) for v in self.var_names]
        except ValueError:
            raise ValueError(f"{self.var_names} not contained in {names}") from None
        out = {}
        for mono, coeff in self.terms.items():
            exps = [0] * len(names)
            for p, e in zip(pos, mono.exponents):
                exps[p] = e
            out[tuple(exps)] = coeff
        return Polynomial(names, out)

    def __repr__(self) -> str:
        return f"Polynomial({to_text(self)!r})"


# -- calculus ---------------------------------------------------------------


def differentiate(p: Polynomial, i: int) -> Polynomial:
    """Exact partial derivative with respect to variable i."""
    if not 0 <= i < p.n:
        raise IndexError(f"variable index {i} out of range for {p.n} variables")
    out: dict[tuple, Fraction] = {}
    for mono, coeff in p.terms.items():
        e = mono.exponents[i]
        if e == 0:
            continue
        exps = list(mono.exponents)
        exps[i] = e - 1
        key = tuple(exps)
        out[key] = out.get(key, Fraction(0)) + coeff * e
    return Polynomial(p.var_names, out)


def gradient(p: Polynomial) -> tuple[Polynomial, ...]:
    return tuple(differentiate(p, i) for i in range(p.n))


# -- bases ------------------------------------------------------------------


@dataclass(frozen=True)
class MonomialBasis:
    """All monomials of degree <= k in n variables, graded-lex sorted."""

    n: int
    k: int
    elements: tuple[Monomial, ...]
    _index: dict = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        self._index.update({m: i for i, m in enumerate(self.elements)})

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[Monomial]:
        return iter(self.elements)

    def __getitem__(self, i: int) -> Monomial:
        return self.elements[i]

    def index_of(self, m: Monomial) -> int:
        return self._index[m]


def _exponents_upto(n: int, k: int) -> Iterator[tuple[int, ...]]:
    if n == 1:
        for e in range(k + 1):
            yield (e,)
        return
    for e in range(k + 1):
        for rest in _exponents_upto(n - 1, k - e):
            yield (e,) + rest


def monomial_basis(n: int, k: int) -> MonomialBasis:
    if n < 1:
        raise ValueError("need at least one variable")
    if k < 0:
        raise ValueError("negative order")
    monos = sorted(
        (Monomial(e) for e in _exponents_upto(n, k)),
        key=lambda m: (m.degree, m.exponents),
    )
    return MonomialBasis(n, k, tuple(monos))


# -- norms ------------------------------------------------------------------


def max_norm_estimate(p: Polynomial, grid_points_per_axis: int) -> float:
    """Max |p| over a uniform grid on [-1,1]^n; a lower bound on the max norm."""
    if grid_points_per_axis < 2:
        raise ValueError("need at least 2 grid points per axis")
    if not p.terms:
        return 0.0
    axis = np.linspace(-1.0, 1.0, grid_points_per_axis)
    total = np.zeros((grid_points_per_axis,) * p.n)
    for mono, coeff in p.terms.items():
        term = np.full(total.shape, float(coeff))
        for i, e in enumerate(mono.exponents):
            if e:
                shape = [1] * p.n
                shape[i] = -1
                term = term * axis.reshape(shape) ** e
        total += term
    return float(np.max(np.abs(total)))


# -- homogenize-scale transform ---------------------------------------------


Pair = tuple[Fraction, Fraction]  # value a + b*sqrt(2)


def pair_add(u: Pair, v: Pair) -> Pair:
    return (u[0] + v[0], u[1] + v[1])


def pair_mul(u: Pair, v: Pair) -> Pair:
    # (a + b r)(c + d r) with r^2 = 2
    return (u[0] * v[0] + 2 * u[1] * v[1], u[0] * v[1] + u[1] * v[0])


def pair_pow(u: Pair, k: int) -> Pair:
    out: Pair = (Fraction(1), Fraction(0))
    for _ in range(k):
        out = pair_mul(out, u)
    return out


@dataclass(frozen=True)
class Root2Polynomial:
    """Element rat + root2*sqrt(2) of Q[sqrt(2)][x0, x], plus the half-degree xi."""

    rat: Polynomial
    root2: Polynomial
    xi: int

    def evaluate_pair(self, point: Sequence[Pair]) -> Pair:
        total: Pair = (Fraction(0), Fraction(0))
        for part, unit in ((self.rat, (Fraction(1), Fraction(0))),
                           (self.root2, (Fraction(0), Fraction(1)))):
            for mono, coeff in part.terms.items():
                val: Pair = (coeff, Fraction(0))
                for u, e in zip(point, mono.exponents):
                    if e:
                        val = pair_mul(val, pair_pow(u, e))
                total = pair_add(total, pair_mul(val, unit))
        return total

    def recover(self, point: Sequence[Rational]) -> Fraction:
        """Evaluate the source polynomial: p(u) = 2^xi * ptilde(1/sqrt(2), u)."""
        # 1/sqrt(2) = 0 + (1/2) sqrt(2)
        x0: Pair = (Fraction(0), Fraction(1, 2))
        pt = [x0] + [(Fraction(v), Fraction(0)) for v in point]
        a, b = self.evaluate_pair(pt)
        a, b = a * 2**self.xi, b * 2**self.xi
        if b:
            raise ArithmeticError(f"sqrt(2) part {b} did not cancel")
        return a


def homogenize_scale(p: Polynomial) -> Root2Polynomial:
    """Homogenize to degree 2*xi with the 1/sqrt(2) variable scaling.

    Each term x^alpha of p becomes x0^(2 xi - |alpha|) x^alpha with coefficient
    p_alpha / 2^ceil(|alpha|/2), carrying one factor sqrt(2) when |alpha| is odd.
    """
    if not p.terms:
        raise ValueError("cannot homogenize the zero polynomial")
    xi = -(-p.degree // 2)
    names = ("x0",) + tuple(p.var_names)
    rat: dict[tuple, Fraction] = {}
    rt2: dict[tuple, Fraction] = {}
    for mono, coeff in p.terms.items():
        d = mono.degree
        exps = (2 * xi - d,) + mono.exponents
        scaled = coeff / Fraction(2 ** ((d + 1) // 2))
        (rt2 if d % 2 else rat)[exps] = scaled
    return Root2Polynomial(Polynomial(names, rat), Polynomial(names, rt2), xi)


# -- text form ---------------------------------------------------------------

_NUM_RE = re.compile(r"^[+-]?\d+(/\d+)?$")
_VAR_RE = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*?)(?:\^(\d+))?$")


def to_text(p: Polynomial) -> str:
    """Render as `coeff * x1^a1 * ...` terms; leading term first."""
    if not p.terms:
        return "0"
    pieces = []
    for mono, coeff in reversed(p.sorted_terms()):
        factors = [
            name if e == 1 else f"{name}^{e}"
            for name, e in zip(p.var_names, mono.exponents)
            if e
        ]
        mag = abs(coeff)
        if not factors:
            body = str(mag)
        elif mag == 1:
            body = " * ".join(factors)
        else:
            body = " * ".join([str(mag)] + factors)
        pieces.append(("-" if coeff < 0 else "+", body))
    sign, body = pieces[0]
    out = ("-" if sign == "-" else "") + body
    for sign, body in pieces[1:]:
        out += f" {sign} {body}"
    return out


def parse_polynomial(text: str, var_names: Sequence[str]) -> Polynomial:
    """Parse `coeff * x1^a1 ...` terms joined by + or -; rationals as p/q."""
    names = tuple(var_names)
    pos = {v: i for i, v in enumerate(names)}
    src = text.replace("**", "^").strip()
    if not src:
        raise ValueError("empty polynomial text")
    # split into signed terms at top level (no parentheses in the grammar)
    chunks: list[str] = []
    current = ""
    for ch in src:
        if ch in "+-" and current.strip():
            chunks.append(current)
            current = ch
        else:
            current += ch
    chunks.append(current)
    terms: dict[tuple, Fraction] = {}
    for chunk in chunks:
        body = chunk.strip()
        sign = 1
        while body and body[0] in "+-":
            if body[0] == "-":
                sign = -sign
            body = body[1:].strip()
        if not body:
            raise ValueError(f"dangling sign in {text!r}")
        coeff = Fraction(sign)
        exps = [0] * len(names)
        for factor in (f.strip() for f in body.split("*")):
            if not factor:
                raise ValueError(f"empty factor in term {chunk.strip()!r}")
            if _NUM_RE.match(factor):
                coeff *= Fraction(factor)
                continue
            m = _VAR_RE.match(factor)
            if not m or m.group(1) not in pos:
                raise ValueError(f"unknown factor {factor!r} in term {chunk.strip()!r}")
            exps[pos[m.group(1)]] += int(m.group(2) or 1)
        key = tuple(exps)
        terms[key] = terms.get(key, Fraction(0)) + coeff
    return Polynomial(names, terms)
