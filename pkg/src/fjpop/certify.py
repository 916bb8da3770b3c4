"""Lower-bound certificates: interpolation constructions and rigorous checks.

A certificate asserts the polynomial identity

    target - xi = sum_j generator_j * (b_j^T G_j b_j) + sum_t h_t * psi_t

with every Gram matrix G_j positive semidefinite.  Construction
(lagrange_basis, build_certificate_q) is exact over the rationals; float
certificates coming out of the SDP solver are verified with scaled
tolerances but through exact arithmetic on their binary values, so the
reported residual is a statement about the certificate as given, not about
a rounding of it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .polycore import Monomial, Polynomial, parse_polynomial, to_text
from .relax import SosProgram

Number = Union[Fraction, float]


# -- interpolation constructions ----------------------------------------------------


def lagrange_basis(f: Polynomial, values: Sequence) -> list[Polynomial]:
    """Interpolation basis through the level sets f = t_j.

    p_j = prod_{i != j} (f - t_i) / (t_j - t_i), so p_j(u) = delta_{ji}
    whenever f(u) = t_i, and deg p_j <= deg(f) * (r - 1).
    """
    vals = [Fraction(t) for t in values]
    if not vals:
        raise ValueError("needs at least one interpolation value")
    if len(set(vals)) != len(vals):
        raise ValueError("interpolation values must be pairwise distinct")
    out = []
    for j, tj in enumerate(vals):
        pj = Polynomial.constant(f.var_names, 1)
        for i, ti in enumerate(vals):
            if i != j:
                pj = pj * (f - ti) * (Fraction(1) / (tj - ti))
        out.append(pj)
    return out


def build_certificate_q(f: Polynomial, values: Sequence) -> Polynomial:
    """Weighted square combination q = sum t_i p_i^2 agreeing with f on its levels.

    Requires every t_i >= 0 so that q is a nonnegative combination of
    squares; f - q then vanishes at every point u with f(u) in {t_i}.
    """
    vals = [Fraction(t) for t in values]
    if any(t < 0 for t in vals):
        raise ValueError("interpolation values must be nonnegative")
    basis = lagrange_basis(f, vals)
    q = Polynomial.zero(f.var_names)
    for t, p in zip(vals, basis):
        if t:
            q = q + t * p * p
    return q


# -- certificate data ---------------------------------------------------------------


def _as_matrix(matrix) -> tuple[tuple[Number, ...], ...]:
    rows = []
    for row in matrix:
        rows.append(tuple(v if isinstance(v, Fraction) else float(v) for v in row))
    return tuple(rows)


@dataclass(frozen=True)
class GramTerm:
    """One summand generator * (basis^T G basis); G symmetric over the basis."""

    generator: Polynomial
    basis: tuple[Monomial, ...]
    matrix: tuple[tuple[Number, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "basis", tuple(self.basis))
        object.__setattr__(self, "matrix", _as_matrix(self.matrix))
        s = len(self.basis)
        if len(self.matrix) != s or any(len(row) != s for row in self.matrix):
            raise ValueError(
                f"Gram matrix shape does not match basis of length {s}"
            )
        for i in range(s):
            for j in range(i + 1, s):
                if Fraction(self.matrix[i][j]) != Fraction(self.matrix[j][i]):
                    raise ValueError("Gram matrix must be symmetric")


@dataclass(frozen=True)
class IdealTerm:
    h: Polynomial
    multiplier: Polynomial


@dataclass(frozen=True)
class Certificate:
    xi: Number
    gram: tuple[GramTerm, ...]
    ideal: tuple[IdealTerm, ...]
    target: Polynomial

    def __post_init__(self):
        object.__setattr__(self, "gram", tuple(self.gram))
        object.__setattr__(self, "ideal", tuple(self.ideal))


@dataclass(frozen=True)
class VerifyReport:
    passed: bool
    residual: float
    min_eigs: tuple[float, ...]
    tol: float


def _scoped(p: Polynomial, names: tuple[str, ...]) -> Polynomial:
    """Lift a narrower-scope polynomial into the target's variables."""
    return p if p.var_names == names else p.lift(names)


def _padded(mono: Monomial, n: int) -> Monomial:
    """Accept basis monomials over a prefix scope by padding trailing zeros."""
    exps = mono.exponents
    if len(exps) == n:
        return mono
    if len(exps) < n:
        return Monomial(exps + (0,) * (n - len(exps)))
    raise ValueError(
        f"basis monomial arity {len(exps)} exceeds the target's {n} variables"
    )


def _gram_polynomial(term: GramTerm, names: tuple[str, ...]) -> Polynomial:
    n = len(names)
    basis = [
        Polynomial(names, {_padded(m, n): 1}) for m in term.basis
    ]
    total = Polynomial.zero(names)
    s = len(basis)
    for i in range(s):
        for j in range(i, s):
            g = Fraction(term.matrix[i][j])
            if not g:
                continue
            w = g if i == j else 2 * g
            total = total + w * basis[i] * basis[j]
    return _scoped(term.generator, names) * total


def verify_certificate(cert: Certificate, tol: float = 1e-8) -> VerifyReport:
    """Recompute the full identity; pass iff eigs >= -tol and residual <= tol.

    The residual is the max-norm of the coefficient vector of
    target - xi - sum generator * quadratic - sum h * multiplier, computed
    exactly over the rationals (floats enter by their exact binary value).
    """
    names = cert.target.var_names
    residual_poly = cert.target - Fraction(cert.xi)
    min_eigs = []
    for term in cert.gram:
        residual_poly = residual_poly - _gram_polynomial(term, names)
        if term.basis:
            mat = np.array([[float(v) for v in row] for row in term.matrix])
            min_eigs.append(float(np.linalg.eigvalsh(mat).min()))
        else:
            min_eigs.append(0.0)
    for term in cert.ideal:
        residual_poly = residual_poly - _scoped(term.h, names) * _scoped(
            term.multiplier, names
        )
    residual = max(
        (abs(float(cv)) for cv in residual_poly.terms.values()), default=0.0
    )
    passed = residual <= tol and all(e >= -tol for e in min_eigs)
    return VerifyReport(passed, residual, tuple(min_eigs), tol)


def verify_vanishing(p: Polynomial, points: Sequence[Sequence], tol: float = 1e-8) -> bool:
    """True iff |p(u)| <= tol * (1 + ||u||^deg p) at every supplied point."""
    deg = p.degree if p.terms else 0
    for u in points:
        val = abs(float(p.evaluate([Fraction(v) for v in u])))
        norm = float(np.linalg.norm([float(v) for v in u]))
        if val > tol * (1.0 + norm**deg):
            return False
    return True


# -- bridge from solver output ------------------------------------------------------


def certificate_from_solution(prog: SosProgram, solution) -> Certificate:
    """Assemble a Certificate from a solved SOS program.

    The solution's PSD blocks become the Gram matrices and its recovered
    free-variable vector supplies xi and the ideal multipliers, in the
    program's own ordering.
    """
    one = Polynomial.constant(prog.var_names, 1)
    if prog.xi_weight != one:
        raise ValueError("only unit-weight bounds map to a plain certificate")
    nfree = 1 + sum(len(im.basis) for im in prog.ideal_multipliers)
    vec = solution.dual_vector
    if len(solution.blocks) != len(prog.gram_blocks) or vec is None or len(vec) != nfree:
        raise ValueError("solution does not match the program")
    gram = []
    for gb, block in zip(prog.gram_blocks, solution.blocks):
        mat = np.asarray(block, dtype=float)
        mat = (mat + mat.T) / 2.0
        gram.append(GramTerm(gb.generator, gb.basis, mat.tolist()))
    ideal = []
    pos = 1
    for im in prog.ideal_multipliers:
        coeffs = vec[pos : pos + len(im.basis)]
        pos += len(im.basis)
        terms = {
            m: Fraction(float(cv)) for m, cv in zip(im.basis, coeffs) if float(cv)
        }
        ideal.append(IdealTerm(im.h, Polynomial(prog.var_names, terms)))
    return Certificate(
        xi=float(vec[0]), gram=tuple(gram), ideal=tuple(ideal), target=prog.target
    )


# -- JSON schema ---------------------------------------------------------------------


def _num_out(v: Number):
    return str(v) if isinstance(v, Fraction) else float(v)


def _num_in(v) -> Number:
    return Fraction(v) if isinstance(v, str) else float(v)


def _mono_text(m: Monomial, names: tuple[str, ...]) -> str:
    return to_text(Polynomial(names, {m: 1}))


def _mono_parse(text: str, names: tuple[str, ...]) -> Monomial:
    p = parse_polynomial(text, names)
    if len(p.terms) != 1 or next(iter(p.terms.values())) != 1:
        raise ValueError(f"not a monomial: {text!r}")
    return next(iter(p.terms))


def certificate_to_json(cert: Certificate) -> str:
    names = cert.target.var_names
    payload = {
        "vars": list(names),
        "xi": _num_out(cert.xi),
        "target": to_text(cert.target),
        "gram": [
            {
                "generator": to_text(_scoped(g.generator, names)),
                "basis": [_mono_text(_padded(m, len(names)), names) for m in g.basis],
                "matrix": [[_num_out(v) for v in row] for row in g.matrix],
            }
            for g in cert.gram
        ],
        "ideal": [
            {
                "h": to_text(_scoped(t.h, names)),
                "multiplier": to_text(_scoped(t.multiplier, names)),
            }
            for t in cert.ideal
        ],
    }
    return json.dumps(payload, indent=2)


def certificate_from_json(text: str) -> Certificate:
    payload = json.loads(text)
    names = tuple(payload["vars"])
    gram = tuple(
        GramTerm(
            generator=parse_polynomial(g["generator"], names),
            basis=tuple(_mono_parse(t, names) for t in g["basis"]),
            matrix=[[_num_in(v) for v in row] for row in g["matrix"]],
        )
        for g in payload["gram"]
    )
    ideal = tuple(
        IdealTerm(
            h=parse_polynomial(t["h"], names),
            multiplier=parse_polynomial(t["multiplier"], names),
        )
        for t in payload["ideal"]
    )
    return Certificate(
        xi=_num_in(payload["xi"]),
        gram=gram,
        ideal=ideal,
        target=parse_polynomial(payload["target"], names),
    )
