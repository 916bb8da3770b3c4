"""Assembly of moment and SOS relaxations, standard and denominator variants.

The moment side is a linear SDP over the pseudo-moment vector y indexed by
monomials of degree <= 2k; localizing blocks for equality constraints are
flattened into scalar equality rows (one per distinct matrix entry), which
keeps the SDPs small and the handling exact.  The SOS side is produced
independently, as Gram blocks plus free ideal multipliers tied together by
coefficient-matching equations, so the underlying identity can be checked as
an identity and not merely by duality.

All coefficients stay `Fraction` until a numeric realization is requested.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .fjkkt import PopProblem, Variant, build_system, products
from .polycore import Monomial, MonomialBasis, Polynomial, monomial_basis

# sparse linear functional of y: index into the y basis -> coefficient
LinForm = dict[int, Fraction]


def _half_up(p: Polynomial) -> int:
    """ceil(deg p / 2), treating constants and zero as degree 0."""
    d = p.degree
    if d == float("-inf") or d <= 0:
        return 0
    return -(-int(d) // 2)


def min_order(pop: PopProblem) -> int:
    """Smallest admissible relaxation order for a problem."""
    parts = [_half_up(pop.f)]
    parts += [_half_up(gj) for gj in pop.g]
    parts += [_half_up(ht) for ht in pop.h]
    return max(parts)


def _check_order(pop: PopProblem, k: int) -> int:
    k_min = min_order(pop)
    if k < k_min:
        raise ValueError(f"order k={k} too small; minimum admissible order is {k_min}")
    return k_min


# -- structural maps -----------------------------------------------------------


def moment_structure(n: int, k: int) -> dict[tuple[int, int], int]:
    """Index map of M_k(y): entry (i, j) over v_k reads y at position alpha_i+alpha_j."""
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    vk = monomial_basis(n, k)
    y_basis = monomial_basis(n, 2 * k)
    out = {}
    for i, a in enumerate(vk):
        for j, b in enumerate(vk):
            out[(i, j)] = y_basis.index_of(a * b)
    return out


def localizing_structure(
    p: Polynomial, n: int, k: int, y_basis: Optional[MonomialBasis] = None
) -> dict[tuple[int, int], LinForm]:
    """Entry map of M_k(p y): (i, j) -> sum_gamma p_gamma y_{alpha_i+alpha_j+gamma}."""
    if y_basis is None:
        y_basis = monomial_basis(n, 2 * k + max(int(p.degree) if p else 0, 0))
    vk = monomial_basis(n, k)
    out: dict[tuple[int, int], LinForm] = {}
    for i, a in enumerate(vk):
        for j, b in enumerate(vk):
            form: LinForm = {}
            for gamma, coeff in p.terms.items():
                idx = y_basis.index_of(a * b * gamma)
                form[idx] = form.get(idx, Fraction(0)) + coeff
            out[(i, j)] = {idx: c for idx, c in form.items() if c}
    return out


# -- problem augmentation ------------------------------------------------------


def augment_problem(
    pop: PopProblem,
    variant: Optional[Union[Variant, str]] = None,
    use_products: bool = False,
) -> PopProblem:
    """Attach an augmented optimality system as equality constraints.

    The inequality list becomes the product vector of g when use_products is
    set; with a variant, the problem is lifted to (x, multipliers) and h is
    set to the chosen system.  Variant None only applies the product step.
    """
    base_g = products(pop.g) if use_products else pop.g
    if variant is None:
        return PopProblem(
            f=pop.f, g=base_g, h=pop.h, theta=pop.theta, var_names=pop.var_names
        )
    variant = Variant(variant)
    if pop.h:
        raise ValueError("augmentation requires a problem without equalities")
    system = build_system(pop, variant)
    names = system.var_names
    theta = pop.theta.lift(names) if pop.theta is not None else None
    if theta is None and variant.uses_lambda0:
        theta = Polynomial.variable(names, pop.n)  # lam0
    return PopProblem(
        f=pop.f.lift(names),
        g=tuple(gj.lift(names) for gj in base_g),
        h=system.polynomials,
        theta=theta,
        var_names=names,
    )


# -- moment side ----------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    """One PSD block; entries stored on the upper triangle (i <= j)."""

    label: str
    size: int
    kind: str
    entries: dict[tuple[int, int], LinForm] = field(compare=False)


@dataclass(frozen=True)
class SdpProblem:
    var_names: tuple[str, ...]
    k: int
    y_basis: MonomialBasis
    blocks: tuple[Block, ...]
    zero_rows: tuple[LinForm, ...]  # each linear form constrained to 0
    objective: LinForm  # minimize L_y(.)
    normalization: LinForm  # constrained to 1
    meta: dict = field(compare=False, default_factory=dict)


def _psd_blocks(pop: PopProblem, k: int, y_basis: MonomialBasis) -> list[Block]:
    n = pop.n
    blocks = []
    vk = monomial_basis(n, k)
    entries: dict[tuple[int, int], LinForm] = {}
    for i, a in enumerate(vk):
        for j in range(i, len(vk)):
            entries[(i, j)] = {y_basis.index_of(a * vk[j]): Fraction(1)}
    blocks.append(Block(f"M_{k}", len(vk), "psd", entries))
    for jg, gj in enumerate(pop.g, start=1):
        kj = k - _half_up(gj)
        vj = monomial_basis(n, kj)
        entries = {}
        for i, a in enumerate(vj):
            for j in range(i, len(vj)):
                form: LinForm = {}
                for gamma, coeff in gj.terms.items():
                    idx = y_basis.index_of(a * vj[j] * gamma)
                    form[idx] = form.get(idx, Fraction(0)) + coeff
                entries[(i, j)] = {idx: c for idx, c in form.items() if c}
        blocks.append(Block(f"M_{kj}(g{jg} y)", len(vj), "psd", entries))
    return blocks


def _zero_rows(pop: PopProblem, k: int, y_basis: MonomialBasis) -> list[LinForm]:
    n = pop.n
    rows = []
    for ht in pop.h:
        rt = _half_up(ht)
        for delta in monomial_basis(n, 2 * (k - rt)):
            form: LinForm = {}
            for gamma, coeff in ht.terms.items():
                idx = y_basis.index_of(gamma * delta)
                form[idx] = form.get(idx, Fraction(0)) + coeff
            form = {idx: c for idx, c in form.items() if c}
            if form:
                rows.append(form)
    return rows


def _linform(p: Polynomial, y_basis: MonomialBasis) -> LinForm:
    return {y_basis.index_of(mono): coeff for mono, coeff in p.terms.items()}


def _moment_core(
    pop: PopProblem, k: int, objective: Polynomial, normalization: Polynomial, meta: dict
) -> SdpProblem:
    k_min = _check_order(pop, k)
    y_basis = monomial_basis(pop.n, 2 * k)
    blocks = _psd_blocks(pop, k, y_basis)
    meta = dict(meta)
    meta.update(
        {
            "k": k,
            "k_min": k_min,
            "y_size": len(y_basis),
            "block_sizes": [b.size for b in blocks],
        }
    )
    return SdpProblem(
        var_names=pop.var_names,
        k=k,
        y_basis=y_basis,
        blocks=tuple(blocks),
        zero_rows=tuple(_zero_rows(pop, k, y_basis)),
        objective=_linform(objective, y_basis),
        normalization=_linform(normalization, y_basis),
        meta=meta,
    )


def build_moment_sdp(pop: PopProblem, k: int) -> SdpProblem:
    """Moment relaxation of order k: M_k(y), M_{k-d_j}(g_j y) PSD, h rows zero, y_0 = 1."""
    one = Polynomial.constant(pop.var_names, 1)
    return _moment_core(pop, k, pop.f, one, {"side": "moment"})


# -- SOS side -------------------------------------------------------------------


@dataclass(frozen=True)
class GramBlock:
    generator: Polynomial
    basis: tuple[Monomial, ...]


@dataclass(frozen=True)
class IdealMultiplier:
    h: Polynomial
    basis: tuple[Monomial, ...]


@dataclass(frozen=True)
class SosEquation:
    """Coefficient match at one monomial: sum over variables of coeff*var == rhs."""

    monomial: Monomial
    lhs: dict  # keys ("xi",) | ("G", block, i, j) i<=j | ("u", t, l)
    rhs: Fraction


@dataclass(frozen=True)
class SosProgram:
    var_names: tuple[str, ...]
    k: int
    gram_blocks: tuple[GramBlock, ...]
    ideal_multipliers: tuple[IdealMultiplier, ...]
    equations: tuple[SosEquation, ...]
    target: Polynomial
    xi_weight: Polynomial  # the identity reads: target - xi*xi_weight = Gram/ideal part
    meta: dict = field(compare=False, default_factory=dict)


def _sos_core(
    pop: PopProblem, k: int, target: Polynomial, xi_weight: Polynomial, meta: dict
) -> SosProgram:
    k_min = _check_order(pop, k)
    n = pop.n
    names = pop.var_names
    y_basis = monomial_basis(n, 2 * k)
    grams = [GramBlock(Polynomial.constant(names, 1), monomial_basis(n, k).elements)]
    for gj in pop.g:
        grams.append(GramBlock(gj, monomial_basis(n, k - _half_up(gj)).elements))
    mults = [
        IdealMultiplier(ht, monomial_basis(n, 2 * (k - _half_up(ht))).elements)
        for ht in pop.h
    ]
    lhs_by_mu: dict[int, dict] = {idx: {} for idx in range(len(y_basis))}

    def add(mono: Monomial, key, coeff: Fraction):
        row = lhs_by_mu[y_basis.index_of(mono)]
        row[key] = row.get(key, Fraction(0)) + coeff
        if not row[key]:
            del row[key]

    for mono, coeff in xi_weight.terms.items():
        add(mono, ("xi",), coeff)
    for b, gram in enumerate(grams):
        basis = gram.basis
        for i, a in enumerate(basis):
            for j in range(i, len(basis)):
                pair = a * basis[j]
                mult = Fraction(1 if i == j else 2)
                for gamma, coeff in gram.generator.terms.items():
                    add(pair * gamma, ("G", b, i, j), mult * coeff)
    for t, im in enumerate(mults):
        for l, beta in enumerate(im.basis):
            for gamma, coeff in im.h.terms.items():
                add(gamma * beta, ("u", t, l), coeff)
    equations = tuple(
        SosEquation(y_basis[idx], lhs_by_mu[idx], target.terms.get(y_basis[idx], Fraction(0)))
        for idx in range(len(y_basis))
    )
    meta = dict(meta)
    meta.update(
        {
            "k": k,
            "k_min": k_min,
            "gram_sizes": [len(g.basis) for g in grams],
            "multiplier_sizes": [len(m.basis) for m in mults],
            "equation_count": len(equations),
        }
    )
    return SosProgram(
        var_names=names,
        k=k,
        gram_blocks=tuple(grams),
        ideal_multipliers=tuple(mults),
        equations=equations,
        target=target,
        xi_weight=xi_weight,
        meta=meta,
    )


def build_sos_sdp(pop: PopProblem, k: int) -> SosProgram:
    """SOS relaxation of order k: f - xi = v^T G_0 v + sum g_j v^T G_j v + sum h_t u_t."""
    one = Polynomial.constant(pop.var_names, 1)
    return _sos_core(pop, k, pop.f, one, {"side": "sos"})


# -- denominator variant ---------------------------------------------------------


def eta(k: int, f: Polynomial, theta: Optional[Polynomial]) -> int:
    """The even denominator power 2*floor((2k - deg f) / (2 deg theta))."""
    if theta is None or not theta:
        raise ValueError("denominator polynomial required")
    deg_t = int(theta.degree)
    if deg_t < 1:
        raise ValueError("denominator must be nonconstant")
    deg_f = max(int(f.degree), 0) if f else 0
    if 2 * k < deg_f:
        raise ValueError(f"2k = {2 * k} below deg f = {deg_f}")
    return 2 * ((2 * k - deg_f) // (2 * deg_t))


def build_denominator_sdp(pop: PopProblem, k: int) -> tuple[SdpProblem, SosProgram]:
    """Denominator relaxation: objective L_y(theta^eta f), normalization L_y(theta^eta) = 1."""
    e = eta(k, pop.f, pop.theta)
    theta_pow = pop.theta**e
    target = theta_pow * pop.f
    meta = {"side": "moment", "eta": e, "denominator": True}
    moment = _moment_core(pop, k, target, theta_pow, meta)
    sos = _sos_core(pop, k, target, theta_pow, {"side": "sos", "eta": e, "denominator": True})
    return moment, sos


# -- numeric realization ----------------------------------------------------------


def moment_vector(point: Sequence[float], y_basis: MonomialBasis) -> np.ndarray:
    """Point-mass pseudo-moments y_alpha = u^alpha."""
    u = [float(v) for v in point]
    if len(u) != y_basis.n:
        raise ValueError(f"point length {len(u)} != {y_basis.n} variables")
    out = np.empty(len(y_basis))
    for idx, mono in enumerate(y_basis):
        val = 1.0
        for x, e in zip(u, mono.exponents):
            if e:
                val *= x**e
        out[idx] = val
    return out


def linform_value(form: LinForm, y: Sequence[float]) -> float:
    return float(sum(float(c) * y[idx] for idx, c in form.items()))


def block_matrix(block: Block, y: Sequence[float]) -> np.ndarray:
    """Realize one PSD block at a numeric y vector (symmetric fill)."""
    mat = np.zeros((block.size, block.size))
    for (i, j), form in block.entries.items():
        val = linform_value(form, y)
        mat[i, j] = val
        mat[j, i] = val
    return mat
