"""Augmented optimality systems and classification of points by optimality conditions.

The Fritz John system over (x, lam0..lamm) and the KKT system over
(x, lam1..lamm) are built exactly in polycore arithmetic; point classification
is numerical: active-set nonnegative least squares for multiplier feasibility,
SVD rank and convex-hull tests for the critical sets C(g) and C+(g).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import nnls

from .polycore import NEG_INF, Polynomial, differentiate

PRODUCTS_CAP = 12
RANK_ENUM_CAP = 12
DEFAULT_TOL = 1e-7
DEFAULT_RANK_TOL = 1e-9


class Variant(Enum):
    FJ = "fj"
    FJ_PLUS = "fj+"
    KKT = "kkt"
    KKT_PLUS = "kkt+"

    @property
    def uses_lambda0(self) -> bool:
        return self in (Variant.FJ, Variant.FJ_PLUS)

    @property
    def squared(self) -> bool:
        return self in (Variant.FJ_PLUS, Variant.KKT_PLUS)


@dataclass(frozen=True)
class PopProblem:
    """min f(x) over S(g) with optional equalities h and denominator theta."""

    f: Polynomial
    g: tuple[Polynomial, ...] = ()
    h: tuple[Polynomial, ...] = ()
    theta: Optional[Polynomial] = None
    var_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(self.g))
        object.__setattr__(self, "h", tuple(self.h))
        names = tuple(self.var_names) or self.f.var_names
        object.__setattr__(self, "var_names", names)
        for p in (self.f, *self.g, *self.h, *((self.theta,) if self.theta else ())):
            if p.var_names != names:
                raise ValueError(
                    f"all polynomials must share the ambient variables {names}"
                )

    @property
    def n(self) -> int:
        return len(self.var_names)

    @property
    def m(self) -> int:
        return len(self.g)

    @property
    def d(self) -> int:
        degrees = [p.degree for p in (self.f, *self.g) if p.degree is not NEG_INF]
        if not degrees:
            raise ValueError("problem has no nonzero objective or constraints")
        return max(degrees)


@dataclass(frozen=True)
class AugmentedSystem:
    variant: Variant
    polynomials: tuple[Polynomial, ...]
    multiplier_count: int

    @property
    def var_names(self) -> tuple[str, ...]:
        return self.polynomials[0].var_names


def _augmented(pop: PopProblem, variant: Variant) -> AugmentedSystem:
    n, m = pop.n, pop.m
    start = 0 if variant.uses_lambda0 else 1
    names = pop.var_names + tuple(f"lam{j}" for j in range(start, m + 1))
    lam = {
        j: Polynomial.variable(names, n + j - start) for j in range(start, m + 1)
    }
    weight = {j: lam[j] ** 2 if variant.squared else lam[j] for j in lam}
    f = pop.f.lift(names)
    g = [gj.lift(names) for gj in pop.g]
    grad_obj = weight[0] if variant.uses_lambda0 else Polynomial.constant(names, 1)
    entries = []
    for i in range(n):
        e = grad_obj * differentiate(f, i)
        for j in range(1, m + 1):
            e = e - weight[j] * differentiate(g[j - 1], i)
        entries.append(e)
    for j in range(1, m + 1):
        entries.append(weight[j] * g[j - 1])
    if variant.uses_lambda0:
        norm = Polynomial.constant(names, 1)
        for j in range(0, m + 1):
            norm = norm - lam[j] ** 2
        entries.append(norm)
    count = m + 1 if variant.uses_lambda0 else m
    return AugmentedSystem(variant, tuple(entries), count)


def build_fj(pop: PopProblem) -> AugmentedSystem:
    """h_FJ: n gradient rows, m complementarity rows, one normalization row."""
    return _augmented(pop, Variant.FJ)


def build_fj_plus(pop: PopProblem) -> AugmentedSystem:
    return _augmented(pop, Variant.FJ_PLUS)


def build_kkt(pop: PopProblem) -> AugmentedSystem:
    """h_KKT: n gradient rows and m complementarity rows; no normalization."""
    return _augmented(pop, Variant.KKT)


def build_kkt_plus(pop: PopProblem) -> AugmentedSystem:
    return _augmented(pop, Variant.KKT_PLUS)


def build_system(pop: PopProblem, variant: Variant) -> AugmentedSystem:
    return _augmented(pop, Variant(variant))


def products(g: Sequence[Polynomial], cap: int = PRODUCTS_CAP) -> tuple[Polynomial, ...]:
    """All products g^alpha, alpha in {0,1}^m \\ {0}, by increasing binary alpha."""
    m = len(g)
    if m > cap:
        raise ValueError(f"products of {m} constraints exceed the cap {cap}")
    out = []
    for mask in range(1, 2**m):
        prod = None
        for j in range(m):
            if mask >> j & 1:
                prod = g[j] if prod is None else prod * g[j]
        out.append(prod)
    return tuple(out)


# -- critical sets -------------------------------------------------------------


def phi_matrix(g: Sequence[Polynomial], x: Sequence[float]) -> np.ndarray:
    """(n+m) x m matrix: gradient columns on top, diag(g(x)) below."""
    n = len(x)
    m = len(g)
    for gj in g:
        if gj.n != n:
            raise ValueError(f"point length {n} != {gj.n} variables")
    phi = np.zeros((n + m, m))
    for j, gj in enumerate(g):
        for i in range(n):
            phi[i, j] = differentiate(gj, i).evaluate_float(x)
        phi[n + j, j] = gj.evaluate_float(x)
    return phi


def _numerical_rank(a: np.ndarray, tol: float) -> int:
    if a.size == 0:
        return 0
    sv = np.linalg.svd(a, compute_uv=False)
    if sv.size == 0 or sv[0] <= 0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    cumsum = np.cumsum(u)
    rho = np.nonzero(u + (1.0 - cumsum) / np.arange(1, len(v) + 1) > 0)[0][-1]
    theta = (1.0 - cumsum[rho]) / (rho + 1.0)
    return np.maximum(v + theta, 0.0)


def _zero_in_hull(a: np.ndarray, tol: float, iters: int = 500) -> bool:
    """Is 0 in the convex hull of the columns of a?  Projected gradient on the simplex."""
    m = a.shape[1]
    gram = a.T @ a
    lam_max = float(np.linalg.eigvalsh(gram)[-1]) if m else 0.0
    if lam_max <= tol**2:
        return True  # every column is numerically zero
    mu = np.full(m, 1.0 / m)
    step = 1.0 / lam_max
    for _ in range(iters):
        if float(mu @ gram @ mu) <= tol**2:
            return True
        mu = _project_simplex(mu - step * (gram @ mu))
    return float(mu @ gram @ mu) <= tol**2


def rank_plus(a: np.ndarray, tol: float = DEFAULT_RANK_TOL, cap: int = RANK_ENUM_CAP) -> int:
    """Largest number of columns whose convex hull does not contain zero."""
    m = a.shape[1]
    if m > cap:
        raise ValueError(f"rank+ enumeration over {m} columns exceeds the cap {cap}")
    for k in range(m, 0, -1):
        for subset in itertools.combinations(range(m), k):
            if not _zero_in_hull(a[:, subset], tol):
                return k
    return 0


def in_critical_set(
    g: Sequence[Polynomial], x: Sequence[float], tol: float = DEFAULT_RANK_TOL
) -> bool:
    """x in C(g): numerical rank of phi^g(x) below m."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return _numerical_rank(phi_matrix(g, x), tol) < len(g)


def in_critical_set_plus(
    g: Sequence[Polynomial], x: Sequence[float], tol: float = DEFAULT_RANK_TOL
) -> bool:
    """x in C+(g): rank+ of phi^g(x) below m."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return rank_plus(phi_matrix(g, x), tol) < len(g)


# -- point classification ------------------------------------------------------


@dataclass(frozen=True)
class PointClassification:
    fj_holds: bool
    kkt_holds: bool
    in_W: bool
    multipliers: Optional[tuple[float, ...]]  # (lam0..lamm), unit norm, if FJ solved
    residual: float  # FJ homogeneous residual at unit multiplier norm
    kkt_multipliers: Optional[tuple[float, ...]]
    kkt_residual: float


def classify_point(
    pop: PopProblem, x: Sequence[float], tol: float = DEFAULT_TOL
) -> PointClassification:
    """Decide the Fritz John and KKT conditions at a feasible point."""
    if pop.h:
        raise ValueError("classification is defined for inequality-constrained problems")
    x = [float(v) for v in x]
    gvals = [gj.evaluate_float(x) for gj in pop.g]
    for j, val in enumerate(gvals):
        if val < -tol:
            raise ValueError(f"infeasible point: g_{j + 1}(x) = {val} < -{tol}")
    n, m = pop.n, pop.m
    grad_f = np.array([differentiate(pop.f, i).evaluate_float(x) for i in range(n)])
    grad_g = np.zeros((n, m))
    for j, gj in enumerate(pop.g):
        for i in range(n):
            grad_g[i, j] = differentiate(gj, i).evaluate_float(x)
    # complementarity forces lam_j = 0 off the active set
    active = [j for j in range(m) if gvals[j] <= tol]

    # KKT: min ||grad f - sum lam_j grad g_j||, lam >= 0
    if active:
        sol, kkt_residual = nnls(grad_g[:, active], grad_f)
    else:
        sol, kkt_residual = np.zeros(0), float(np.linalg.norm(grad_f))
    kkt_holds = kkt_residual <= tol
    kkt_mult = np.zeros(m)
    kkt_mult[active] = sol

    # FJ: min ||lam0 grad f - sum lam_j grad g_j||, lam >= 0, sum lam^2 = 1,
    # solved by anchoring each coordinate at 1 and renormalizing
    stacked = np.column_stack([grad_f.reshape(n, 1)] + [-grad_g[:, [j]] for j in active])
    cols = stacked.shape[1]
    best_res, best_lam = np.inf, None
    for anchor in range(cols):
        rest = [i for i in range(cols) if i != anchor]
        if rest:
            mu, _ = nnls(stacked[:, rest], -stacked[:, anchor])
        else:
            mu = np.zeros(0)
        lam = np.zeros(cols)
        lam[anchor] = 1.0
        lam[rest] = mu
        lam /= np.linalg.norm(lam)
        res = float(np.linalg.norm(stacked @ lam))
        if res < best_res:
            best_res, best_lam = res, lam
    fj_holds = best_res <= tol
    fj_mult = np.zeros(m + 1)
    fj_mult[0] = best_lam[0]
    for idx, j in enumerate(active):
        fj_mult[j + 1] = best_lam[idx + 1]

    return PointClassification(
        fj_holds=fj_holds,
        kkt_holds=kkt_holds,
        in_W=fj_holds and not kkt_holds,
        multipliers=tuple(float(v) for v in fj_mult) if fj_holds else None,
        residual=best_res,
        kkt_multipliers=tuple(float(v) for v in kkt_mult) if kkt_holds else None,
        kkt_residual=float(kkt_residual),
    )
