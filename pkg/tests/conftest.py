import sys
from fractions import Fraction
from pathlib import Path

from hypothesis import settings
from hypothesis import strategies as st

from fjpop.polycore import Polynomial, monomial_basis

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("ci", derandomize=True, max_examples=60, deadline=None)
settings.load_profile("ci")


def small_fractions(bound=8, max_denominator=4):
    return st.fractions(
        min_value=-bound, max_value=bound, max_denominator=max_denominator
    )


def polynomials(var_names, max_degree, max_terms=6, coeff_bound=8):
    """Strategy for sparse polynomials over the given variables."""
    names = tuple(var_names)
    monos = [m.exponents for m in monomial_basis(len(names), max_degree)]
    term = st.tuples(st.sampled_from(monos), small_fractions(coeff_bound))
    return st.lists(term, min_size=0, max_size=max_terms).map(
        lambda ts: Polynomial(names, ts)
    )


def nonzero_polynomials(var_names, max_degree, **kw):
    return polynomials(var_names, max_degree, **kw).filter(lambda p: bool(p))


def rational_points(n, bound=3):
    return st.lists(
        small_fractions(bound, max_denominator=5), min_size=n, max_size=n
    ).map(tuple)
