"""Desk-scale reference problems shared across test modules.

Each problem carries 10 exactly feasible rational points (g_j >= 0, h_t = 0
hold in exact arithmetic) and the analytic minimum, so moment soundness and
solver accuracy can be checked without trusting any solver output.
"""

from dataclasses import dataclass
from fractions import Fraction

from fjpop.fjkkt import PopProblem
from fjpop.polycore import parse_polynomial

F = Fraction


@dataclass(frozen=True)
class DeskProblem:
    name: str
    pop: PopProblem
    points: tuple[tuple[Fraction, ...], ...]
    fstar: Fraction


def _pop(names, f, g=(), h=(), theta=None):
    names = tuple(names)

    def parse(text):
        return parse_polynomial(text, names)

    return PopProblem(
        f=parse(f),
        g=tuple(parse(t) for t in g),
        h=tuple(parse(t) for t in h),
        theta=parse(theta) if theta else None,
    )


BALL = DeskProblem(
    "ball",
    _pop(("x1", "x2"), "x1", ("1 - x1^2 - x2^2",)),
    (
        (F(0), F(0)),
        (F(1), F(0)),
        (F(0), F(-1)),
        (F(3, 5), F(4, 5)),
        (F(-3, 5), F(-4, 5)),
        (F(1, 2), F(1, 2)),
        (F(-1, 2), F(1, 3)),
        (F(3, 10), F(2, 5)),
        (F(-3, 5), F(0)),
        (F(1, 10), F(-1, 5)),
    ),
    F(-1),
)

CUSP = DeskProblem(
    "cusp",
    _pop(("x",), "x", ("x^3",)),
    tuple(
        (v,)
        for v in (F(0), F(1), F(1, 2), F(3, 2), F(2), F(1, 3), F(2, 3), F(5, 4), F(7, 4), F(1, 5))
    ),
    F(0),
)

BOX = DeskProblem(
    "box",
    _pop(("x",), "x^2", ("1 - x^2", "x + 1")),
    tuple(
        (v,)
        for v in (
            F(-1),
            F(1),
            F(0),
            F(1, 2),
            F(-1, 2),
            F(1, 3),
            F(-1, 3),
            F(3, 4),
            F(-3, 4),
            F(2, 5),
        )
    ),
    F(0),
)

AXES = DeskProblem(
    "axes",
    _pop(("x1", "x2"), "x1^2 + x2^2", h=("x1 * x2",)),
    (
        (F(0), F(0)),
        (F(1), F(0)),
        (F(0), F(1)),
        (F(-1), F(0)),
        (F(0), F(-2)),
        (F(3, 2), F(0)),
        (F(0), F(1, 2)),
        (F(-1, 2), F(0)),
        (F(0), F(-1, 3)),
        (F(2), F(0)),
    ),
    F(0),
)

HALFCIRCLE = DeskProblem(
    "halfcircle",
    _pop(("x1", "x2"), "x2", ("x1",), ("x1^2 + x2^2 - 1",)),
    (
        (F(1), F(0)),
        (F(0), F(1)),
        (F(0), F(-1)),
        (F(3, 5), F(4, 5)),
        (F(3, 5), F(-4, 5)),
        (F(4, 5), F(3, 5)),
        (F(4, 5), F(-3, 5)),
        (F(5, 13), F(12, 13)),
        (F(12, 13), F(-5, 13)),
        (F(8, 17), F(15, 17)),
    ),
    F(-1),
)

DESK_PROBLEMS = (BALL, CUSP, BOX, AXES, HALFCIRCLE)


def solve_instances():
    """Relaxation instances with known optima for solver accuracy tests."""
    from fjpop.relax import augment_problem

    return (
        ("ball-raw", BALL.pop, 2, F(-1)),
        ("box-raw", BOX.pop, 2, F(0)),
        ("axes-raw", AXES.pop, 2, F(0)),
        ("halfcircle-raw", HALFCIRCLE.pop, 2, F(-1)),
        ("ball-fj", augment_problem(BALL.pop, "fj", use_products=True), 2, F(-1)),
    )
