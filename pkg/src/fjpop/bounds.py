"""Tower-of-exponentials arithmetic for the explicit degree-bound formulas.

Values are exact big integers (Exact, capped at 2^20 bits), iterated
exponentials 2^2^...^top (Tower), Sums, and symbolic halves (ScaledHalf).
Composing the w formulas into relaxation orders also needs symbolic powers
and products (Pow, Prod); these appear only inside tower tops and sum terms.

Comparison is exact at every step: collapse to rationals when everything
fits, otherwise descend through iterated base-2 logarithms carrying exact
rational windows.  A window overlap that cannot be resolved raises
ComparisonAmbiguous instead of guessing; halving in particular is ignored
between towers only after the descent shows their tops differ decisively.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Union

EXACT_CAP_BITS = 2**20

# lower sentinel for log windows of values that may dip below 1
_SENTINEL_LO = Fraction(-8)


class ComparisonAmbiguous(Exception):
    """Raised when log-descent windows overlap without resolving the order."""


class TowerBound:
    """Base class; see the concrete forms below."""

    __slots__ = ()

    def __str__(self) -> str:
        return format_bound(self)


@dataclass(frozen=True)
class Exact(TowerBound):
    value: int

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("negative bound")
        if self.value.bit_length() > EXACT_CAP_BITS:
            raise ValueError("integer exceeds the Exact cap; use a structural form")


@dataclass(frozen=True)
class Tower(TowerBound):
    """2^2^...^top with `height` twos."""

    height: int
    top: TowerBound

    def __post_init__(self):
        if self.height < 1:
            raise ValueError("tower height must be >= 1")


@dataclass(frozen=True)
class Sum(TowerBound):
    terms: tuple[TowerBound, ...]

    def __post_init__(self):
        if len(self.terms) < 2:
            raise ValueError("Sum needs at least two terms")


@dataclass(frozen=True)
class ScaledHalf(TowerBound):
    inner: TowerBound


@dataclass(frozen=True)
class Pow(TowerBound):
    """base ** exp; structural closure for the d-slot compositions."""

    base: TowerBound
    exp: TowerBound


@dataclass(frozen=True)
class Prod(TowerBound):
    factors: tuple[TowerBound, ...]

    def __post_init__(self):
        if len(self.factors) < 2:
            raise ValueError("Prod needs at least two factors")


def tb(x: Union[int, TowerBound]) -> TowerBound:
    return x if isinstance(x, TowerBound) else Exact(x)


# -- exact collapse ----------------------------------------------------------


@lru_cache(maxsize=None)
def to_fraction(t: TowerBound) -> Optional[Fraction]:
    """Exact rational value when it fits below the cap, else None."""
    if isinstance(t, Exact):
        return Fraction(t.value)
    if isinstance(t, Tower):
        f = to_fraction(t.top)
        if f is None:
            return None
        for _ in range(t.height):
            if f.denominator != 1 or f < 0 or f > EXACT_CAP_BITS:
                return None
            f = Fraction(2 ** int(f))
        return f
    if isinstance(t, Sum):
        total = Fraction(0)
        for term in t.terms:
            f = to_fraction(term)
            if f is None:
                return None
            total += f
        return total if _frac_bits(total) <= EXACT_CAP_BITS else None
    if isinstance(t, ScaledHalf):
        f = to_fraction(t.inner)
        return None if f is None else f / 2
    if isinstance(t, Pow):
        b, e = to_fraction(t.base), to_fraction(t.exp)
        if b is None or e is None or e.denominator != 1 or b.denominator != 1:
            return None
        bi, ei = int(b), int(e)
        if bi <= 1:
            return Fraction(bi**ei) if bi >= 0 else None
        if (bi.bit_length() - 1) * ei > EXACT_CAP_BITS:
            return None
        v = bi**ei
        return Fraction(v) if v.bit_length() <= EXACT_CAP_BITS else None
    if isinstance(t, Prod):
        total = Fraction(1)
        for factor in t.factors:
            f = to_fraction(factor)
            if f is None:
                return None
            total *= f
            if _frac_bits(total) > EXACT_CAP_BITS:
                return None
        return total
    raise TypeError(f"not a TowerBound: {t!r}")


def _frac_bits(f: Fraction) -> int:
    return max(f.numerator.bit_length(), f.denominator.bit_length())


# -- exact log windows -------------------------------------------------------


def _ge_pow2(f: Fraction, e: int) -> bool:
    # f >= 2^e, exactly
    n, d = f.numerator, f.denominator
    return n >= (d << e) if e >= 0 else (n << -e) >= d


def _floor_log2(f: Fraction) -> int:
    if f < 1:
        raise ValueError("floor_log2 needs f >= 1")
    e = f.numerator.bit_length() - f.denominator.bit_length()
    while not _ge_pow2(f, e):
        e -= 1
    while _ge_pow2(f, e + 1):
        e += 1
    return e


def _ceil_log2(f: Fraction) -> int:
    e = _floor_log2(f)
    n, d = f.numerator, f.denominator
    exact = n == (d << e) if e >= 0 else (n << -e) == d
    return e if exact else e + 1


Window = tuple[int, Fraction, Fraction]  # (depth k, lo, hi): log2^(k)(value) in [lo, hi]


def _push(w: Window) -> Window:
    k, lo, hi = w
    plo = Fraction(_floor_log2(lo)) if lo >= 1 else _SENTINEL_LO
    if hi < 1:
        phi = Fraction(0)
    else:
        phi = Fraction(_ceil_log2(hi))
    return (k + 1, plo, phi)


def _at_depth(w: Window, j: int) -> Window:
    while w[0] < j:
        w = _push(w)
    if w[0] > j:
        raise ComparisonAmbiguous(f"cannot lift window {w} to depth {j}")
    return w


def _logshift(w: Window) -> Window:
    """Window for log2 of the value described by w."""
    k, lo, hi = w
    if k >= 1:
        return (k - 1, lo, hi)
    k2, lo2, hi2 = _push(w)
    return (k2 - 1, lo2, hi2)


def _add_windows(a: Window, b: Window) -> Window:
    """Window for the SUM of the two described values."""
    if a[0] == 0 and b[0] == 0:
        return (0, a[1] + b[1], a[2] + b[2])
    j = max(a[0], b[0], 1)
    a, b = _at_depth(a, j), _at_depth(b, j)
    # max <= sum <= 2*max; the +1 pushes through every further log level
    return (j, max(a[1], b[1]), max(a[2], b[2]) + 1)


def _mul_windows(a: Window, b: Window) -> Window:
    """Window for the PRODUCT of the two described values."""
    if a[0] == 0 and b[0] == 0:
        return (0, a[1] * b[1], a[2] * b[2])
    k, lo, hi = _add_windows(_logshift(a), _logshift(b))
    return (k + 1, lo, hi)


@lru_cache(maxsize=None)
def _natural(t: TowerBound) -> Window:
    c = to_fraction(t)
    if c is not None:
        return (0, c, c)
    if isinstance(t, Tower):
        k, lo, hi = _natural(t.top)
        return (k + t.height, lo, hi)
    if isinstance(t, Sum):
        wins = [_natural(term) for term in t.terms]
        j = max(1, max(w[0] for w in wins))
        wins = [_at_depth(w, j) for w in wins]
        slack = (len(t.terms) - 1).bit_length()  # ceil(log2 #terms)
        return (j, max(w[1] for w in wins), max(w[2] for w in wins) + slack)
    if isinstance(t, ScaledHalf):
        k, lo, hi = _natural(t.inner)
        if k == 1:
            return (1, lo - 1, hi - 1)
        return (k, lo - 1, hi)
    if isinstance(t, Pow):
        log_p = _mul_windows(_natural(t.exp), _logshift(_natural(t.base)))
        return (log_p[0] + 1, log_p[1], log_p[2])
    if isinstance(t, Prod):
        win = _natural(t.factors[0])
        for factor in t.factors[1:]:
            win = _mul_windows(win, _natural(factor))
        return win
    raise TypeError(f"not a TowerBound: {t!r}")


def _resum(terms: list[TowerBound]) -> TowerBound:
    return terms[0] if len(terms) == 1 else Sum(tuple(terms))


def compare(a: Union[int, TowerBound], b: Union[int, TowerBound]) -> int:
    """Total order on values: -1, 0, or 1; raises ComparisonAmbiguous if stuck."""
    a, b = tb(a), tb(b)
    if a == b:
        return 0
    fa, fb = to_fraction(a), to_fraction(b)
    if fa is not None and fb is not None:
        return (fa > fb) - (fa < fb)
    # exact structural reductions before falling back to log windows
    if isinstance(a, ScaledHalf) and isinstance(b, ScaledHalf):
        return compare(a.inner, b.inner)
    for flip, half, other in ((1, a, b), (-1, b, a)):
        if isinstance(half, ScaledHalf):
            try:
                return flip * compare(half.inner, _double(other))
            except (NotImplementedError, ValueError):
                break
    if isinstance(a, Tower) and isinstance(b, Tower):
        h = min(a.height, b.height)
        ta = a.top if a.height == h else Tower(a.height - h, a.top)
        tb_ = b.top if b.height == h else Tower(b.height - h, b.top)
        return compare(ta, tb_)
    if isinstance(a, Sum) or isinstance(b, Sum):
        left = list(a.terms) if isinstance(a, Sum) else [a]
        right = list(b.terms) if isinstance(b, Sum) else [b]
        cancelled = False
        for term in list(left):
            if term in right:
                left.remove(term)
                right.remove(term)
                cancelled = True
        left = [t for t in left if t != Exact(0)]
        right = [t for t in right if t != Exact(0)]
        if cancelled:
            if not left and not right:
                return 0
            if not left:
                return -1
            if not right:
                return 1
            return compare(_resum(left), _resum(right))
    wa, wb = _natural(a), _natural(b)
    j = max(wa[0], wb[0])
    wa, wb = _at_depth(wa, j), _at_depth(wb, j)
    if wa[2] < wb[1]:
        return -1
    if wb[2] < wa[1]:
        return 1
    if wa[1] == wa[2] == wb[1] == wb[2]:
        return 0
    raise ComparisonAmbiguous(
        f"windows overlap at depth {j}: [{wa[1]}, {wa[2]}] vs [{wb[1]}, {wb[2]}]"
    )


def digits_log2log2(a: TowerBound) -> Optional[int]:
    """log2 log2 a, exactly, when a = Tower(2, E) with collapsible E."""
    if isinstance(a, Tower) and a.height == 2:
        f = to_fraction(a.top)
        if f is not None and f.denominator == 1:
            return int(f)
    return None


# -- symbolic helpers for formula composition --------------------------------


def _add_tb(*parts: Union[int, TowerBound]) -> TowerBound:
    terms: list[TowerBound] = []
    const = 0
    for part in parts:
        part = tb(part)
        if isinstance(part, Exact):
            const += part.value
        elif isinstance(part, Sum):
            for term in part.terms:
                if isinstance(term, Exact):
                    const += term.value
                else:
                    terms.append(term)
        else:
            terms.append(part)
    if const:
        terms.append(Exact(const))
    if not terms:
        return Exact(0)
    return terms[0] if len(terms) == 1 else Sum(tuple(terms))


def _double(t: TowerBound) -> TowerBound:
    if isinstance(t, Exact):
        return Exact(2 * t.value)
    if isinstance(t, ScaledHalf):
        return t.inner
    if isinstance(t, Sum):
        return _add_tb(*(_double(term) for term in t.terms))
    if isinstance(t, Tower):
        # 2 * 2^y = 2^(y+1)
        y = t.top if t.height == 1 else Tower(t.height - 1, t.top)
        return Tower(1, _add_tb(y, 1))
    raise NotImplementedError(f"cannot double {t!r} exactly")


def _exp2(e: Union[int, TowerBound]) -> TowerBound:
    if isinstance(e, int):
        if e <= EXACT_CAP_BITS:
            return Exact(2**e)
        e = Exact(e)
    return Tower(1, e)


def _pow_tb(base: Union[int, TowerBound], exp: Union[int, TowerBound]) -> TowerBound:
    if isinstance(base, int) and isinstance(exp, int):
        if (max(base, 2).bit_length() - 1) * exp <= EXACT_CAP_BITS:
            v = base**exp
            if v.bit_length() <= EXACT_CAP_BITS:
                return Exact(v)
        return Pow(Exact(base), Exact(exp))
    return Pow(tb(base), tb(exp))


def _mul_tb(a: Union[int, TowerBound], b: Union[int, TowerBound]) -> TowerBound:
    a, b = tb(a), tb(b)
    fa, fb = to_fraction(a), to_fraction(b)
    if fa is not None and fb is not None and fa.denominator == fb.denominator == 1:
        v = int(fa) * int(fb)
        if v.bit_length() <= EXACT_CAP_BITS:
            return Exact(v)
    if isinstance(a, Exact) and a.value == 1:
        return b
    if isinstance(b, Exact) and b.value == 1:
        return a
    return Prod((a, b))


def _mul_pow2_tb(t: TowerBound, j: int) -> TowerBound:
    """t * 2^j, exactly."""
    if j == 0:
        return t
    if isinstance(t, Exact):
        v = t.value << j
        if v.bit_length() <= EXACT_CAP_BITS:
            return Exact(v)
        return Prod((t, _exp2(j)))
    if isinstance(t, Sum):
        return _add_tb(*(_mul_pow2_tb(term, j) for term in t.terms))
    if isinstance(t, Tower):
        y = t.top if t.height == 1 else Tower(t.height - 1, t.top)
        return Tower(1, _add_tb(y, j))
    return Prod((t, _exp2(j)))


def _bit_tb(t: TowerBound) -> TowerBound:
    """bit() of a symbolic degree: position of the most significant bit."""
    f = to_fraction(t)
    if f is not None:
        if f.denominator != 1:
            raise ValueError(f"bit() of a non-integer: {f}")
        return Exact(bit(int(f)))
    if isinstance(t, Tower):
        # bit(2^y) = y + 1
        y = t.top if t.height == 1 else Tower(t.height - 1, t.top)
        return _add_tb(y, 1)
    if isinstance(t, Sum):
        dominant = max(t.terms, key=_CompareKey)
        if not isinstance(dominant, Tower):
            raise NotImplementedError(f"bit() of {t!r}: dominant term not a tower")
        rest = [term for term in t.terms if term is not dominant]
        # sum < 2 * dominant = 2^(y+1) needs every other term < dominant
        for term in rest:
            if compare(term, dominant) >= 0:
                raise NotImplementedError(f"bit() of {t!r}: no strict dominant term")
        return _bit_tb(dominant)
    raise NotImplementedError(f"bit() of {t!r}")


class _CompareKey:
    __slots__ = ("t",)

    def __init__(self, t: TowerBound):
        self.t = t

    def __lt__(self, other: "_CompareKey") -> bool:
        return compare(self.t, other.t) < 0


# -- the paper's formulas ----------------------------------------------------


def bit(d: int) -> int:
    """1 if d = 0, else the k with 2^(k-1) <= d < 2^k."""
    if d < 0:
        raise ValueError("bit() needs d >= 0")
    return 1 if d == 0 else d.bit_length()


def bound_c(n: int, d: int, s: int) -> int:
    """c(n,d,s) = d(2d-1)^(n+s-1)."""
    if n < 1 or d < 1 or s < 1:
        raise ValueError("bound_c needs n, d, s >= 1")
    return d * (2 * d - 1) ** (n + s - 1)


def bound_b(n: int, d: Union[int, TowerBound], s: int) -> TowerBound:
    """b(n,d,s) = 2^2^E with E = 2^(max(2,d)^(4^n)) + s^(2^n) max(2,d)^(16^n bit(d))."""
    if n < 1 or s < 1:
        raise ValueError("bound_b needs n >= 1, s >= 1")
    if isinstance(d, int):
        if d < 0:
            raise ValueError("bound_b needs d >= 0")
        base = max(2, d)
        x_exp = _pow_tb(base, 4**n)
        y = _mul_tb(s ** (2**n), _pow_tb(base, 16**n * bit(d)))
    else:
        base = d if compare(d, 2) >= 0 else Exact(2)
        x_exp = _pow_tb(base, 4**n)
        bit_d = _bit_tb(d)
        exp_y = _mul_pow2_tb(bit_d, 4 * n)  # 16^n * bit(d)
        y = _mul_tb(_pow_tb(s, 2**n), _pow_tb(base, exp_y))
    fx = to_fraction(x_exp)
    if fx is not None and fx <= EXACT_CAP_BITS:
        x: TowerBound = Exact(2 ** int(fx))
    else:
        x = Tower(1, x_exp)
    return Tower(2, _add_tb(x, y))


class BoundVariant(Enum):
    FJ = "fj"
    FJ_SOS = "fj-sos"
    FJ_PLUS = "fj+"
    FJ_PLUS_SOS = "fj+-sos"
    FJ_DENO = "fj-deno"
    KKT = "kkt"
    KKT_PLUS = "kkt+"


def theorem_w(variant: BoundVariant, n: int, m: int, d: int) -> TowerBound:
    """The degree bound w of the representation theorem for the given variant."""
    if n < 1 or m < 1 or d < 1:
        raise ValueError("theorem_w needs n, m, d >= 1")
    variant = BoundVariant(variant)
    if variant is BoundVariant.FJ:
        return _add_tb(
            ScaledHalf(bound_b(n + m + 1, d + 1, 2 * m + n + 3)),
            d * bound_c(n + m + 1, d + 1, n + m + 1),
        )
    if variant is BoundVariant.FJ_SOS:
        return Exact(d * ((2 * (d + 1) - 1) ** (2 * n + 3 * m + 1) - 1))
    if variant is BoundVariant.FJ_PLUS:
        return _add_tb(
            ScaledHalf(bound_b(n + m + 1, d + 2, 2 * m + n + 3)),
            d * bound_c(n + m + 1, d + 2, n + m + 1),
        )
    if variant is BoundVariant.FJ_PLUS_SOS:
        return Exact(d * (bound_c(n + m + 1, d + 2, n + 2 * m + 1) - 1))
    if variant is BoundVariant.FJ_DENO:
        return _add_tb(
            ScaledHalf(bound_b(n + m + 1, d + 1, 2 * m + n + 3)),
            2 * d * bound_c(n + m + 1, d + 1, n + m + 1),
        )
    if variant is BoundVariant.KKT:
        return _add_tb(
            ScaledHalf(bound_b(n + m, d + 1, 2 * m + n + 1)),
            d * bound_c(n + m, d + 1, n + m),
        )
    if variant is BoundVariant.KKT_PLUS:
        return _add_tb(
            ScaledHalf(bound_b(n + m, d + 1, 2 * m + n + 1)),
            d * bound_c(n + m, d + 2, n + m),
        )
    raise ValueError(f"unknown variant {variant!r}")


def relaxation_order(
    variant: BoundVariant, n: int, m: int, w: Union[int, TowerBound]
) -> TowerBound:
    """The relaxation order r achieving exactness, from the theorem's w."""
    variant = BoundVariant(variant)
    w = tb(w)
    if variant is BoundVariant.FJ_DENO:
        d_slot = _double(_add_tb(w, 1))
    else:
        d_slot = _double(w)
    fd = to_fraction(d_slot)
    if fd is not None and fd.denominator == 1:
        d_slot = Exact(int(fd))
    d_arg: Union[int, TowerBound] = (
        d_slot.value if isinstance(d_slot, Exact) else d_slot
    )
    if variant is BoundVariant.KKT:
        return ScaledHalf(bound_b(n + m, d_arg, m + n + 1))
    return ScaledHalf(bound_b(n + m + 1, d_arg, m + n + 2))


@dataclass(frozen=True)
class BoundReport:
    variant: BoundVariant
    inputs: tuple[int, int, int]  # (n, m, d)
    w: TowerBound
    r: TowerBound


def bound_report(variant: BoundVariant, n: int, m: int, d: int) -> BoundReport:
    w = theorem_w(variant, n, m, d)
    r = relaxation_order(variant, n, m, w)
    return BoundReport(BoundVariant(variant), (n, m, d), w, r)


# -- rendering ----------------------------------------------------------------


def _int_str(v: int) -> str:
    import sys

    try:
        return str(v)
    except ValueError:
        # exact decimal beats the default digit guard; restore it afterwards
        old = sys.get_int_max_str_digits()
        sys.set_int_max_str_digits(v.bit_length() // 3 + 16)
        try:
            return str(v)
        finally:
            sys.set_int_max_str_digits(old)


def format_bound(t: TowerBound) -> str:
    if isinstance(t, Exact):
        return _int_str(t.value)
    if isinstance(t, Tower):
        top = format_bound(t.top)
        if not isinstance(t.top, Exact):
            top = f"({top})"
        return "2^" * t.height + top
    if isinstance(t, Sum):
        return " + ".join(format_bound(term) for term in t.terms)
    if isinstance(t, ScaledHalf):
        return f"(1/2)*{format_bound(t.inner)}"
    if isinstance(t, Pow):
        return f"({format_bound(t.base)})^({format_bound(t.exp)})"
    if isinstance(t, Prod):
        return " * ".join(f"({format_bound(f)})" for f in t.factors)
    raise TypeError(f"not a TowerBound: {t!r}")


def report_lines(report: BoundReport) -> list[str]:
    n, m, d = report.inputs
    lines = [
        f"variant: {report.variant.value}",
        f"inputs: n={n} m={m} d={d}",
    ]
    w = report.w
    if isinstance(w, Exact):
        lines.append(f"w (exact): {_int_str(w.value)}")
    else:
        half = [u for u in w.terms if isinstance(u, ScaledHalf)] if isinstance(w, Sum) else []
        const = [u for u in w.terms if isinstance(u, Exact)] if isinstance(w, Sum) else []
        if half and const:
            lines.append(f"w, c-part (exact): {_int_str(const[0].value)}")
            lines.append(f"w, b-part (halved): {format_bound(half[0])}")
        else:
            lines.append(f"w: {format_bound(w)}")
    lines.append(f"r: {format_bound(report.r)}")
    dll = digits_log2log2(
        report.r.inner if isinstance(report.r, ScaledHalf) else report.r
    )
    if dll is not None:
        lines.append(f"r, log2 log2 of the unhalved tower: {dll}")
    return lines
