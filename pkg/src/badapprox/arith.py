"""Exact and precision-tracked scalars, sup-norm geometry, continued fractions.

Scalars flowing through the library are one of

* ``int`` / ``fractions.Fraction`` -- exact rationals,
* :class:`QuadraticSurd` -- exact elements ``a + b*sqrt(d)`` of a real
  quadratic field (golden ratio, ``sqrt(2)``, ...),
* ``mpmath.mpf`` -- high-precision reals (default 128-bit mantissa),
* ``float`` -- treated as the exact dyadic rational it stores.

Every mpf and float is a dyadic rational, so :func:`exact` can always move a
scalar into exact arithmetic; the precision attached to an inexact input only
matters when deciding how far its continued fraction can be trusted.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

import mpmath
from mpmath.libmp import to_rational

from .errors import PrecisionExhausted

DEFAULT_PRECISION_BITS = 128
# comparison tolerance used for thresholds (caller visible)
ETA = Fraction(1, 2**64)


def _squarefree_split(d: int) -> tuple[int, int]:
    """Return (s, f) with d = s**2 * f and f squarefree."""
    s, f = 1, d
    p = 2
    while p * p <= f:
        while f % (p * p) == 0:
            f //= p * p
            s *= p
        p += 1
    return s, f


class QuadraticSurd:
    """Exact real number ``a + b*sqrt(d)`` with rational ``a, b``.

    ``d`` is a squarefree integer greater than one. Arithmetic with ints,
    Fractions and surds over the same ``d`` stays exact; results with a zero
    irrational part collapse to :class:`~fractions.Fraction`.
    """

    __slots__ = ("a", "b", "d")

    def __init__(self, a, b, d: int):
        if d < 2:
            raise ValueError("d must be an integer >= 2")
        s, f = _squarefree_split(int(d))
        if f == 1:
            raise ValueError(f"sqrt({d}) is rational")
        self.a = Fraction(a)
        self.b = Fraction(b) * s
        self.d = f

    @staticmethod
    def _make(a, b, d):
        if b == 0:
            return Fraction(a)
        out = object.__new__(QuadraticSurd)
        out.a, out.b, out.d = Fraction(a), Fraction(b), d
        return out

    def _coerce(self, other):
        if isinstance(other, QuadraticSurd):
            if other.d != self.d:
                raise TypeError("surds over different fields")
            return other.a, other.b
        if isinstance(other, (int, Fraction)):
            return Fraction(other), Fraction(0)
        if isinstance(other, float):
            return Fraction(other), Fraction(0)
        return None

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        c = self._coerce(other)
        if c is None:
            return NotImplemented
        return self._make(self.a + c[0], self.b + c[1], self.d)

    __radd__ = __add__

    def __neg__(self):
        return self._make(-self.a, -self.b, self.d)

    def __pos__(self):
        return self

    def __sub__(self, other):
        c = self._coerce(other)
        if c is None:
            return NotImplemented
        return self._make(self.a - c[0], self.b - c[1], self.d)

    def __rsub__(self, other):
        c = self._coerce(other)
        if c is None:
            return NotImplemented
        return self._make(c[0] - self.a, c[1] - self.b, self.d)

    def __mul__(self, other):
        c = self._coerce(other)
        if c is None:
            return NotImplemented
        a, b = c
        return self._make(self.a * a + self.b * b * self.d, self.a * b + self.b * a, self.d)

    __rmul__ = __mul__

    def norm(self) -> Fraction:
        """Field norm ``a**2 - d*b**2`` (nonzero for nonzero surds)."""
        return self.a * self.a - self.b * self.b * self.d

    def conjugate(self):
        return self._make(self.a, -self.b, self.d)

    def reciprocal(self):
        nm = self.norm()
        return self._make(self.a / nm, -self.b / nm, self.d)

    def __truediv__(self, other):
        c = self._coerce(other)
        if c is None:
            return NotImplemented
        if c[1] == 0:
            if c[0] == 0:
                raise ZeroDivisionError("division by zero")
            return self._make(self.a / c[0], self.b / c[0], self.d)
        return self * self._make(c[0], c[1], self.d).reciprocal()

    def __rtruediv__(self, other):
        c = self._coerce(other)
        if c is None:
            return NotImplemented
        return self.reciprocal() * self._make(c[0], c[1], self.d)

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.reciprocal() ** (-k)
        result: Union[Fraction, QuadraticSurd] = Fraction(1)
        base: Union[Fraction, QuadraticSurd] = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # order ------------------------------------------------------------------
    def sign(self) -> int:
        sa = (self.a > 0) - (self.a < 0)
        sb = (self.b > 0) - (self.b < 0)
        if sb == 0:
            return sa
        if sa == 0 or sa == sb:
            return sb
        return sa if self.norm() > 0 else sb

    def _cmp(self, other) -> int:
        diff = self - other
        if diff is NotImplemented:
            raise TypeError(f"cannot compare QuadraticSurd with {type(other).__name__}")
        if isinstance(diff, QuadraticSurd):
            return diff.sign()
        return (diff > 0) - (diff < 0)

    def __eq__(self, other):
        if self._coerce(other) is None:
            return NotImplemented
        return self._cmp(other) == 0

    def __hash__(self):
        return hash((self.a, self.b, self.d))

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __floor__(self) -> int:
        # x = (P + R*sqrt(d)) / N with integers, N > 0
        N = self.a.denominator * self.b.denominator
        P = self.a.numerator * self.b.denominator
        R = self.b.numerator * self.a.denominator
        r = math.isqrt(R * R * self.d)
        floor_s = r if R > 0 else -r - 1
        return (P + floor_s) // N

    def floor(self) -> int:
        return self.__floor__()

    def __ceil__(self) -> int:
        return -math.floor(-self)

    # conversion -------------------------------------------------------------
    def __float__(self):
        a, b, d = self.a, self.b, self.d
        if a == 0 or (a > 0) == (b > 0):
            return float(a) + float(b) * math.sqrt(d)
        # opposite signs: evaluate through the conjugate to avoid cancellation
        return float(self.norm()) / (float(a) - float(b) * math.sqrt(d))

    def to_mpf(self, prec: int = DEFAULT_PRECISION_BITS) -> mpmath.mpf:
        with mpmath.workprec(prec + 16):
            a = mpmath.mpf(self.a.numerator) / self.a.denominator
            b = mpmath.mpf(self.b.numerator) / self.b.denominator
            rd = mpmath.sqrt(self.d)
            if self.a == 0 or (self.a > 0) == (self.b > 0):
                val = a + b * rd
            else:
                nm = self.norm()
                val = (mpmath.mpf(nm.numerator) / nm.denominator) / (a - b * rd)
        with mpmath.workprec(prec):
            return +val

    def __repr__(self):
        return f"QuadraticSurd({self.a!r}, {self.b!r}, {self.d})"

    def __str__(self):
        b = "" if abs(self.b) == 1 else f"{abs(self.b)}*"
        sign = "-" if self.b < 0 else "+"
        if self.a == 0:
            return f"{'-' if self.b < 0 else ''}{b}sqrt({self.d})"
        return f"{self.a} {sign} {b}sqrt({self.d})"


PHI = QuadraticSurd(Fraction(1, 2), Fraction(1, 2), 5)
SQRT2 = QuadraticSurd(0, 1, 2)

Exact = Union[int, Fraction, QuadraticSurd]
Scalar = Union[int, Fraction, QuadraticSurd, float, mpmath.mpf]


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction, QuadraticSurd)) and not isinstance(x, bool)


def exact(x) -> Exact:
    """Return ``x`` as an exact scalar (floats and mpfs are dyadic rationals)."""
    if isinstance(x, (Fraction, QuadraticSurd)):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError("non-finite scalar")
        return Fraction(x)
    if isinstance(x, mpmath.mpf):
        if not mpmath.isfinite(x):
            raise ValueError("non-finite scalar")
        p, q = to_rational(x._mpf_)
        return Fraction(int(p), int(q))
    if isinstance(x, numbers.Rational):
        return Fraction(x.numerator, x.denominator)
    if isinstance(x, numbers.Real):
        return Fraction(float(x))
    raise TypeError(f"unsupported scalar type {type(x).__name__}")


def to_mpf(x, prec: int = DEFAULT_PRECISION_BITS) -> mpmath.mpf:
    if isinstance(x, QuadraticSurd):
        return x.to_mpf(prec)
    with mpmath.workprec(prec):
        if isinstance(x, Fraction):
            return mpmath.mpf(x.numerator) / x.denominator
        return mpmath.mpf(x)


def nearest_int(x) -> int:
    """Nearest integer, ties resolved toward the smaller integer."""
    return -math.floor(Fraction(1, 2) - exact(x))


def sup_norm(v: Sequence):
    """Maximum absolute coordinate of a nonempty vector."""
    v = list(v)
    if not v:
        raise ValueError("sup_norm of an empty vector")
    return max(abs(x) for x in v)


def dist_to_nearest_int_vector(v: Sequence):
    """Sup-norm distance from ``v`` to Z^m and a nearest integer vector.

    Half-integer coordinates round down. Exact inputs give exact distances;
    float and mpf inputs keep their type.
    """
    p = tuple(nearest_int(x) for x in v)
    diffs = [x - pi for x, pi in zip(v, p)]
    return sup_norm(diffs), p


# continued fractions ----------------------------------------------------------


@dataclass(frozen=True)
class PeriodicTail:
    """Eventually periodic tail ``a_start, a_start+1, ... = block repeated``.

    ``start`` is the 1-based index of the first partial quotient of the period.
    """

    start: int
    block: tuple[int, ...]


@dataclass(frozen=True)
class ContinuedFraction:
    a0: int
    partial_quotients: tuple[int, ...]
    terminated: bool = False
    tail: PeriodicTail | None = None

    def __post_init__(self):
        if any(a < 1 for a in self.partial_quotients):
            raise ValueError("partial quotients a_i (i >= 1) must be positive")

    @property
    def depth(self) -> int:
        """Number of terms including ``a0``."""
        return 1 + len(self.partial_quotients)

    def quotient(self, i: int) -> int:
        """Partial quotient ``a_i``, extended through the periodic tail."""
        if i == 0:
            return self.a0
        if i <= len(self.partial_quotients):
            return self.partial_quotients[i - 1]
        if self.tail is None:
            raise IndexError(f"a_{i} not known")
        blk = self.tail.block
        return blk[(i - self.tail.start) % len(blk)]

    def convergents(self) -> list[tuple[int, int]]:
        """``[(p_0, q_0), (p_1, q_1), ...]`` for the stored quotients."""
        p_prev, q_prev = 1, 0
        p, q = self.a0, 1
        out = [(p, q)]
        for a in self.partial_quotients:
            p, p_prev = a * p + p_prev, p
            q, q_prev = a * q + q_prev, q
            out.append((p, q))
        return out

    def value(self) -> Fraction:
        p, q = self.convergents()[-1]
        return Fraction(p, q)

    def __str__(self):
        body = ",".join(str(a) for a in self.partial_quotients)
        return f"[{self.a0}; {body}]" if body else f"[{self.a0}]"


def _cf_rational(x: Fraction, depth: int) -> ContinuedFraction:
    a0 = math.floor(x)
    r = x - a0
    qs: list[int] = []
    while r != 0 and len(qs) < depth - 1:
        r = 1 / r
        a = math.floor(r)
        qs.append(a)
        r -= a
    return ContinuedFraction(a0, tuple(qs), terminated=(r == 0))


def _cf_surd(x: QuadraticSurd, depth: int) -> ContinuedFraction:
    a0 = math.floor(x)
    r = x - a0
    qs: list[int] = []
    seen: dict[tuple, int] = {}
    tail = None
    while len(qs) < depth - 1:
        r = 1 / r
        key = (r.a, r.b)
        idx = len(qs) + 1
        if tail is None and key in seen:
            start = seen[key]
            tail = PeriodicTail(start, tuple(qs[start - 1 :]))
        if tail is not None:
            qs.append(tail.block[(idx - tail.start) % len(tail.block)])
            continue
        seen[key] = idx
        a = math.floor(r)
        qs.append(a)
        r = r - a
    return ContinuedFraction(a0, tuple(qs), tail=tail)


def _cf_interval(center: Fraction, halfwidth: Fraction, depth: int) -> ContinuedFraction:
    lo, hi = center - halfwidth, center + halfwidth
    a0 = math.floor(lo)
    if math.floor(hi) != a0:
        raise PrecisionExhausted("a_0 is ambiguous at the working precision")
    lo, hi = lo - a0, hi - a0
    qs: list[int] = []
    while len(qs) < depth - 1:
        if lo <= 0:
            raise PrecisionExhausted(f"a_{len(qs) + 1} is ambiguous at the working precision")
        lo, hi = 1 / hi, 1 / lo
        a = math.floor(lo)
        if math.floor(hi) != a:
            raise PrecisionExhausted(f"a_{len(qs) + 1} is ambiguous at the working precision")
        qs.append(a)
        lo, hi = lo - a, hi - a
    return ContinuedFraction(a0, tuple(qs))


def cf_expand(x, depth: int, precision_bits: int = DEFAULT_PRECISION_BITS) -> ContinuedFraction:
    """First ``depth`` terms ``[a0; a1, ..., a_{depth-1}]`` of the expansion of ``x``.

    Rationals and quadratic surds expand exactly (rationals may terminate
    early; surds record their periodic tail). An mpf is trusted to a relative
    ``2**-precision_bits`` and a float to 53 bits; if that uncertainty makes a
    floor ambiguous, :class:`PrecisionExhausted` is raised.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if isinstance(x, QuadraticSurd):
        return _cf_surd(x, depth)
    if isinstance(x, (int, Fraction)):
        return _cf_rational(Fraction(x), depth)
    if isinstance(x, float):
        bits = 53
    elif isinstance(x, mpmath.mpf):
        bits = precision_bits
    else:
        raise TypeError(f"unsupported scalar type {type(x).__name__}")
    c = exact(x)
    if c == 0:
        return ContinuedFraction(0, (), terminated=True)
    return _cf_interval(c, abs(c) / 2**bits, depth)


def convergents_of(quotients: Iterable[int], a0: int = 0) -> list[tuple[int, int]]:
    return ContinuedFraction(a0, tuple(quotients)).convergents()
