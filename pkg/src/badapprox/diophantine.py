"""Approximation quality of linear forms, truncated Bad-membership and bound formulas.

For an m x n matrix A and a nonzero q in Z^n the approximation quality is

    ||q||^n * min_p ||A q - p||^m          (sup norms)

and A lies in Bad_{m,n}(c) when every quality is at least c. Searches here
are truncated at ||q|| <= Q, so membership verdicts are one-sided.

Search strategy: integer vectors are screened in float64 blocks with a
rigorous error margin, and only the survivors of the screen are evaluated
in exact arithmetic. Winners and violations are always decided exactly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence, Union

import mpmath
import numpy as np

from .arith import (
    DEFAULT_PRECISION_BITS,
    ETA,
    PHI,
    QuadraticSurd,
    cf_expand,
    exact,
    nearest_int,
    to_mpf,
)
from .errors import DegenerateInput

_EVAL_PREC = 256
# number of integer vectors screened per vectorized block
_BLOCK = 1 << 18


# ---------------------------------------------------------------------------
# matrices


def _parse_scalar(tok: str):
    tok = tok.strip()
    low = tok.lower()
    if low in ("phi", "golden"):
        return PHI
    if low in ("e", "pi"):
        # 128-bit values; exact() later reads them as dyadic rationals
        with mpmath.workprec(DEFAULT_PRECISION_BITS):
            return +(mpmath.e if low == "e" else mpmath.pi)
    m = re.fullmatch(r"(-?)sqrt\(?(\d+)\)?", low)
    if m:
        d = int(m.group(2))
        r = math.isqrt(d)
        val = Fraction(r) if r * r == d else QuadraticSurd(0, 1, d)
        return -val if m.group(1) else val
    # a + b*sqrt(d), the form QuadraticSurd prints
    m = re.fullmatch(r"(?:([-+]?[\d./]+)\s*(?=[-+]))?([-+])?\s*(?:([\d./]+)\s*\*\s*)?sqrt\(?(\d+)\)?", low)
    if m:
        try:
            a = Fraction(m.group(1) or 0)
            b = Fraction(m.group(3) or 1)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"cannot parse matrix entry {tok!r}") from exc
        if m.group(2) == "-":
            b = -b
        return a + b * _parse_scalar(f"sqrt{m.group(4)}")
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"cannot parse matrix entry {tok!r}") from exc


@dataclass(frozen=True)
class MatrixSystem:
    """The m x n matrix A whose rows are the m linear forms in n variables.

    Entries may be ints, Fractions, QuadraticSurds, floats or mpfs.
    """

    entries: tuple[tuple, ...]

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.entries)
        if not rows or not rows[0]:
            raise ValueError("matrix must be at least 1x1")
        if any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("ragged matrix")
        for r in rows:
            for x in r:
                if isinstance(x, float) and not math.isfinite(x):
                    raise ValueError("matrix entries must be finite")
                if isinstance(x, mpmath.mpf) and not mpmath.isfinite(x):
                    raise ValueError("matrix entries must be finite")
        object.__setattr__(self, "entries", rows)

    @property
    def m(self) -> int:
        return len(self.entries)

    @property
    def n(self) -> int:
        return len(self.entries[0])

    @classmethod
    def from_rows(cls, rows) -> "MatrixSystem":
        if isinstance(rows, np.ndarray):
            rows = rows.tolist()
        return cls(tuple(tuple(r) for r in rows))

    @classmethod
    def scalar(cls, x) -> "MatrixSystem":
        return cls(((x,),))

    @classmethod
    def zeros(cls, m: int, n: int) -> "MatrixSystem":
        return cls(tuple(tuple(Fraction(0) for _ in range(n)) for _ in range(m)))

    @classmethod
    def parse(cls, text: str) -> "MatrixSystem":
        """Parse ``"phi"``, ``"1/2, sqrt2; 0.25, e"`` style literals.

        Rows are separated by ``;`` and entries by ``,``. Decimals and p/q
        are read as exact rationals.
        """
        rows = [r for r in text.split(";")]
        if not text.strip() or any(not r.strip() for r in rows):
            raise ValueError(f"empty matrix literal {text!r}")
        return cls(tuple(tuple(_parse_scalar(t) for t in r.split(",")) for r in rows))

    def as_float(self) -> np.ndarray:
        return np.array([[float(x) for x in r] for r in self.entries], dtype=np.float64)

    def exact_rows(self) -> tuple[tuple, ...]:
        return tuple(tuple(exact(x) for x in r) for r in self.entries)

    def __sub__(self, other: "MatrixSystem") -> "MatrixSystem":
        return MatrixSystem(
            tuple(tuple(a - b for a, b in zip(r, s)) for r, s in zip(self.entries, other.entries))
        )

    def __add__(self, other: "MatrixSystem") -> "MatrixSystem":
        return MatrixSystem(
            tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(self.entries, other.entries))
        )

    def scaled(self, s) -> "MatrixSystem":
        return MatrixSystem(tuple(tuple(a * s for a in r) for r in self.entries))

    def __str__(self):
        return "; ".join(", ".join(str(x) for x in r) for r in self.entries)


# ---------------------------------------------------------------------------
# qualities


@dataclass(frozen=True)
class ApproximationWitness:
    q: tuple[int, ...]
    p: tuple[int, ...]
    quality: object  # exact scalar, or mpf when exact comparison is impossible

    def __float__(self):
        return float(self.quality)


def _max_abs(vals: list):
    try:
        return max(abs(v) for v in vals)
    except TypeError:
        # surds over different fields; compare numerically instead
        return max(abs(to_mpf(v, _EVAL_PREC)) for v in vals)


def _exact_quality(rows, q: Sequence[int]) -> tuple[tuple[int, ...], object]:
    n = len(q)
    m = len(rows)
    qn = max(abs(x) for x in q)
    try:
        forms = [sum((a * qj for a, qj in zip(r, q)), Fraction(0)) for r in rows]
    except TypeError:
        # surds from different quadratic fields in one row: evaluate in mpmath
        with mpmath.workprec(_EVAL_PREC):
            forms = [mpmath.fsum(to_mpf(a, _EVAL_PREC) * qj for a, qj in zip(r, q)) for r in rows]
            p = tuple(int(-mpmath.floor(mpmath.mpf(0.5) - v)) for v in forms)
            dist = max(abs(v - pi) for v, pi in zip(forms, p))
            return p, mpmath.mpf(qn) ** n * dist**m
    p = tuple(nearest_int(v) for v in forms)
    dist = _max_abs([v - pi for v, pi in zip(forms, p)])
    return p, Fraction(qn) ** n * dist**m


def approx_quality(A: MatrixSystem, q: Sequence[int], prec: int | None = None) -> ApproximationWitness:
    """``||q||^n * ||A q - p||^m`` with p the nearest integer vector to A q.

    Exact unless ``prec`` is given, in which case the whole evaluation runs
    in mpmath at ``prec`` bits (used as a cross-check).
    """
    q = tuple(int(x) for x in q)
    if len(q) != A.n:
        raise ValueError(f"q must have {A.n} coordinates")
    if not any(q):
        raise ValueError("q must be nonzero")
    if prec is None:
        p, quality = _exact_quality(A.exact_rows(), q)
        return ApproximationWitness(q, p, quality)
    with mpmath.workprec(prec):
        forms = [mpmath.fsum(to_mpf(a, prec) * qj for a, qj in zip(r, q)) for r in A.entries]
        p = tuple(int(-mpmath.floor(mpmath.mpf(0.5) - v)) for v in forms)
        dist = max(abs(v - pi) for v, pi in zip(forms, p))
        qn = max(abs(x) for x in q)
        return ApproximationWitness(q, p, mpmath.mpf(qn) ** A.n * dist**A.m)


# ---------------------------------------------------------------------------
# canonical enumeration of q: increasing sup-norm shells, lexicographic inside
# a shell, one representative of each +-q pair (first nonzero coordinate > 0)


def _shell(s: int, n: int) -> np.ndarray:
    """All canonical q with ||q|| = s, lexicographically sorted."""
    parts = []
    for j in range(n):
        axes = []
        for i in range(n):
            if i < j:
                axes.append(np.arange(-s + 1, s, dtype=np.int64))
            elif i == j:
                axes.append(np.array([-s, s], dtype=np.int64))
            else:
                axes.append(np.arange(-s, s + 1, dtype=np.int64))
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        parts.append(grid)
    pts = np.concatenate(parts)
    nz = pts != 0
    first = np.argmax(nz, axis=1)
    keep = pts[np.arange(len(pts)), first] > 0
    pts = pts[keep]
    order = np.lexsort(pts.T[::-1])
    return pts[order]


def _canonical_blocks(n: int, Q: int) -> Iterator[np.ndarray]:
    if n == 1:
        for lo in range(1, Q + 1, _BLOCK):
            yield np.arange(lo, min(Q, lo + _BLOCK - 1) + 1, dtype=np.int64)[:, None]
        return
    buf: list[np.ndarray] = []
    size = 0
    for s in range(1, Q + 1):
        sh = _shell(s, n)
        buf.append(sh)
        size += len(sh)
        if size >= _BLOCK:
            yield np.concatenate(buf)
            buf, size = [], 0
    if buf:
        yield np.concatenate(buf)


def _screen(Af: np.ndarray, qs: np.ndarray, m: int, n: int):
    """Float64 qualities with rigorous lower/upper bounds."""
    qf = qs.astype(np.float64)
    forms = qf @ Af.T
    p = np.ceil(forms - 0.5)
    dist = np.abs(forms - p).max(axis=1)
    # |fl(A) q - A q| plus rounding of the products and sums
    scale = np.abs(qf) @ np.abs(Af).T
    err = (2.0**-49) * (scale.max(axis=1) + 1.0)
    qn = np.abs(qf).max(axis=1) ** n
    lo = qn * np.maximum(dist - err, 0.0) ** m
    hi = qn * (dist + err) ** m
    return lo * (1 - 1e-12), hi * (1 + 1e-12)


def _less(a, b) -> bool:
    try:
        return a < b
    except TypeError:
        return to_mpf(a, _EVAL_PREC) < to_mpf(b, _EVAL_PREC)


def approx_constant_truncated(A: MatrixSystem, Q: int) -> tuple[object, ApproximationWitness]:
    """Minimum quality over 0 < ||q|| <= Q and the first q attaining it.

    This is an upper bound for the approximation constant of A.
    """
    if Q < 1:
        raise ValueError("Q must be >= 1")
    rows = A.exact_rows()
    Af = A.as_float()
    best: ApproximationWitness | None = None
    best_hi = math.inf
    for qs in _canonical_blocks(A.n, Q):
        lo, hi = _screen(Af, qs, A.m, A.n)
        bound = min(best_hi, float(hi.min()))
        for idx in np.flatnonzero(lo <= bound):
            q = tuple(int(x) for x in qs[idx])
            p, quality = _exact_quality(rows, q)
            if best is None or _less(quality, best.quality):
                best = ApproximationWitness(q, p, quality)
                best_hi = min(best_hi, float(hi[idx]))
        if best is not None and best.quality == 0:
            break
    assert best is not None
    return best.quality, best


@dataclass(frozen=True)
class ConsistentUpTo:
    Q: int

    def __str__(self):
        return f"ConsistentUpTo({self.Q})"


@dataclass(frozen=True)
class ViolatedBy:
    witness: ApproximationWitness

    def __str__(self):
        return f"ViolatedBy(q={self.witness.q})"


BadVerdict = Union[ConsistentUpTo, ViolatedBy]


def is_bad_truncated(A: MatrixSystem, c, Q: int) -> BadVerdict:
    """First q (in enumeration order) with quality < c(1 - eta), if any."""
    c_ex = exact(c)
    if not 0 < c_ex < 1:
        raise ValueError("c must lie in (0, 1)")
    if Q < 1:
        raise ValueError("Q must be >= 1")
    thresh = c_ex * (1 - ETA)
    thresh_f = float(thresh) * (1 + 1e-12)
    rows = A.exact_rows()
    Af = A.as_float()
    for qs in _canonical_blocks(A.n, Q):
        lo, _ = _screen(Af, qs, A.m, A.n)
        for idx in np.flatnonzero(lo < thresh_f):
            q = tuple(int(x) for x in qs[idx])
            p, quality = _exact_quality(rows, q)
            if _less(quality, thresh):
                return ViolatedBy(ApproximationWitness(q, p, quality))
    return ConsistentUpTo(Q)


# ---------------------------------------------------------------------------
# E_k and the sandwich Bad(1/k) in E_k in Bad(1/(k+2))


@dataclass(frozen=True)
class InUpToDepth:
    depth: int


@dataclass(frozen=True)
class ExcludedAt:
    index: int


def ek_contains(x, k: int, depth: int, precision_bits: int = 128) -> Union[InUpToDepth, ExcludedAt]:
    """Check a_1..a_depth <= k. A terminating expansion counts as a_{N+1} = infinity."""
    if depth < 1 or k < 1:
        raise ValueError("k and depth must be >= 1")
    cf = cf_expand(x, depth + 1, precision_bits)
    for i, a in enumerate(cf.partial_quotients, start=1):
        if a > k:
            return ExcludedAt(i)
    if cf.terminated and len(cf.partial_quotients) < depth:
        return ExcludedAt(len(cf.partial_quotients) + 1)
    return InUpToDepth(depth)


@dataclass(frozen=True)
class SandwichReport:
    consistent: bool
    membership: Union[InUpToDepth, ExcludedAt]
    verdict_upper: BadVerdict  # at c = 1/(k+2)
    verdict_lower: BadVerdict | None  # at c = 1/k, only evaluated when excluded
    reason: str = ""


def sandwich_check(x, k: int, depth: int, Q: int, precision_bits: int = 128) -> SandwichReport:
    """Cross-check E_k membership against truncated Bad(1/k) and Bad(1/(k+2)).

    Contradictions: x passes the E_k test yet violates 1/(k+2), or a_i > k
    (which forces q_{i-1} to violate 1/k) while q_{i-1} <= Q and no
    violation of 1/k is found.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    A = MatrixSystem.scalar(x)
    mem = ek_contains(x, k, depth, precision_bits)
    upper = is_bad_truncated(A, Fraction(1, k + 2), Q)
    if isinstance(mem, InUpToDepth):
        if isinstance(upper, ViolatedBy):
            return SandwichReport(False, mem, upper, None, "in E_k but violates Bad(1/(k+2))")
        return SandwichReport(True, mem, upper, None)
    cf = cf_expand(x, mem.index, precision_bits)
    q_prev = cf.convergents()[mem.index - 1][1]
    if k == 1:
        # Bad(1) is empty: every x violates c = 1 at q = 1; nothing to compare
        return SandwichReport(True, mem, upper, None)
    lower = is_bad_truncated(A, Fraction(1, k), Q)
    if q_prev <= Q and isinstance(lower, ConsistentUpTo):
        return SandwichReport(False, mem, upper, lower, f"a_{mem.index} > k but q_{mem.index - 1} passes 1/k")
    return SandwichReport(True, mem, upper, lower)


# ---------------------------------------------------------------------------
# closed-form bounds


def hensley_dim(k: int) -> float:
    """Leading terms ``1 - 6/(pi^2 k) - 72 log k/(pi^4 k^2)`` of dim E_k.

    The O(1/k^2) remainder has no explicit constant and is dropped.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    pi2 = math.pi**2
    return 1.0 - 6.0 / (pi2 * k) - 72.0 * math.log(k) / (pi2 * pi2 * k * k)


def p_exponent(m: int, n: int) -> Fraction:
    if m < 1 or n < 1:
        raise ValueError("m, n must be >= 1")
    if n == 1:
        return Fraction(2 * m)
    if m == 1:
        return Fraction(2 * n * n)
    s = m + n
    return (m * s + n * s**3) * max(Fraction(4 * n + 1, m), Fraction(4 * m + 1, n))


@dataclass(frozen=True)
class BoundCurveParams:
    k1: float
    k2: float
    p_exponent: float

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0 and self.p_exponent > 0):
            raise ValueError("k1, k2, p_exponent must be strictly positive")


def bound_curves(m: int, n: int, c, params: BoundCurveParams) -> tuple[float, float]:
    """Two-sided dimension bounds ``mn - k1 c^{1/p}/log(1/c)`` and ``mn - k2 c/log(1/c)``.

    Both are clamped to ``[0, mn]``.
    """
    c = float(c)
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    L = -math.log(c)
    if L < float(ETA):
        raise DegenerateInput("log(1/c) is below tolerance; bounds are undefined")
    mn = m * n
    lower = mn - params.k1 * c ** (1.0 / float(params.p_exponent)) / L
    upper = mn - params.k2 * c / L
    clamp = lambda v: min(max(v, 0.0), float(mn))  # noqa: E731
    return clamp(lower), clamp(upper)


def transference_exponent(m: int, n: int) -> Fraction:
    if m < 1 or n < 1:
        raise ValueError("m, n must be >= 1")
    return Fraction(1, m + n - 1)
