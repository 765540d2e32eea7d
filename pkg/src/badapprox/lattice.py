"""Unimodular lattices in R^{m+n}, the diagonal flow g_t and cusp detection.

Conventions: u_A = (I_m, A; 0, I_n) and g_t = diag(e^{t/m} I_m, e^{-t/n} I_n).
Bases are float64 with columns as basis vectors. A coefficient vector
x = (x_top, x_bot) of u_A Z^{m+n} gives the lattice vector
(x_top + A x_bot, x_bot), so x = (-p, q) is the vector (Aq - p, q).

Orbit scans do not push one float basis forward in time, because the short
vectors of g_t u_A Z^{m+n} have tiny top coordinates A q - p that cancel
catastrophically. :class:`FlowedLattice` instead tracks an integer change of
basis U and recomputes the top block A U_bot + U_top exactly whenever U
changes.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

import mpmath
import numpy as np

from . import _kernels as K
from .arith import exact, to_mpf
from .diophantine import MatrixSystem
from .errors import DegenerateInput, SearchBoundTooSmall

DEFAULT_SEARCH_BOUND = 64
DEFAULT_B = 0.1
DET_TOL = 1e-9
# largest exponent that keeps e^x finite in float64
_MAX_EXP = 700.0


@dataclass(frozen=True)
class LatticeBasis:
    columns: np.ndarray
    m: int
    n: int

    def __post_init__(self):
        cols = np.array(self.columns, dtype=np.float64)
        d = self.m + self.n
        if cols.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} basis, got {cols.shape}")
        if not np.all(np.isfinite(cols)):
            raise DegenerateInput("basis has non-finite entries")
        det = np.linalg.det(cols)
        hadamard = float(np.prod(np.linalg.norm(cols, axis=0)))
        if abs(abs(det) - 1.0) > DET_TOL * d * max(1.0, hadamard):
            raise ValueError(f"basis is not unimodular (det = {det})")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)

    @property
    def d(self) -> int:
        return self.m + self.n

    @classmethod
    def identity(cls, m: int, n: int) -> "LatticeBasis":
        return cls(np.eye(m + n), m, n)


def make_uA(A: MatrixSystem) -> LatticeBasis:
    m, n = A.m, A.n
    M = np.eye(m + n)
    M[:m, m:] = A.as_float()
    return LatticeBasis(M, m, n)


def _gt_factors(t: float, m: int, n: int) -> tuple[float, float]:
    if not math.isfinite(t):
        raise DegenerateInput("t must be finite")
    if abs(t) / min(m, n) > _MAX_EXP:
        raise DegenerateInput(f"e^(t/m) overflows float64 at t = {t}")
    return math.exp(t / m), math.exp(-t / n)


def apply_gt(basis: LatticeBasis, t: float) -> LatticeBasis:
    a, b = _gt_factors(t, basis.m, basis.n)
    cols = basis.columns.copy()
    cols[: basis.m] *= a
    cols[basis.m :] *= b
    return LatticeBasis(cols, basis.m, basis.n)


def conjugate_translation(deltaA: MatrixSystem, t: float) -> MatrixSystem:
    """deltaA * e^{(m+n)t/(mn)}, so that g_t u_X g_{-t} = u_{X e^{(m+n)t/(mn)}}."""
    m, n = deltaA.m, deltaA.n
    expo = (m + n) * t / (m * n)
    if not math.isfinite(expo) or abs(expo) > _MAX_EXP:
        raise DegenerateInput("conjugation factor overflows")
    if expo == 0:
        return deltaA
    f = mpmath.exp(mpmath.mpf(expo))
    return MatrixSystem(tuple(tuple(to_mpf(x) * f for x in r) for r in deltaA.entries))


def injectivity_radius_bound(delta, b=DEFAULT_B, m: int = 1, n: int = 1) -> float:
    if not (delta > 0 and b > 0):
        raise ValueError("delta and b must be positive")
    return float(b) * float(delta) ** (m + n)


def shortest_vector(basis: LatticeBasis, search_bound: int = DEFAULT_SEARCH_BOUND):
    """Certified minimal sup-norm over nonzero lattice vectors.

    Returns ``(value, coefficients)`` with coefficients relative to
    ``basis.columns``, sign-normalized (first nonzero entry positive).
    """
    val, x, needed = K.reduce_and_svp(np.ascontiguousarray(basis.columns), int(search_bound))
    if val < 0:
        raise SearchBoundTooSmall(int(needed), int(search_bound))
    return float(val), tuple(int(v) for v in x)


def in_cusp(basis: LatticeBasis, eps, search_bound: int = DEFAULT_SEARCH_BOUND) -> bool:
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    val, _ = shortest_vector(basis, search_bound)
    return val < float(eps) * (1 - 2.0**-64)


# ---------------------------------------------------------------------------
# orbit scanning



class FlowedLattice:
    """g_t u_A Z^{m+n} for exact A, evaluated at arbitrary times.

    Holds an integer basis change U (warm start for the next time) and the
    top block A U_bot + U_top, each entry rounded once from exact arithmetic.
    """

    def __init__(self, A: MatrixSystem, search_bound: int = DEFAULT_SEARCH_BOUND):
        self.A = A
        self.m, self.n = A.m, A.n
        self.d = A.m + A.n
        self.rows = A.exact_rows()
        self.search_bound = int(search_bound)
        self.U = np.eye(self.d, dtype=np.int64)
        self._refresh()

    def _refresh(self):
        m, d = self.m, self.d
        U = self.U
        res = np.empty((m, d))
        for i in range(m):
            for j in range(d):
                res[i, j] = self._top_entry(i, j)
        self.res = res
        self.ub = U[m:].astype(np.float64)

    def _top_entry(self, i: int, j: int) -> float:
        U, m = self.U, self.m
        terms = [(self.rows[i][k], int(U[m + k, j])) for k in range(self.n) if U[m + k, j]]
        try:
            v = Fraction(int(U[i, j]))
            for a, u in terms:
                v = v + a * u
            return float(v)
        except TypeError:
            # surds from different quadratic fields in one row
            with mpmath.workprec(512):
                v = mpmath.mpf(int(U[i, j])) + mpmath.fsum(to_mpf(a, 512) * u for a, u in terms)
                return float(v)

    def scan(self, times: np.ndarray):
        """Shortest-vector lengths and witnesses at each time in ``times``."""
        times = np.ascontiguousarray(times, dtype=np.float64)
        N = len(times)
        if N and np.abs(times).max() / min(self.m, self.n) > _MAX_EXP:
            raise DegenerateInput("flow time overflows float64")
        deltas = np.empty(N)
        wits = np.zeros((N, self.d), dtype=np.int64)
        i = 0
        force = -1
        while i < N:
            i, code, needed, T = K.flow_scan(
                self.res, self.ub, self.U, self.m, self.n, times, i, N,
                self.search_bound, force, deltas, wits,
            )
            if code == 0:
                break
            if code == 2:
                raise SearchBoundTooSmall(int(needed), self.search_bound)
            force = i
            self.U = self.U @ T
            self._refresh()
        return deltas, wits

    def basis_at(self, t: float) -> LatticeBasis:
        a, b = _gt_factors(t, self.m, self.n)
        B = np.vstack([self.res * a, self.ub * b])
        Uinv = np.round(np.linalg.inv(self.U.astype(np.float64))).astype(np.int64)
        return LatticeBasis(B @ Uinv, self.m, self.n)


@dataclass
class OrbitProfile:
    times: np.ndarray
    deltas: np.ndarray
    witnesses: np.ndarray
    m: int
    n: int
    dt: float
    lipschitz: float = field(init=False)

    def __post_init__(self):
        self.lipschitz = max(1.0 / self.m, 1.0 / self.n)

    @property
    def margin(self) -> float:
        """Factor e^{-L dt} bounding how far delta can drop between samples."""
        return math.exp(-self.lipschitz * self.dt)

    def certified_lower(self) -> float:
        """Lower bound for delta over the whole scanned interval."""
        return float(self.deltas.min()) * self.margin

    def __len__(self):
        return len(self.times)

    def to_csv(self, fh=None) -> str:
        out = io.StringIO() if fh is None else fh
        out.write("t,delta,witness\n")
        for t, dl, w in zip(self.times, self.deltas, self.witnesses):
            out.write(f"{t:.10g},{float(dl)!r},{' '.join(str(int(x)) for x in w)}\n")
        return out.getvalue() if fh is None else ""


def _grid(t_max: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_max >= dt:
        raise ValueError("t_max must be >= dt")
    r = t_max / dt
    N = int(round(r)) if abs(r - round(r)) < 1e-9 * max(1.0, r) else int(math.floor(r))
    return np.arange(N + 1) * dt


def orbit_min_profile(
    A: MatrixSystem, t_max: float, dt: float = 1e-3, search_bound: int = DEFAULT_SEARCH_BOUND
) -> OrbitProfile:
    times = _grid(t_max, dt)
    fl = FlowedLattice(A, search_bound)
    deltas, wits = fl.scan(times)
    return OrbitProfile(times, deltas, wits, A.m, A.n, dt)


@dataclass(frozen=True)
class AvoidsCuspUpTo:
    t_max: float
    boundary: bool = False  # some window could not be resolved at the finest step
    min_delta: float = math.inf

    def __str__(self):
        flag = ", boundary" if self.boundary else ""
        return f"AvoidsCuspUpTo({self.t_max:g}{flag})"


@dataclass(frozen=True)
class EntersCuspAt:
    t: float
    delta: float
    witness: tuple[int, ...]

    def __str__(self):
        return f"EntersCuspAt({self.t:.6g})"


DaniVerdict = Union[AvoidsCuspUpTo, EntersCuspAt]


def dani_epsilon(c, m: int, n: int) -> float:
    return float(mpmath.power(to_mpf(exact(c)), mpmath.mpf(1) / (m + n)))


def dani_check(
    A: MatrixSystem,
    c,
    t_max: float,
    dt: float = 1e-3,
    search_bound: int = DEFAULT_SEARCH_BOUND,
    min_step: float = 1e-7,
    chunk: int = 2048,
) -> DaniVerdict:
    """Does the orbit g_t u_A Z^{m+n}, 0 <= t <= t_max, enter U_eps, eps = c^{1/(m+n)}?

    Window [t_i, t_i + dt] is cleared when delta(t_i) e^{-L dt} >= eps with
    L = max(1/m, 1/n); other windows are resampled ten times finer until
    they clear, enter, or reach ``min_step``.
    """
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    m, n = A.m, A.n
    eps = dani_epsilon(c, m, n)
    thr = eps * (1 - 2.0**-64)
    L = max(1.0 / m, 1.0 / n)
    times = _grid(t_max, dt)
    if times[-1] < t_max:
        times = np.append(times, t_max)
    fl = FlowedLattice(A, search_bound)
    boundary = False
    dmin = math.inf

    def refine(t0: float, d0: float, t1: float, depth_dt: float):
        # returns (entry or None, unresolved flag)
        h = (t1 - t0) / 10
        sub = t0 + h * np.arange(1, 10)
        dl, wt = fl.scan(sub)
        ts = np.concatenate([[t0], sub])
        ds = np.concatenate([[d0], dl])
        unresolved = False
        for j in range(10):
            if j > 0 and ds[j] < thr:
                return EntersCuspAt(float(ts[j]), float(ds[j]), tuple(int(v) for v in wt[j - 1])), False
            if ds[j] * math.exp(-L * h) >= eps:
                continue
            if h <= min_step:
                unresolved = True
                continue
            hit, un = refine(float(ts[j]), float(ds[j]), float(ts[j] + h), h)
            if hit is not None:
                return hit, False
            unresolved |= un
        return None, unresolved

    for lo in range(0, len(times), chunk):
        ts = times[lo : lo + chunk]
        ds, ws = fl.scan(ts)
        for j in range(len(ts)):
            if ds[j] < thr:
                return EntersCuspAt(float(ts[j]), float(ds[j]), tuple(int(v) for v in ws[j]))
            dmin = min(dmin, float(ds[j]))
            gi = lo + j
            if gi + 1 >= len(times):
                break
            step = float(times[gi + 1] - times[gi])
            if ds[j] * math.exp(-L * step) >= eps:
                continue
            hit, un = refine(float(ts[j]), float(ds[j]), float(times[gi + 1]), step)
            if hit is not None:
                return hit
            boundary |= un
    return AvoidsCuspUpTo(float(t_max), boundary, dmin)
