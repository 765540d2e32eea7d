"""Hyperplane absolute game on R^d: rules engine, strategies, transcripts.

A play starts with Bob's ball B_0. Alice then names a hyperplane L_1 and
Bob answers with B_1 inside B_0, of radius at least beta*rho(B_0), disjoint
from the beta*rho(B_0)-neighbourhood of L_1; and so on. Balls are Euclidean.
Centers, radii, hyperplane points and normals are exact rationals, so every
legality decision is exact; strategies that need irrational intermediate
values (unit normals) compute them in mpmath and round to rationals, and the
rounded move is then validated exactly.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence, Union

import mpmath

from .arith import exact, to_mpf
from .errors import NoLegalMove, SimplexViolation

Vec = tuple  # tuple of Fractions

SCHEMA_VERSION = "1"


def _vec(v) -> Vec:
    return tuple(exact(x) for x in v)


def _dot(a, b):
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def _sub(a, b) -> Vec:
    return tuple(x - y for x, y in zip(a, b))


def _norm2(a):
    return _dot(a, a)


@dataclass(frozen=True)
class Ball:
    center: Vec
    radius: Fraction

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        object.__setattr__(self, "radius", exact(self.radius))
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def d(self) -> int:
        return len(self.center)

    def contains_point(self, x) -> bool:
        return _norm2(_sub(_vec(x), self.center)) <= self.radius**2


@dataclass(frozen=True)
class Hyperplane:
    """{y : normal . (y - point) = 0}; the normal need not be unit length."""

    point: Vec
    normal: Vec

    def __post_init__(self):
        object.__setattr__(self, "point", _vec(self.point))
        object.__setattr__(self, "normal", _vec(self.normal))
        if len(self.point) != len(self.normal):
            raise ValueError("point and normal dimensions differ")
        if not any(self.normal):
            raise ValueError("normal must be nonzero")

    @property
    def unit_normal(self) -> tuple[float, ...]:
        s = math.sqrt(float(_norm2(self.normal)))
        return tuple(float(x) / s for x in self.normal)

    def signed_offset(self, x):
        """normal . (x - point); the distance is |offset| / |normal|."""
        return _dot(self.normal, _sub(_vec(x), self.point))

    def distance(self, x) -> float:
        return float(abs(self.signed_offset(x))) / math.sqrt(float(_norm2(self.normal)))

    def contains_point(self, x) -> bool:
        return self.signed_offset(x) == 0


@dataclass
class GameState:
    beta: Fraction
    balls: list = field(default_factory=list)
    hyperplanes: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.beta = exact(self.beta)

    @property
    def whose_turn(self) -> str:
        return "alice" if len(self.hyperplanes) < len(self.balls) else "bob"

    @property
    def d(self) -> int:
        return self.balls[0].d

    @property
    def rounds(self) -> int:
        return len(self.balls) - 1

    @property
    def last_ball(self) -> Ball:
        return self.balls[-1]

    def limit_point(self) -> tuple[Vec, Fraction]:
        """Estimate of the nested intersection: last center, error bar = radius."""
        b = self.balls[-1]
        return b.center, b.radius

    # serialization ---------------------------------------------------------
    def to_dict(self) -> dict:
        rounds = []
        for i, b in enumerate(self.balls):
            rec = {
                "center": [float(x) for x in b.center],
                "center_exact": [str(x) for x in b.center],
                "radius": float(b.radius),
                "radius_exact": str(b.radius),
            }
            if i > 0:
                h = self.hyperplanes[i - 1]
                rec["hyperplane"] = {
                    "point_exact": [str(x) for x in h.point],
                    "normal": list(h.unit_normal),
                    "normal_exact": [str(x) for x in h.normal],
                }
            rounds.append(rec)
        return {
            "version": SCHEMA_VERSION,
            "kind": "game",
            "beta": float(self.beta),
            "beta_exact": str(self.beta),
            "d": self.d,
            "rounds": rounds,
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, doc: dict) -> "GameState":
        st = cls(Fraction(doc["beta_exact"]), meta=dict(doc.get("meta", {})))
        for rec in doc["rounds"]:
            if "hyperplane" in rec:
                h = rec["hyperplane"]
                st.hyperplanes.append(
                    Hyperplane([Fraction(s) for s in h["point_exact"]], [Fraction(s) for s in h["normal_exact"]])
                )
            st.balls.append(Ball([Fraction(s) for s in rec["center_exact"]], Fraction(rec["radius_exact"])))
        return st


# ---------------------------------------------------------------------------
# rules


@dataclass(frozen=True)
class Legal:
    def __bool__(self):
        return True


@dataclass(frozen=True)
class Illegal:
    reason: str  # "containment" | "radius" | "neighborhood"

    def __bool__(self):
        return False


def _check_move(prev: Ball, L: Hyperplane, beta, cand: Ball) -> Union[Legal, Illegal]:
    if cand.radius < beta * prev.radius:
        return Illegal("radius")
    slack = prev.radius - cand.radius
    if slack < 0 or _norm2(_sub(cand.center, prev.center)) > slack * slack:
        return Illegal("containment")
    reach = cand.radius + beta * prev.radius
    off = L.signed_offset(cand.center)
    if off * off <= reach * reach * _norm2(L.normal):
        return Illegal("neighborhood")
    return Legal()


def legal_move(state: GameState, candidate: Ball) -> Union[Legal, Illegal]:
    """Is ``candidate`` a legal answer to the pending hyperplane?

    Containment is closed, the neighbourhood of L is closed, so the new ball
    must keep a strictly positive gap from it.
    """
    if state.whose_turn != "bob" or not state.hyperplanes:
        raise ValueError("no hyperplane is pending")
    return _check_move(state.balls[-1], state.hyperplanes[-1], state.beta, candidate)


def validate_transcript(state: GameState) -> list[str]:
    """Independent post-hoc audit; returns the list of violations (empty if valid).

    Works in 256-bit mpmath on the recorded values rather than reusing the
    exact rules engine.
    """
    problems = []
    beta = state.beta
    if not 0 < beta < Fraction(1, 3):
        problems.append("beta outside (0, 1/3)")
    if len(state.hyperplanes) not in (len(state.balls) - 1, len(state.balls)):
        problems.append("turn order broken")
    with mpmath.workprec(256):
        mp = _mp
        tol = mpmath.mpf(2) ** -200
        b_ = mp(beta)
        for i in range(1, len(state.balls)):
            B0, B1, L = state.balls[i - 1], state.balls[i], state.hyperplanes[i - 1]
            r0, r1 = mp(B0.radius), mp(B1.radius)
            dist_c = mpmath.sqrt(mpmath.fsum((mp(a) - mp(b)) ** 2 for a, b in zip(B1.center, B0.center)))
            if r1 < b_ * r0 * (1 - tol):
                problems.append(f"round {i}: radius ratio")
            if dist_c + r1 > r0 * (1 + tol):
                problems.append(f"round {i}: not nested")
            nn = mpmath.sqrt(mpmath.fsum(mp(x) ** 2 for x in L.normal))
            off = abs(mpmath.fsum(mp(nv) * (mp(c) - mp(p)) for nv, c, p in zip(L.normal, B1.center, L.point)))
            if off / nn < (r1 + b_ * r0) * (1 - tol):
                problems.append(f"round {i}: meets hyperplane neighbourhood")
    return problems


# ---------------------------------------------------------------------------
# exact lattice tools for the simplex strategy


def _lll_mp(B: list[list], U: list[list[int]], delta=0.75):
    """LLL on mpf vectors ``B[j]`` with the integer moves mirrored in ``U[j]``.

    Only the transform matters: callers recompute the reduced basis exactly
    from ``U``, so rounding here can cost reduction quality, never soundness.
    """
    d = len(B)

    def gs():
        Bs, nrm = [], []
        for j in range(d):
            v = list(B[j])
            for i in range(j):
                mu = mpmath.fdot(B[j], Bs[i]) / nrm[i]
                v = [a - mu * b for a, b in zip(v, Bs[i])]
            Bs.append(v)
            nrm.append(mpmath.fdot(v, v))
        return Bs, nrm

    Bs, nrm = gs()
    k = 1
    guard = 0
    while k < d and guard < 10000:
        guard += 1
        for j in range(k - 1, -1, -1):
            mu = mpmath.fdot(B[k], Bs[j]) / nrm[j]
            if abs(mu) > 0.5:
                r = int(mpmath.nint(mu))
                B[k] = [a - r * b for a, b in zip(B[k], B[j])]
                U[k] = [a - r * b for a, b in zip(U[k], U[j])]
        Bs, nrm = gs()
        mu = mpmath.fdot(B[k], Bs[k - 1]) / nrm[k - 1]
        if nrm[k] < (delta - mu * mu) * nrm[k - 1]:
            B[k], B[k - 1] = B[k - 1], B[k]
            U[k], U[k - 1] = U[k - 1], U[k]
            Bs, nrm = gs()
            k = max(k - 1, 1)
        else:
            k += 1


def _solve_exact(M: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    n = len(M)
    A = [list(r) + [b] for r, b in zip(M, rhs)]
    for c in range(n):
        piv = next(r for r in range(c, n) if A[r][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        pv = A[c][c]
        A[c] = [v / pv for v in A[c]]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return [A[r][n] for r in range(n)]


def simplex_denominator_bound(r, m: int) -> int:
    """Largest integer q with q^{m+1} (2 m! r)^m <= 1, i.e. q <= (2m!)^{-m/(m+1)} r^{-m/(m+1)}."""
    K = (2 * math.factorial(m) * exact(r)) ** m
    if K > 1:
        return 0
    with mpmath.workprec(128):
        est = int(mpmath.floor(mpmath.power(to_mpf(K, 128), mpmath.mpf(-1) / (m + 1))))
    q = max(est - 2, 0)
    while (q + 1) ** (m + 1) * K <= 1:
        q += 1
    while q > 0 and q ** (m + 1) * K > 1:
        q -= 1
    return q


def rational_upper(x) -> Fraction:
    """A rational >= x (x itself when already rational)."""
    x = exact(x)
    if isinstance(x, Fraction):
        return x
    f = Fraction(float(x)) * (1 + Fraction(1, 2**40))
    while f < x:
        f *= 1 + Fraction(1, 2**20)
    return f


def rationals_in_ball(x: Sequence, r, qmax: int) -> list[Vec]:
    """All points p/q (q <= qmax) in the closed Euclidean ball B(x, r), exact.

    Solutions are integer vectors v = (p, q) with |q x_i - p_i| <= r q and
    0 < q <= qmax; after scaling the coordinates by (r qmax, ..., qmax) they
    are lattice points in the unit cube, found by exact LLL plus a certified
    coefficient box.
    """
    x = _vec(x)
    r = exact(r)
    r2 = r * r
    m = len(x)
    if qmax < 1:
        return []
    # a rational radius >= r for the search box; the final filter uses r^2
    s_top = rational_upper(r) * qmax
    d = m + 1
    # basis vectors in scaled coordinates: p_i -> -e_i/s_top, q -> (x/s_top, 1/qmax)
    B = []
    for i in range(m):
        v = [Fraction(0)] * d
        v[i] = Fraction(-1) / s_top
        B.append(v)
    B.append([xi / s_top for xi in x] + [Fraction(1, qmax)])
    U = [[int(i == j) for j in range(d)] for i in range(d)]
    span = max(abs(a) for v in B for a in v if a != 0) / min(abs(a) for v in B for a in v if a != 0)
    prec = 128 + 2 * max(1, span.numerator.bit_length() - span.denominator.bit_length())
    with mpmath.workprec(prec):
        Bm = [[_mp(a) for a in v] for v in B]
        _lll_mp(Bm, U)
    # exact reduced basis and certified bounds: y = M^{-1} w with |w|_inf <= 1
    R = [[sum((U[j][k] * B[k][i] for k in range(d)), Fraction(0)) for i in range(d)] for j in range(d)]
    MT = [[R[rw][c] for c in range(d)] for rw in range(d)]
    bounds = []
    for i in range(d):
        z = _solve_exact(MT, [Fraction(int(k == i)) for k in range(d)])
        bounds.append(math.floor(sum(abs(t) for t in z)))
    found = {}
    for y in itertools.product(*[range(-b, b + 1) for b in bounds]):
        v = [sum(y[j] * U[j][k] for j in range(d)) for k in range(d)]
        q = v[m]
        if q <= 0 or q > qmax:
            continue
        pt = tuple(Fraction(v[i], q) for i in range(m))
        if _norm2(_sub(pt, x)) <= r2:
            found[pt] = None
    return sorted(found)


def _affine_hyperplane(points: list[Vec], m: int) -> Hyperplane:
    base = points[0]
    dirs: list[list[Fraction]] = []

    def add_if_independent(v) -> bool:
        # row-reduce v against current echelon rows
        w = list(v)
        for row, piv in echelon:
            if w[piv] != 0:
                f = w[piv] / row[piv]
                w = [a - f * b for a, b in zip(w, row)]
        nz = next((i for i, a in enumerate(w) if a != 0), None)
        if nz is None:
            return False
        echelon.append((w, nz))
        dirs.append(list(v))
        return True

    echelon: list = []
    for p in points[1:]:
        add_if_independent(_sub(p, base))
    if len(dirs) > m - 1:
        raise SimplexViolation(f"{len(points)} small-denominator rationals span {len(dirs)} dimensions")
    for i in range(m):
        if len(dirs) == m - 1:
            break
        add_if_independent([Fraction(int(k == i)) for k in range(m)])
    # normal: kernel of the (m-1) x m direction matrix
    normal = _kernel_vector(dirs, m)
    return Hyperplane(base, normal)


def _kernel_vector(rows: list[list[Fraction]], m: int) -> Vec:
    if not rows:
        return (Fraction(1),) + (Fraction(0),) * (m - 1)
    A = [list(r) for r in rows]
    pivots = []
    rI = 0
    for c in range(m):
        piv = next((r for r in range(rI, len(A)) if A[r][c] != 0), None)
        if piv is None:
            continue
        A[rI], A[piv] = A[piv], A[rI]
        pv = A[rI][c]
        A[rI] = [v / pv for v in A[rI]]
        for r in range(len(A)):
            if r != rI and A[r][c] != 0:
                f = A[r][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[rI])]
        pivots.append(c)
        rI += 1
    free = next(c for c in range(m) if c not in pivots)
    v = [Fraction(0)] * m
    v[free] = Fraction(1)
    for r, c in enumerate(pivots):
        v[c] = -A[r][free]
    # primitive integer normal with positive first nonzero entry
    den = math.lcm(*[a.denominator for a in v])
    iv = [int(a * den) for a in v]
    g = math.gcd(*iv)
    iv = [a // g for a in iv]
    if next(a for a in iv if a != 0) < 0:
        iv = [-a for a in iv]
    return tuple(Fraction(a) for a in iv)


def fallback_hyperplane(ball: Ball) -> Hyperplane:
    """Hyperplane x_1 = center_1 + 3 rho, at distance 3 rho from the center."""
    d = ball.d
    pt = (ball.center[0] + rational_upper(3 * ball.radius),) + ball.center[1:]
    return Hyperplane(pt, (Fraction(1),) + (Fraction(0),) * (d - 1))


def alice_simplex_strategy(state: GameState, m: int | None = None) -> Hyperplane:
    """Hyperplane through all rationals p/q in B(x_k, 2 rho_k) with
    q <= (2m!)^{-m/(m+1)} (2 rho_k)^{-m/(m+1)}; fallback when there are none.
    """
    ball = state.last_ball
    if m is None:
        m = ball.d
    if ball.d != m:
        raise ValueError("the simplex strategy plays on R^m")
    r2 = 2 * ball.radius
    qmax = simplex_denominator_bound(r2, m)
    pts = rationals_in_ball(ball.center, r2, qmax)
    if not pts:
        return fallback_hyperplane(ball)
    return _affine_hyperplane(pts, m)


def alice_fallback(state: GameState) -> Hyperplane:
    return fallback_hyperplane(state.last_ball)


# ---------------------------------------------------------------------------
# Bob


def _mp(x) -> mpmath.mpf:
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return to_mpf(x, mpmath.mp.prec)


def _rationalize(v, resolution: Fraction) -> Fraction:
    """Round an mpf to a dyadic rational, error far below ``resolution``."""
    bits = 64 + max(0, -math.frexp(float(resolution))[1])
    return Fraction(int(mpmath.nint(v * mpmath.mpf(2) ** bits)), 1 << bits)


def _away_from(prev: Ball, L: Hyperplane, beta, center: Vec, radius: Fraction) -> Vec:
    """Translate ``center`` along the normal of L until clear of its neighbourhood."""
    rho = prev.radius
    margin = min(beta * rho, (1 - 3 * beta) * rho) / 2
    need = radius + beta * rho + margin
    with mpmath.workprec(256):
        nn = mpmath.sqrt(_mp(_norm2(L.normal)))
        off = L.signed_offset(center)
        dist = _mp(off) / nn
        if abs(dist) >= _mp(need):
            return center
        sgn = 1 if off >= 0 else -1
        shift = sgn * _mp(need) - dist
        return tuple(c + _rationalize(shift * _mp(nv) / nn, margin) for c, nv in zip(center, L.normal))


def bob_shrink(state: GameState) -> Ball:
    """Shrink the ball by beta about its center, then step minimally away from L."""
    prev, L, beta = state.last_ball, state.hyperplanes[-1], state.beta
    radius = beta * prev.radius
    c = _away_from(prev, L, beta, prev.center, radius)
    return Ball(c, radius)


def bob_random(seed: int, tries: int = 200) -> Callable[[GameState], Ball]:
    """Seeded Bob: random radius in [beta rho, rho/2] and random center, rejection-sampled."""
    rng = random.Random(seed)

    def play(state: GameState) -> Ball:
        prev, beta = state.last_ball, state.beta
        d = prev.d
        for _ in range(tries):
            u = Fraction(rng.randrange(1 << 20), 1 << 20)
            radius = beta * prev.radius + u * (prev.radius / 2 - beta * prev.radius)
            slack = prev.radius - radius
            g = [rng.gauss(0.0, 1.0) for _ in range(d)]
            gn = math.sqrt(sum(v * v for v in g)) or 1.0
            t = rng.random() ** (1.0 / d)
            off = tuple(Fraction(t * v / gn).limit_denominator(1 << 30) * slack * Fraction(99, 100) for v in g)
            cand = Ball(tuple(c + o for c, o in zip(prev.center, off)), radius)
            if legal_move(state, cand):
                return cand
        return bob_shrink(state)

    return play


def bob_steer(target: Sequence) -> Callable[[GameState], Ball]:
    """Adversarial Bob: move as far as allowed toward ``target`` every round."""
    tgt = _vec(target)

    def play(state: GameState) -> Ball:
        prev, L, beta = state.last_ball, state.hyperplanes[-1], state.beta
        radius = beta * prev.radius
        slack = (prev.radius - radius) * Fraction(999, 1000)
        diff = _sub(tgt, prev.center)
        dn2 = _norm2(diff)
        if dn2 <= slack * slack:
            c = tgt
        else:
            with mpmath.workprec(256):
                s = _mp(slack) / mpmath.sqrt(_mp(dn2))
                c = tuple(pc + _rationalize(s * _mp(v), slack) for pc, v in zip(prev.center, diff))
        cand = Ball(c, radius)
        if legal_move(state, cand):
            return cand
        c2 = _away_from(prev, L, beta, c, radius)
        cand = Ball(c2, radius)
        if legal_move(state, cand):
            return cand
        return bob_shrink(state)

    return play


# ---------------------------------------------------------------------------


def play(alice, bob, beta, initial: Ball, rounds: int, validate: bool = True) -> GameState:
    """Alternate ``rounds`` turns of Alice (hyperplanes) and Bob (balls)."""
    beta = exact(beta)
    if not 0 < beta < Fraction(1, 3):
        raise ValueError("beta must lie in (0, 1/3)")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    state = GameState(beta, [initial], [])
    m = initial.d
    state.meta["rho0"] = str(initial.radius)
    # with rho0 > 1/(4 m!) every q >= 1 is eventually handled by the strategy
    state.meta["all_denominators_covered"] = bool(4 * math.factorial(m) * initial.radius > 1)
    for k in range(rounds):
        L = alice(state)
        state.hyperplanes.append(L)
        B = bob(state)
        verdict = legal_move(state, B)
        if not verdict:
            raise NoLegalMove(f"round {k + 1}: Bob's ball is illegal ({verdict.reason})")
        state.balls.append(B)
    if validate:
        probs = validate_transcript(state)
        if probs:
            raise NoLegalMove("; ".join(probs))
    return state


def _decimal(x) -> Fraction:
    # floats are read through their shortest repr, so 0.1 means 1/10
    return Fraction(repr(x)) if isinstance(x, float) else exact(x)


def badd_param_check(c, beta, m: int) -> bool:
    """c^{1/m} <= beta^2 / (4 m!)."""
    c, beta = _decimal(c), _decimal(beta)
    if not (c > 0 and beta > 0):
        raise ValueError("c and beta must be positive")
    return c <= (beta * beta / (4 * math.factorial(m))) ** m


def badd_constant(beta, m: int) -> Fraction:
    """(beta^2 / 4m!)^m, the approximation constant guaranteed by the game."""
    beta = _decimal(beta)
    return (beta * beta / (4 * math.factorial(m))) ** m
