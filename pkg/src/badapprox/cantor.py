"""Cantor construction for HAW sets and the resulting dimension lower bounds.

Start from the cube C_0 inscribed in Bob's first ball B(x, rho) (side
2 rho / sqrt(d)). Each cube of side s is cut into g^d subcubes of side
beta*s on a grid anchored at its lower corner, g = 1/beta - 1. Alice is
asked for her hyperplane L against the play whose balls are the
superscribing balls of the cube's ancestors, and a subcube is kept when its
distance to L is at least sqrt(d) times its side (= 2 beta^{k+1} rho). The
superscribing ball of a kept subcube then clears the beta*rho_k
neighbourhood of L, so every branch of the tree is a legal play for Bob.

Grid positions are integers: a level-k cube of C_0 = o + [0, s_0]^d has
corner o + s_0 a / B^k with B = 1/beta and a in Z^d, which keeps every
keep/remove decision in exact integer or rational arithmetic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .arith import QuadraticSurd, exact
from .errors import DegenerateInput
from .haw import (
    SCHEMA_VERSION,
    Ball,
    GameState,
    Hyperplane,
    _affine_hyperplane,
    rational_upper,
    simplex_denominator_bound,
)


def md_constant(d: int) -> float:
    """M_d = d * d! + (2 sqrt d)^{d-1} (2 sqrt d + 1)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    r = 2 * math.sqrt(d)
    return d * math.factorial(d) + r ** (d - 1) * (r + 1)


def _check_beta(d: int, beta) -> float:
    beta = float(beta)
    M = md_constant(d)
    if not 0 < beta < 1 / 3:
        raise ValueError("beta must lie in (0, 1/3)")
    if beta >= 1 / M:
        raise DegenerateInput(f"beta = {beta} >= 1/M_d = {1 / M}; the bound is vacuous")
    return beta


def codim_rate(d: int, beta) -> float:
    """log(1 - M_d beta) / log(beta), the bound on the codimension."""
    beta = _check_beta(d, beta)
    return math.log1p(-md_constant(d) * beta) / math.log(beta)


def lower_bound_dim(d: int, beta) -> float:
    """d - log(1 - M_d beta) / log(beta)."""
    return d - codim_rate(d, beta)


def child_count_bound(d: int, beta) -> int:
    """ceil(beta^{-d} - M_d beta^{-d+1}), or 0 when that is not positive."""
    b = exact(beta) if not isinstance(beta, float) else Fraction(repr(beta))
    inv = 1 / b
    val = inv**d - _md_exact(d) * inv ** (d - 1)
    return max(0, math.ceil(val))


def _md_exact(d: int):
    r = d * math.factorial(d)
    rd = _sqrt_exact(d)
    return r + (2 * rd) ** (d - 1) * (2 * rd + 1)


def _sqrt_exact(d: int):
    s = math.isqrt(d)
    return Fraction(s) if s * s == d else QuadraticSurd(0, 1, d)


def sharper_child_bound(d: int, beta) -> float:
    """(1/beta - 1)^d - (2 sqrt d + 1)(sqrt d / beta + 1)^{d-1}."""
    beta = float(beta)
    return (1 / beta - 1) ** d - (2 * math.sqrt(d) + 1) * (math.sqrt(d) / beta + 1) ** (d - 1)


# ---------------------------------------------------------------------------
# keep / remove decisions


def _integer_normal(n) -> tuple[int, ...]:
    den = math.lcm(*[Fraction(x).denominator for x in n])
    v = [int(Fraction(x) * den) for x in n]
    g = math.gcd(*v)
    return tuple(x // g for x in v)


def _keep_mask(n_int, C0: Fraction, V: np.ndarray, d: int) -> np.ndarray:
    """Subcubes kept for |C0 + V| >= ||n||_1 + 2 sqrt(d) |n|.

    ``V`` holds the integers sum_i n_i (2 a_i + 1) of the candidate subcubes
    and ``C0`` the scaled offset of the hyperplane, both in units of half the
    subcube side. Floats decide clear cases, Fractions the rest.
    """
    l1 = sum(abs(x) for x in n_int)
    n2 = sum(x * x for x in n_int)
    W = l1 + 2 * math.sqrt(d * n2)
    val = np.abs(float(C0) + V.astype(np.float64))
    tol = 1e-9 * (W + np.abs(float(C0)) + np.abs(V).max(initial=0) + 1)
    keep = val >= W + tol
    unsure = np.flatnonzero(np.abs(val - W) <= tol)
    for i in unsure:
        h = abs(C0 + int(V[i])) - l1
        keep[i] = h >= 0 and h * h >= 4 * d * n2
    return keep


def _digits_ok(a: np.ndarray, B: int, k: int) -> np.ndarray:
    """a < B^k with every base-B digit <= B - 2 (the anchored grid)."""
    ok = (a >= 0) & (a < B**k)
    x = a.copy()
    for _ in range(k):
        ok &= (x % B) != B - 1
        x //= B
    return ok


# ---------------------------------------------------------------------------
# explicit tree


@dataclass
class CantorTree:
    beta: Fraction
    d: int
    origin: tuple  # lower corner of C_0
    side0: Fraction
    rho0: object
    depth: int
    levels: list = field(default_factory=list)  # per level: int64 array (N, d) of corner indices
    parents: list = field(default_factory=list)  # per level: int64 array (N,) of parent row
    kept: list = field(default_factory=list)  # per level < depth: int64 array (N,) of kept counts

    def side(self, k: int) -> Fraction:
        return self.side0 * self.beta**k

    def centers(self, k: int) -> np.ndarray:
        o = np.array([float(x) for x in self.origin])
        return o + float(self.side(k)) * (self.levels[k] + 0.5)

    @property
    def min_kept(self) -> int:
        return int(min(c.min() for c in self.kept if len(c)))

    def to_dict(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "kind": "cantor",
            "beta": float(self.beta),
            "beta_exact": str(self.beta),
            "d": self.d,
            "depth": self.depth,
            "origin_exact": [str(x) for x in self.origin],
            "side0_exact": str(self.side0),
            "levels": [
                {
                    "level": k,
                    "nodes": int(len(self.levels[k])),
                    "kept": [int(x) for x in self.kept[k]] if k < len(self.kept) else [],
                }
                for k in range(len(self.levels))
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _grid_base(beta) -> int:
    beta = exact(beta) if not isinstance(beta, float) else Fraction(repr(beta))
    if beta.numerator != 1:
        raise ValueError("the anchored grid needs 1/beta to be an integer")
    return beta.denominator


def cantor_build(alice: Callable[[GameState], Hyperplane], beta, initial: Ball, depth: int) -> CantorTree:
    """Build the tree explicitly, querying ``alice`` once per internal node."""
    B = _grid_base(beta)
    beta = Fraction(1, B)
    d = initial.d
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if beta >= Fraction(1, 3):
        raise ValueError("beta must lie in (0, 1/3)")
    side0 = exact(2 * initial.radius / _sqrt_exact(d))
    if not isinstance(side0, Fraction):
        raise ValueError("the inscribed cube needs a rational side; use radius sqrt(d) * rational")
    origin = tuple(c - side0 / 2 for c in initial.center)
    g = B - 1
    tree = CantorTree(beta, d, origin, side0, initial.radius, depth)
    tree.levels.append(np.zeros((1, d), dtype=np.int64))
    tree.parents.append(np.full(1, -1, dtype=np.int64))
    offs = np.stack(np.meshgrid(*[np.arange(g, dtype=np.int64)] * d, indexing="ij"), axis=-1).reshape(-1, d)
    chains: list[list[Ball]] = [[initial]]
    for k in range(depth):
        nodes = tree.levels[k]
        kept_counts = np.zeros(len(nodes), dtype=np.int64)
        nxt, par, nxt_chains = [], [], []
        rho_next = initial.radius * beta ** (k + 1)
        scale = 2 * B ** (k + 1) / side0  # Fraction: units of half a child side
        for idx in range(len(nodes)):
            state = GameState(beta, list(chains[idx]), [])
            L = alice(state)
            n_int = _integer_normal(L.normal)
            C0 = sum((ni * (o - p) for ni, o, p in zip(n_int, origin, L.point)), Fraction(0)) * scale
            child = nodes[idx] * B + offs
            V = ((2 * child + 1) * np.array(n_int, dtype=np.int64)).sum(axis=1)
            keep = _keep_mask(n_int, C0, V, d)
            kept_counts[idx] = int(keep.sum())
            kids = child[keep]
            nxt.append(kids)
            par.append(np.full(len(kids), idx, dtype=np.int64))
            if k + 1 < depth:
                for a in kids:
                    c = tuple(o + side0 * (2 * int(ai) + 1) / (2 * B ** (k + 1)) for o, ai in zip(origin, a))
                    nxt_chains.append(chains[idx] + [Ball(c, rho_next)])
        tree.kept.append(kept_counts)
        tree.levels.append(np.concatenate(nxt) if nxt else np.zeros((0, d), dtype=np.int64))
        tree.parents.append(np.concatenate(par) if par else np.zeros(0, dtype=np.int64))
        chains = nxt_chains
    return tree


def unit_cube_ball(d: int) -> Ball:
    """The ball superscribing [0,1]^d: center (1/2,...,1/2), radius sqrt(d)/2."""
    return Ball((Fraction(1, 2),) * d, _sqrt_exact(d) / 2)


# ---------------------------------------------------------------------------
# census for the simplex strategy


@dataclass
class CensusLevel:
    level: int
    cells: int
    affected: int  # cells whose ball meets a small-denominator rational
    multi: int  # of those, cells with two or more such rationals
    min_kept: int
    qmax: int


@dataclass
class CantorCensus:
    beta: Fraction
    d: int
    depth: int
    levels: list

    @property
    def min_kept(self) -> int:
        return min(lv.min_kept for lv in self.levels)

    def to_dict(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "kind": "cantor-census",
            "beta": float(self.beta),
            "beta_exact": str(self.beta),
            "d": self.d,
            "depth": self.depth,
            "min_kept": self.min_kept,
            "levels": [vars(lv) for lv in self.levels],
        }


def _reduced_rationals(qmax: int, lo: Fraction, hi: Fraction, d: int):
    """(P, q) for all reduced points P/q in [lo, hi]^d with q <= qmax."""
    Ps, qs = [], []
    for q in range(1, qmax + 1):
        a = math.ceil(lo * q)
        b = math.floor(hi * q)
        if b < a:
            continue
        ax = np.arange(a, b + 1, dtype=np.int64)
        grid = np.stack(np.meshgrid(*[ax] * d, indexing="ij"), axis=-1).reshape(-1, d)
        g = np.gcd.reduce(np.concatenate([grid, np.full((len(grid), 1), q, dtype=np.int64)], axis=1), axis=1)
        grid = grid[g == 1]
        Ps.append(grid)
        qs.append(np.full(len(grid), q, dtype=np.int64))
    if not Ps:
        return np.zeros((0, d), dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(Ps), np.concatenate(qs)


def cantor_census(beta, d: int, depth: int, chunk: int = 50_000) -> CantorCensus:
    """Kept-child counts of the simplex strategy on every cell of the full grid.

    C_0 = [0,1]^d (Bob's first ball is :func:`unit_cube_ball`). At level k
    each of the (B-1)^{dk} grid cells, a superset of the tree's nodes, is
    examined: cells whose doubled ball holds no rational with denominator
    <= q_k keep all g^d children; a single such rational p/q yields the
    hyperplane x_d = p_d/q (the span completed by e_1, ..., e_{d-1});
    several rationals go through the general hyperplane construction.
    """
    B = _grid_base(beta)
    beta = Fraction(1, B)
    g = B - 1
    sq = _sqrt_exact(d)
    full = g**d
    levels = []
    for k in range(depth):
        r2 = sq * beta**k  # doubled radius 2 rho_k = sqrt(d) B^{-k}
        qmax = simplex_denominator_bound(r2, d)
        ncells = g ** (d * k)
        if qmax < 1:
            levels.append(CensusLevel(k, ncells, 0, 0, full, qmax))
            continue
        Bk = B**k
        reach = rational_upper(r2)
        P, Q = _reduced_rationals(qmax, -reach, 1 + reach, d)
        hit_keys, hit_rat = [], []
        span = math.isqrt(d - 1) + 2  # ceil(sqrt d) + 1
        offs1 = np.arange(-span, span + 1, dtype=np.int64)
        offs = np.stack(np.meshgrid(*[offs1] * d, indexing="ij"), axis=-1).reshape(-1, d)
        for lo in range(0, len(Q), chunk):
            Pc, Qc = P[lo : lo + chunk], Q[lo : lo + chunk]
            base = np.floor(Pc * float(Bk) / Qc[:, None] - 0.5).astype(np.int64)
            cand = base[:, None, :] + offs[None, :, :]  # (R, O, d)
            # exact ball test: sum((2a+1) q - 2 B^k p)^2 <= 4 d q^2
            diff = (2 * cand + 1) * Qc[:, None, None] - 2 * Bk * Pc[:, None, :]
            inside = (diff * diff).sum(axis=2) <= 4 * d * (Qc * Qc)[:, None]
            valid = inside & _digits_ok(cand, B, k).all(axis=2)
            ri, oi = np.nonzero(valid)
            cells = cand[ri, oi]
            key = np.zeros(len(cells), dtype=np.int64)
            for i in range(d):
                key = key * Bk + cells[:, i]
            hit_keys.append(key)
            hit_rat.append(ri + lo)
        keys = np.concatenate(hit_keys) if hit_keys else np.zeros(0, dtype=np.int64)
        rats = np.concatenate(hit_rat) if hit_rat else np.zeros(0, dtype=np.int64)
        order = np.lexsort((rats, keys))
        keys, rats = keys[order], rats[order]
        ukeys, start, counts = np.unique(keys, return_index=True, return_counts=True)
        min_kept = full if len(ukeys) < ncells else 10**18
        # single-rational cells: hyperplane x_d = p_d / q
        single = counts == 1
        sk = ukeys[single]
        sr = rats[start[single]]
        if len(sk):
            a_d = sk % Bk
            p_d = P[sr, d - 1]
            q = Q[sr]
            Bk1 = Bk * B
            jstar = np.floor((p_d * float(Bk1) / q - 0.5) - a_d * B).astype(np.int64)
            joffs = np.arange(-span, span + 1, dtype=np.int64)
            j = jstar[:, None] + joffs[None, :]
            inrange = (j >= 0) & (j < g)
            x = (2 * (a_d[:, None] * B + j) + 1) * q[:, None] - 2 * Bk1 * p_d[:, None]
            h = np.abs(x) - q[:, None]
            removed = inrange & ((h < 0) | (h * h < 4 * d * (q * q)[:, None]))
            kept = (g - removed.sum(axis=1)) * g ** (d - 1)
            min_kept = min(min_kept, int(kept.min()))
        # multi-rational cells: general hyperplane
        multi_idx = np.flatnonzero(counts > 1)
        child_offs = np.stack(np.meshgrid(*[np.arange(g, dtype=np.int64)] * d, indexing="ij"), axis=-1).reshape(-1, d)
        for ui in multi_idx:
            key = int(ukeys[ui])
            a = []
            for _ in range(d):
                a.append(key % Bk)
                key //= Bk
            a = np.array(a[::-1], dtype=np.int64)
            ids = rats[start[ui] : start[ui] + counts[ui]]
            pts = sorted({tuple(Fraction(int(p), int(qq)) for p in P[i]) for i, qq in zip(ids, Q[ids])})
            L = _affine_hyperplane(pts, d)
            n_int = _integer_normal(L.normal)
            C0 = -sum((ni * p for ni, p in zip(n_int, L.point)), Fraction(0)) * 2 * Bk * B
            child = a * B + child_offs
            V = ((2 * child + 1) * np.array(n_int, dtype=np.int64)).sum(axis=1)
            kept = int(_keep_mask(n_int, C0, V, d).sum())
            min_kept = min(min_kept, kept)
        levels.append(CensusLevel(k, ncells, int(len(ukeys)), int(len(multi_idx)), int(min_kept), qmax))
    return CantorCensus(beta, d, depth, levels)
