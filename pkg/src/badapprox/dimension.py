"""Dimension estimators: box counting, E_k cylinder sums, and the covering bound.

The covering estimator follows the renormalization scheme for Bad_{m,n}(c)
near a base matrix A0: a cube of matrices of side r is cut into N = f^{mn}
subcubes, f = floor(e^{(m+n)t/(mn)}), and a subcube with center A1 is
discarded when g_t u_{A1} Lambda has a nonzero vector of sup-norm < delta.
Survivors carry the renormalized lattice g_t u_{A1} Lambda, so every level
repeats the same computation at unit scale. Conjugation
g_t u_X g_{-t} = u_{X kappa}, kappa = e^{(m+n)t/(mn)}, turns a child offset
Delta at level k into u_{Delta kappa^k} acting on the parent's lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, stats
from scipy.special import logsumexp

from . import _kernels as K
from .diophantine import MatrixSystem, hensley_dim
from .errors import DegenerateInput, SearchBoundTooSmall
from .lattice import DEFAULT_B, DEFAULT_SEARCH_BOUND, make_uA


@dataclass
class DimensionEstimate:
    value: float
    method: str  # box-count | covering-upper | cantor-lower | formula | cylinder
    params: dict = field(default_factory=dict)
    stderr: float = 0.0

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method, "params": self.params, "stderr": self.stderr}


# ---------------------------------------------------------------------------
# box counting


def _region(region) -> np.ndarray:
    R = np.asarray(region, dtype=np.float64)
    if R.ndim == 1:
        R = R[None, :]
    if R.shape[1] != 2 or np.any(R[:, 1] <= R[:, 0]):
        raise ValueError("region must be a sequence of (lo, hi) pairs with lo < hi")
    return R


def box_count_dim(
    oracle: Callable,
    region,
    scales: Sequence[float],
    samples_per_cell: int = 4,
    seed: int = 0,
    max_cells: int = 1 << 22,
) -> DimensionEstimate:
    """Slope of log N(s) against log(1/s), N(s) = occupied grid cells of side s.

    ``oracle(points)`` maps an (N, d) array to booleans. If it also has
    ``at_scale(points, s)`` (membership in a scale-s cover of the set), that
    is used instead, which makes measure-zero sets visible to sampling.
    Each cell gets ``samples_per_cell`` stratified uniform samples.
    """
    R = _region(region)
    scales = [float(s) for s in scales]
    if len(scales) < 2 or any(b >= a for a, b in zip(scales, scales[1:])) or scales[-1] <= 0:
        raise ValueError("scales must be positive, strictly decreasing, at least two")
    d = len(R)
    rng = np.random.default_rng(seed)
    test = getattr(oracle, "at_scale", None)
    counts = []
    for s in scales:
        n_ax = np.ceil((R[:, 1] - R[:, 0]) / s - 1e-9).astype(np.int64)
        total = int(np.prod(n_ax))
        if total > max_cells:
            raise ValueError(f"{total} cells at scale {s} exceeds max_cells")
        occupied = np.zeros(total, dtype=bool)
        idx = np.stack(np.unravel_index(np.arange(total), tuple(n_ax)), axis=1)
        for _ in range(samples_per_cell):
            pts = R[:, 0] + (idx + rng.random((total, d))) * s
            pts = np.minimum(pts, R[:, 1])
            hit = test(pts, s) if test is not None else oracle(pts)
            occupied |= np.asarray(hit, dtype=bool)
        counts.append(int(occupied.sum()))
    counts_arr = np.array(counts)
    if np.all(counts_arr == 0):
        raise DegenerateInput("the oracle is negative everywhere at every scale")
    if np.all(counts_arr <= 1):
        raise DegenerateInput("at most one occupied cell at every scale; no scaling information")
    ok = counts_arr > 0
    x = np.log(1 / np.array(scales))[ok]
    y = np.log(counts_arr[ok])
    fit = stats.linregress(x, y)
    return DimensionEstimate(
        float(min(max(fit.slope, 0.0), d)),
        "box-count",
        {"scales": scales, "counts": counts, "samples_per_cell": samples_per_cell, "seed": seed, "raw_slope": float(fit.slope)},
        float(fit.stderr),
    )


def _cf_cylinder_ok(x: np.ndarray, k: int, scale: float | None, depth: int) -> np.ndarray:
    """Vectorized: digits a_1, a_2, ... of x in (0,1) stay <= k until the
    cylinder length 1/(q_j (q_j + q_{j-1})) drops below ``scale`` (or ``depth`` digits)."""
    x = np.array(x, dtype=np.float64).ravel() % 1.0
    ok = np.ones(len(x), dtype=bool)
    active = np.ones(len(x), dtype=bool)
    q = np.ones(len(x))
    qp = np.zeros(len(x))
    for _ in range(depth):
        active &= x > 0
        if not active.any():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(active, 1.0 / np.where(active, x, 1.0), 0.0)
        a = np.floor(inv)
        bad = active & (a > k)
        ok &= ~bad
        active &= ~bad
        q, qp = np.where(active, a * q + qp, q), np.where(active, q, qp)
        x = np.where(active, inv - a, x)
        if scale is not None:
            active &= 1.0 / (q * (q + qp)) >= scale
    return ok


class EkOracle:
    """Membership oracle for E_k on (0,1) (partial quotients all <= k)."""

    def __init__(self, k: int, depth: int = 30):
        self.k = k
        self.depth = depth

    def __call__(self, points) -> np.ndarray:
        # digits past float resolution are noise, so stop at cylinders of length 2^-48
        return _cf_cylinder_ok(np.asarray(points)[..., 0], self.k, 2.0**-48, self.depth)

    def at_scale(self, points, scale: float) -> np.ndarray:
        """Is the CF cylinder of diameter ~scale around each point one that meets E_k?"""
        return _cf_cylinder_ok(np.asarray(points)[..., 0], self.k, scale, self.depth)


# ---------------------------------------------------------------------------
# E_k via cylinder sums

_WORD_BUDGET = 2_000_000


def _cylinder_logs(k: int, depth: int) -> list[np.ndarray]:
    """log lengths of all depth-j cylinders [a_1..a_j], a_i <= k, for j = 1..depth."""
    out = []
    q = np.ones(1)
    qp = np.zeros(1)
    digits = np.arange(1, k + 1, dtype=np.float64)
    for _ in range(depth):
        qn = (digits[None, :] * q[:, None] + qp[:, None]).ravel()
        qp = np.repeat(q, k)
        q = qn
        out.append(-np.log(q) - np.log(q + qp))
    return out


def ek_cylinder_dim(k: int, max_depth: int = 12, word_budget: int = _WORD_BUDGET) -> DimensionEstimate:
    """Dimension of E_k from the ratio of cylinder sums.

    s_j solves Z_j(s) = Z_{j-1}(s), Z_j(s) = sum over depth-j cylinders of
    |I|^s; the reported value is s_J at the deepest affordable J and the
    stderr is |s_J - s_{J-1}|.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return DimensionEstimate(0.0, "cylinder", {"k": 1, "depth": 0, "note": "E_1 is a single point"}, 0.0)
    J = max(2, min(max_depth, int(math.log(word_budget) / math.log(k))))
    logs = _cylinder_logs(k, J)

    def root(j):
        a, b = logs[j - 2], logs[j - 1]
        f = lambda s: logsumexp(s * b) - logsumexp(s * a)  # noqa: E731
        return optimize.brentq(f, 1e-9, 1.0, xtol=1e-14)

    sJ = root(J)
    sJ1 = root(J - 1) if J > 2 else sJ
    params = {"k": k, "depth": J, "max_depth": max_depth, "word_budget": word_budget, "previous": sJ1}
    if k >= 2:
        params["hensley"] = hensley_dim(k)
    return DimensionEstimate(float(sJ), "cylinder", params, float(abs(sJ - sJ1)))


# ---------------------------------------------------------------------------
# covering upper bound


def choose_t(eps, m: int, n: int, lambda_prime, Epp, Dp) -> float:
    """(1/lambda') (log(2E''/D') + (m+n)(mn+1) log(1/eps))."""
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    if not (lambda_prime > 0 and Epp > 0 and Dp > 0):
        raise ValueError("lambda', E'', D' must be positive")
    return (math.log(2 * Epp / Dp) + (m + n) * (m * n + 1) * math.log(1 / eps)) / lambda_prime


@dataclass
class CoverState:
    level: int
    centers: np.ndarray  # (K, m, n) offsets from A0 in original coordinates
    lattices: np.ndarray  # (K, d, d) renormalized lattice bases
    params: dict


def covering_params(m: int, n: int, c: float, t: float, b: float = DEFAULT_B) -> dict:
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    eps = c ** (1.0 / (m + n))
    delta = eps / 2
    r = b * delta ** (m + n)
    if r >= 0.5:
        raise DegenerateInput(f"r = b delta^(m+n) = {r} >= 1/2")
    if t <= m * n:
        raise DegenerateInput(f"t = {t} must exceed mn = {m * n}")
    kappa = math.exp((m + n) * t / (m * n))
    # guard against e^{2 ln 10} = 99.999... style rounding
    f = int(math.floor(kappa * (1 + 1e-12)))
    return {
        "m": m, "n": n, "c": c, "eps": eps, "delta": delta, "r": r, "t": t, "b": b,
        "kappa": kappa, "f": f, "N": f ** (m * n),
    }


def _apply_u_batch(X: np.ndarray, L: np.ndarray, m: int) -> np.ndarray:
    """u_X L for a batch: top rows += X @ bottom rows."""
    out = L.copy()
    out[:, :m, :] += np.einsum("kij,kjl->kil", X, L[:, m:, :])
    return out


def covering_upper_bound(
    m: int,
    n: int,
    c: float,
    t: float,
    depth: int,
    A0: MatrixSystem | None = None,
    b: float = DEFAULT_B,
    search_bound: int = DEFAULT_SEARCH_BOUND,
    return_states: bool = False,
):
    """Survivor-count upper estimate for dim(Bad_{m,n}(c)) near A0.

    The value is mn log(N f) / log N with f the geometric mean of the
    level-wise survivor fractions, i.e. log S_J / (J log floor(kappa)) for
    S_J survivors at depth J (0 if nothing survives). The reading with the
    largest single-level fraction, per-level counts and the kill
    certificates go in ``params``.
    """
    P = covering_params(m, n, c, t, b)
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if A0 is None:
        A0 = MatrixSystem.zeros(m, n)
    if (A0.m, A0.n) != (m, n):
        raise ValueError("A0 has the wrong shape")
    d = m + n
    mn = m * n
    f, kappa, r, delta = P["f"], P["kappa"], P["r"], P["delta"]
    if 1 + 2 * r > 2:
        raise DegenerateInput("margin 1 + 2r <= 2 fails")
    a_top, a_bot = math.exp(t / m), math.exp(-t / n)
    gt = np.concatenate([np.full(m, a_top), np.full(n, a_bot)])
    # per-axis child offsets inside a unit cube centred at 0
    unit = (np.arange(f) + 0.5) / f - 0.5
    grids = np.stack(np.meshgrid(*[unit] * mn, indexing="ij"), axis=-1).reshape(-1, m, n)
    corners = np.stack(np.meshgrid(*[np.array([-0.5, 0.5])] * mn, indexing="ij"), axis=-1).reshape(-1, m, n)

    base = make_uA(A0)
    L0 = np.ascontiguousarray(base.columns[None, :, :])
    state = CoverState(0, np.zeros((1, m, n)), L0, P)
    states = [state]
    levels = [{"level": 0, "total": 1, "survivors": 1}]
    ratios = []
    kills = 0
    worst_cert = 0.0
    for k in range(depth):
        side = r / f**k  # side of the current cubes
        scale = kappa**k
        Kp = len(state.centers)
        if Kp == 0:
            levels.append({"level": k + 1, "total": 0, "survivors": 0})
            ratios.append(0.0)
            continue
        offs = grids * side  # (N, m, n) original-coordinate offsets
        X = np.broadcast_to(offs[None] * scale, (Kp,) + offs.shape).reshape(-1, m, n)
        parents = np.repeat(np.arange(Kp), len(offs))
        Ls = _apply_u_batch(X, state.lattices[parents], m)
        Ls *= gt[None, :, None]
        vals, coefs, needed = K.svp_batch(np.ascontiguousarray(Ls), int(search_bound))
        if np.any(vals < 0):
            raise SearchBoundTooSmall(int(needed.max()), int(search_bound))
        dead = vals < delta
        # certificate: the killing vector stays below 2 delta over the whole child cube
        if dead.any():
            vecs = np.einsum("kij,kj->ki", Ls[dead], coefs[dead].astype(np.float64))
            half = (side / f) * kappa ** (k + 1)
            Xc = corners * half  # (C, m, n)
            top = vecs[:, None, :m] + np.einsum("cij,kj->kci", Xc, vecs[:, m:])
            norm = np.maximum(np.abs(top).max(axis=2), np.abs(vecs[:, None, m:]).max(axis=2))
            worst_cert = max(worst_cert, float(norm.max() / (2 * delta)))
            kills += int(dead.sum())
        alive = ~dead
        new_centers = (state.centers[parents] + np.broadcast_to(offs[None], (Kp,) + offs.shape).reshape(-1, m, n))[alive]
        new_lat = np.ascontiguousarray(Ls[alive])
        for i in range(len(new_lat)):
            T = np.eye(d, dtype=np.int64)
            K.lll_inplace(new_lat[i], T, K.LLL_DELTA)
        state = CoverState(k + 1, new_centers, new_lat, P)
        if return_states:
            states.append(state)
        total = Kp * len(offs)
        levels.append({"level": k + 1, "total": int(total), "survivors": int(alive.sum())})
        ratios.append(float(alive.sum()) / total)
    N = P["N"]
    fmax = max(ratios)
    S = levels[-1]["survivors"]
    per_level = 0.0 if fmax == 0 else min(float(mn), mn * math.log(N * fmax) / math.log(N))
    value = 0.0 if S == 0 else min(float(mn), math.log(S) / (depth * math.log(f)))
    fbar = (S / N**depth) ** (1.0 / depth) if S else 0.0
    params = dict(P)
    params.update(
        {
            "depth": depth,
            "A0": str(A0),
            "levels": levels,
            "ratios": ratios,
            "survivor_fraction": fbar,
            "max_level_value": per_level,
            "kappa_form": (mn * (1 + math.log(fbar) / ((m + n) * t))) if fbar > 0 else 0.0,
            "kills": kills,
            "worst_kill_certificate": worst_cert,  # max ||g_t u_A' v|| / (2 delta), must be <= 1
            "search_bound": search_bound,
        }
    )
    est = DimensionEstimate(value, "covering-upper", params, 0.0)
    if return_states:
        return est, states
    return est


def levels_csv(est: DimensionEstimate) -> str:
    rows = ["level,total,survivors"]
    for lv in est.params["levels"]:
        rows.append(f"{lv['level']},{lv['total']},{lv['survivors']}")
    return "\n".join(rows) + "\n"
