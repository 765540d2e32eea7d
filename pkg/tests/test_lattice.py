import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from badapprox.arith import PHI
from badapprox.diophantine import MatrixSystem, ViolatedBy, is_bad_truncated
from badapprox.errors import DegenerateInput, SearchBoundTooSmall
from badapprox.lattice import (
    AvoidsCuspUpTo,
    EntersCuspAt,
    FlowedLattice,
    LatticeBasis,
    apply_gt,
    conjugate_translation,
    dani_check,
    dani_epsilon,
    in_cusp,
    injectivity_radius_bound,
    make_uA,
    orbit_min_profile,
    shortest_vector,
)


def brute_sv(B, box):
    d = B.shape[0]
    best = math.inf
    for x in itertools.product(range(-box, box + 1), repeat=d):
        if any(x):
            best = min(best, float(np.abs(B @ np.array(x, dtype=float)).max()))
    return best


def random_unimodular(rng, d, steps=6):
    U = np.eye(d, dtype=np.int64)
    for _ in range(steps):
        i, j = rng.choice(d, 2, replace=False)
        U[:, i] += int(rng.integers(-2, 3)) * U[:, j]
    return U


def test_golden_anchor():
    B = apply_gt(make_uA(MatrixSystem.parse("phi")), math.log(3))
    val, x = shortest_vector(B)
    assert abs(val - 0.7082039324993694) < 1e-12
    assert x == (3, -2)
    assert abs(val - brute_sv(B.columns, 50)) < 1e-12


@given(st.integers(0, 10_000), st.sampled_from([2, 3]), st.floats(-3, 3))
def test_shortest_vector_matches_brute_force(seed, d, t):
    rng = np.random.default_rng(seed)
    m = 1 if d == 2 else int(rng.integers(1, 3))
    A = MatrixSystem.from_rows(rng.random((m, d - m)).round(6))
    base = apply_gt(make_uA(A), t)
    U = random_unimodular(rng, d)
    B = LatticeBasis(base.columns @ U, m, d - m)
    val, x = shortest_vector(B)
    box = 25 if d == 2 else 8
    ref = brute_sv(base.columns, box)
    assert abs(val - ref) <= 1e-9 * max(1, ref)
    assert abs(np.abs(B.columns @ np.array(x, float)).max() - val) <= 1e-9 * max(1, val)


def test_gt_group_law_and_unimodularity():
    B = make_uA(MatrixSystem.parse("1/3, 2/7"))
    a = apply_gt(apply_gt(B, 1.3), 0.4).columns
    b = apply_gt(B, 1.7).columns
    assert np.allclose(a, b, rtol=1e-13)
    assert abs(np.linalg.det(b) - 1) < 1e-12
    with pytest.raises(DegenerateInput):
        apply_gt(B, 5000.0)


def test_non_unimodular_rejected():
    with pytest.raises(ValueError):
        LatticeBasis(np.diag([2.0, 1.0]), 1, 1)


@given(st.floats(-0.5, 0.5), st.floats(0, 4))
def test_conjugation_identity(x, t):
    X = MatrixSystem.scalar(x)
    lhs = apply_gt(make_uA(X), t).columns
    Y = conjugate_translation(X, t)
    rhs = make_uA(MatrixSystem.scalar(float(Y.entries[0][0]))).columns @ apply_gt(LatticeBasis.identity(1, 1), t).columns
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_conjugation_identity_2x1():
    X = MatrixSystem.parse("0.1; -0.2")
    t = 0.7
    lhs = apply_gt(make_uA(X), t).columns
    Y = conjugate_translation(X, t)
    rhs = make_uA(MatrixSystem.from_rows(np.array(Y.entries, dtype=float))).columns @ apply_gt(
        LatticeBasis.identity(2, 1), t
    ).columns
    assert np.allclose(lhs, rhs, rtol=1e-12)
    assert abs(float(Y.entries[0][0]) - 0.1 * math.exp(3 * t / 2)) < 1e-12


def test_in_cusp_and_search_bound():
    B = apply_gt(make_uA(MatrixSystem.parse("1/2")), 3.0)
    assert in_cusp(B, 0.5)
    assert not in_cusp(LatticeBasis.identity(1, 1), 0.5)
    with pytest.raises(SearchBoundTooSmall) as err:
        shortest_vector(LatticeBasis.identity(2, 1), search_bound=0)
    assert err.value.needed == 1 and "increase search_bound" in str(err.value)
    assert injectivity_radius_bound(0.5) == pytest.approx(0.025)


@given(st.integers(0, 10_000))
def test_flowed_lattice_matches_direct(seed):
    rng = np.random.default_rng(seed)
    m, n = [(1, 1), (2, 1), (1, 2)][seed % 3]
    A = MatrixSystem.from_rows([[Fraction(int(v), 997) for v in r] for r in rng.integers(1, 997, (m, n))])
    times = np.sort(rng.uniform(0, 6, 5))
    deltas, wits = FlowedLattice(A).scan(times)
    for t, dl in zip(times, deltas):
        ref, _ = shortest_vector(apply_gt(make_uA(A), float(t)))
        assert abs(dl - ref) <= 1e-9 * max(1.0, ref)


def test_flowed_witness_is_integer_vector():
    A = MatrixSystem.parse("phi")
    fl = FlowedLattice(A)
    d, w = fl.scan(np.array([0.0, 2.0, 5.0, 9.0]))
    for t, dl, x in zip([0.0, 2.0, 5.0, 9.0], d, w):
        # x = (x_top, x_bot) gives the vector (x_top + phi x_bot, x_bot)
        top = x[0] + float(PHI) * x[1]
        v = max(abs(top) * math.exp(t), abs(x[1]) * math.exp(-t))
        assert abs(v - dl) < 1e-8


@given(st.integers(0, 10_000))
def test_profile_log_lipschitz(seed):
    rng = np.random.default_rng(seed)
    A = MatrixSystem.from_rows(rng.random((1, 1)))
    prof = orbit_min_profile(A, 3.0, 0.01)
    logs = np.log(prof.deltas)
    assert np.all(np.abs(np.diff(logs)) <= prof.lipschitz * prof.dt + 1e-9)
    assert prof.certified_lower() <= prof.deltas.min()


def test_golden_orbit_minimum():
    prof = orbit_min_profile(MatrixSystem.parse("phi"), 20.0, 1e-3)
    assert len(prof) == 20001
    assert abs(prof.deltas.min() - 0.6181649) < 1e-6
    # exact infimum is phi - 1 = 0.618034...
    assert prof.certified_lower() <= float(PHI) - 1 <= prof.deltas.min()
    csv = prof.to_csv().splitlines()
    assert csv[0] == "t,delta,witness" and len(csv) == 20002


def test_dani_examples():
    assert isinstance(dani_check(MatrixSystem.parse("1/2"), 0.3, 20), EntersCuspAt)
    v = dani_check(MatrixSystem.parse("0"), 0.25, 5)
    assert isinstance(v, EntersCuspAt) and abs(v.t - math.log(2)) < 1e-6
    assert dani_epsilon(0.25, 1, 1) == 0.5
    v = dani_check(MatrixSystem.parse("phi"), 0.38, 20)
    assert isinstance(v, AvoidsCuspUpTo) and not v.boundary
    v = dani_check(MatrixSystem.parse("phi"), 0.43, 20)
    assert isinstance(v, EntersCuspAt) and abs(v.t - 0.421985) < 1e-5


@given(st.integers(0, 10_000), st.sampled_from([0.02, 0.1]))
def test_dani_agrees_with_direct_search(seed, c):
    rng = np.random.default_rng(seed)
    m, n = [(1, 1), (2, 1), (1, 2)][seed % 3]
    A = MatrixSystem.from_rows(rng.random((m, n)))
    T = 6.0
    eps = dani_epsilon(c, m, n)
    Q = math.ceil(math.exp(T / n) * eps) + 1
    v = dani_check(A, c, n * math.log(Q / eps) + 1, 0.01)
    direct = is_bad_truncated(A, c, Q)
    if isinstance(v, EntersCuspAt) and v.t <= T:
        assert isinstance(direct, ViolatedBy)
    if isinstance(direct, ViolatedBy):
        assert isinstance(v, EntersCuspAt)
