import itertools
import math
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from badapprox.cantor import (
    cantor_build,
    cantor_census,
    child_count_bound,
    codim_rate,
    lower_bound_dim,
    md_constant,
    sharper_child_bound,
    unit_cube_ball,
)
from badapprox.errors import DegenerateInput
from badapprox.cantor import _sqrt_exact
from badapprox.haw import Ball, GameState, alice_simplex_strategy
from badapprox.runs import validate


def test_md_values():
    assert md_constant(1) == 4
    assert md_constant(2) == pytest.approx(12 + 2 * math.sqrt(2), abs=1e-12)
    assert md_constant(3) == pytest.approx(18 + 12 * (2 * math.sqrt(3) + 1), abs=1e-12)


def test_lower_bound_values():
    assert lower_bound_dim(1, 0.01) == pytest.approx(0.9911356165197842, abs=1e-12)
    assert lower_bound_dim(2, 0.02) == pytest.approx(1.9100759792612005, abs=1e-12)
    assert codim_rate(1, 0.01) == pytest.approx(0.008864383480215794, abs=1e-12)
    with pytest.raises(DegenerateInput):
        lower_bound_dim(1, 0.25)
    with pytest.raises(DegenerateInput):
        codim_rate(2, 0.1)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_codim_limit(d):
    beta = 1e-6
    assert codim_rate(d, beta) * math.log(1 / beta) / beta == pytest.approx(md_constant(d), rel=0.05)


@given(st.integers(1, 3), st.floats(1e-6, 0.2))
def test_lower_bound_in_range(d, beta):
    if beta >= 1 / md_constant(d):
        with pytest.raises(DegenerateInput):
            lower_bound_dim(d, beta)
    else:
        assert lower_bound_dim(d, beta) < d
        assert lower_bound_dim(d, beta / 2) > lower_bound_dim(d, beta)


def test_child_count_bound_exact():
    assert child_count_bound(1, F(1, 50)) == 46
    assert child_count_bound(1, F(1, 100)) == 96
    assert child_count_bound(2, F(1, 50)) == 1759  # ceil(2500 - 50 M_2)
    assert child_count_bound(2, F(1, 100)) == 8518
    assert sharper_child_bound(1, 0.02) >= child_count_bound(1, F(1, 50)) - 1


def _node_oracle(tree, alice, k):
    """Kept counts recomputed from scratch for every node at level k."""
    B = tree.beta.denominator
    d = tree.d
    side = tree.side(k)
    child_side = side / B
    out = []
    for idx, a in enumerate(tree.levels[k]):
        # superscribing balls of the node and its ancestors
        chain, j, lv = [], idx, k
        while lv >= 0:
            aa = tree.levels[lv][j]
            s = tree.side(lv)
            c = tuple(o + s * (int(x) + F(1, 2)) for o, x in zip(tree.origin, aa))
            chain.append((c, s))
            j = tree.parents[lv][j]
            lv -= 1
        balls = [Ball(c, _sqrt_exact(d) * s / 2) for c, s in reversed(chain)]
        balls[0] = Ball(balls[0].center, tree.rho0)
        L = alice(GameState(tree.beta, balls, []))
        n2 = sum(x * x for x in L.normal)
        corner = tuple(o + side * int(x) for o, x in zip(tree.origin, a))
        kept = 0
        ranges = [range(B - 1)] * d
        for off in itertools.product(*ranges):
            cc = tuple(c + child_side * (i + F(1, 2)) for c, i in zip(corner, off))
            # the whole subcube must stay sqrt(d) * side away from L
            h = abs(L.signed_offset(cc)) - child_side / 2 * sum(abs(x) for x in L.normal)
            kept += h >= 0 and h * h >= d * child_side**2 * n2
        out.append(kept)
    return out


@pytest.mark.parametrize("d,B,depth", [(1, 50, 3), (2, 20, 2)])
def test_build_matches_node_oracle(d, B, depth):
    alice = lambda s: alice_simplex_strategy(s, d)  # noqa: E731
    tree = cantor_build(alice, F(1, B), unit_cube_ball(d), depth)
    for k in range(depth):
        if len(tree.levels[k]) > 400:
            continue
        assert list(tree.kept[k]) == _node_oracle(tree, alice, k)
    assert tree.min_kept >= child_count_bound(d, F(1, B))
    validate(tree.to_dict(), "cantor.schema.json")


@pytest.mark.parametrize("d,B,depth", [(1, 50, 3), (2, 20, 2), (2, 50, 2)])
def test_census_covers_build(d, B, depth):
    alice = lambda s: alice_simplex_strategy(s, d)  # noqa: E731
    tree = cantor_build(alice, F(1, B), unit_cube_ball(d), depth)
    cen = cantor_census(F(1, B), d, depth)
    for k in range(depth):
        assert cen.levels[k].min_kept <= int(tree.kept[k].min())
    assert cen.min_kept >= child_count_bound(d, F(1, B))
    validate(cen.to_dict(), "cantor.schema.json")


def test_build_rejects_bad_beta():
    with pytest.raises(ValueError):
        cantor_build(lambda s: None, F(2, 7), unit_cube_ball(1), 1)
