import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from badapprox.arith import PHI
from badapprox.diophantine import MatrixSystem, hensley_dim
from badapprox.dimension import (
    EkOracle,
    box_count_dim,
    choose_t,
    covering_params,
    covering_upper_bound,
    ek_cylinder_dim,
    levels_csv,
)
from badapprox.errors import DegenerateInput
from badapprox.lattice import FlowedLattice, shortest_vector, LatticeBasis

LN10 = math.log(10)
PHI_M = MatrixSystem.parse("phi")
# high-accuracy value of dim E_2 from the literature on transfer operators
DIM_E2 = 0.5312805062772051


class Segment:
    def __call__(self, pts):
        return pts[:, 1] == 0.5

    def at_scale(self, pts, s):
        return np.abs(pts[:, 1] - 0.5) <= s / 2


class EkTimesInterval:
    def __init__(self, k):
        self.ek = EkOracle(k)

    def __call__(self, pts):
        return self.ek(pts[:, :1])

    def at_scale(self, pts, s):
        return self.ek.at_scale(pts[:, :1], s)


def test_box_count_full_square():
    est = box_count_dim(lambda p: np.ones(len(p), bool), [(0, 1), (0, 1)], [2.0**-j for j in range(2, 9)], 1)
    assert abs(est.value - 2) < 0.01 and est.method == "box-count"


def test_box_count_segment():
    est = box_count_dim(Segment(), [(0, 1), (0, 1)], [2.0**-j for j in range(3, 11)], 2)
    assert abs(est.value - 1) < 0.05


def test_box_count_e2():
    est = box_count_dim(EkOracle(2), [(0, 1)], [2.0**-j for j in range(6, 17)], 4, seed=1)
    assert abs(est.value - DIM_E2) < 0.03


def test_box_count_product_calibration():
    s = box_count_dim(EkOracle(3), [(0, 1)], [2.0**-j for j in range(5, 11)], 4).value
    sp = box_count_dim(EkTimesInterval(3), [(0, 1), (0, 1)], [2.0**-j for j in range(5, 11)], 4).value
    assert abs(sp - (s + 1)) < 0.05


def test_box_count_degenerate():
    with pytest.raises(DegenerateInput):
        box_count_dim(lambda p: np.zeros(len(p), bool), [(0, 1)], [0.1, 0.01], 2)
    with pytest.raises(ValueError):
        box_count_dim(lambda p: np.ones(len(p), bool), [(0, 1)], [0.01, 0.1], 2)


def test_box_count_seed_reproducible():
    a = box_count_dim(EkOracle(2), [(0, 1)], [2.0**-j for j in range(4, 10)], 2, seed=5)
    b = box_count_dim(EkOracle(2), [(0, 1)], [2.0**-j for j in range(4, 10)], 2, seed=5)
    assert a == b


def test_ek_oracle_membership():
    x = np.array([[float(PHI) - 1], [math.sqrt(2) - 1], [0.5]])
    assert list(EkOracle(1)(x)) == [True, False, False]
    assert list(EkOracle(2)(x)) == [True, True, True]


def test_ek_cylinder_values():
    assert ek_cylinder_dim(1).value == 0
    e2 = ek_cylinder_dim(2, 12)
    assert abs(e2.value - DIM_E2) < 1e-5
    assert e2.stderr < 1e-4
    e8 = ek_cylinder_dim(8, 12)
    assert abs(e8.value - hensley_dim(8)) < 0.03


@given(st.integers(2, 30))
def test_ek_cylinder_monotone(k):
    assert ek_cylinder_dim(k, 6).value < ek_cylinder_dim(k + 1, 6).value < 1


def test_covering_parameters():
    P = covering_params(1, 1, 0.05, LN10)
    assert P["N"] == 100 and P["f"] == 100
    assert P["eps"] == pytest.approx(math.sqrt(0.05))
    assert P["r"] == pytest.approx(0.1 * (math.sqrt(0.05) / 2) ** 2)
    with pytest.raises(DegenerateInput):
        covering_params(1, 1, 0.05, 0.9)
    with pytest.raises(DegenerateInput):
        covering_params(1, 1, 0.5, 2.0, b=100)


def test_covering_empty_set_gives_zero():
    est = covering_upper_bound(1, 1, 0.9, LN10, 2)
    assert est.value == 0
    assert est.params["levels"][1]["survivors"] == 0


def test_covering_certificates_and_csv():
    est = covering_upper_bound(1, 1, 0.3, LN10, 2, PHI_M)
    lv = est.params["levels"]
    assert lv[2]["survivors"] < lv[2]["total"]
    assert est.params["kills"] > 0
    assert 0 < est.params["worst_kill_certificate"] <= 1
    assert levels_csv(est).splitlines()[0] == "level,total,survivors"
    assert 0 <= est.value <= 1


def test_renormalization_matches_direct_flow():
    est, states = covering_upper_bound(1, 1, 0.3, LN10, 2, PHI_M, return_states=True)
    rng = np.random.default_rng(0)
    t = LN10
    for k in (1, 2):
        st_ = states[k]
        for i in rng.choice(len(st_.centers), 5, replace=False):
            A = MatrixSystem.scalar(PHI + Fraction(float(st_.centers[i][0, 0])))
            direct, _ = FlowedLattice(A).scan(np.array([k * t]))
            renorm, _ = shortest_vector(LatticeBasis(st_.lattices[i], 1, 1))
            assert abs(direct[0] - renorm) <= 1e-6 * direct[0]


def test_covering_monotone_in_c():
    vals = [covering_upper_bound(1, 1, c, LN10, 2, PHI_M).value for c in (0.2, 0.3, 0.4)]
    assert vals[0] >= vals[1] >= vals[2]


@pytest.mark.parametrize("k", [3, 5, 8])
def test_sandwich_coherence(k):
    cover = covering_upper_bound(1, 1, 1 / k, LN10, 2, PHI_M).value
    lower = ek_cylinder_dim(k - 2).value
    assert lower <= cover <= 1
    box = box_count_dim(EkOracle(k), [(0, 1)], [2.0**-j for j in range(6, 15)], 2).value
    assert abs(box - ek_cylinder_dim(k).value) < 0.03


def test_choose_t():
    assert choose_t(0.1, 1, 1, 1, 2, 1) == pytest.approx(math.log(4) + 4 * math.log(10))
    assert choose_t(0.1, 1, 1, 1, 2, 1) == pytest.approx(10.5966347331, abs=1e-9)
    assert choose_t(0.2, 2, 1, 0.5, 1, 2) == pytest.approx(2 * 3 * 3 * math.log(5))
    assert choose_t(0.01, 1, 1, 1, 1, 1) > choose_t(0.1, 1, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        choose_t(1.5, 1, 1, 1, 1, 1)
