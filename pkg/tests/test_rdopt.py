import numpy as np
import pytest

import oracles
from siscale import dsbs, rdopt
from siscale.probcore import DistortionMeasure, JointSource, cond_entropy
from siscale.search import Infeasible, OptimizerConfig

H2 = DistortionMeasure.hamming(2)
FAST = OptimizerConfig(restarts=2)
SMALL = OptimizerConfig(restarts=1, card_w1=3, card_w2=3)


def test_slepian_wolf_rate_is_conditional_entropy():
    src = JointSource.dsbs(0.2, 0.1)
    assert rdopt.slepian_wolf_rate(src, "y1") == pytest.approx(oracles.h2(0.2), abs=1e-12)
    assert rdopt.slepian_wolf_rate(src, "y2") == pytest.approx(oracles.h2(oracles.conv(0.2, 0.1)), abs=1e-12)


@pytest.mark.parametrize("D", [0.1, 0.25])
def test_wz_without_side_information_is_rate_distortion(D):
    # constant Y: the Wyner-Ziv function reduces to R(D), computed by Blahut-Arimoto
    px = np.array([0.5, 0.3, 0.2])
    src = JointSource(px[:, None], np.ones((1, 1)))
    d = DistortionMeasure.hamming(3)
    got = rdopt.wyner_ziv_rate(src, d, D, FAST)
    assert got == pytest.approx(oracles.rd_curve_oracle(px, d.matrix, D), abs=0.01)


@pytest.mark.parametrize("D", [0.03, 0.08, 0.15])
def test_wz_dsbs_closed_form(D):
    res = rdopt.solve_wyner_ziv(JointSource.dsbs(0.25), H2, D, FAST)
    assert res.rate == pytest.approx(dsbs.wz_dsbs(0.25, D), abs=0.01)
    assert res.distortions[0] <= D + 1e-12


def test_wz_curve_nonincreasing():
    res = rdopt.wyner_ziv_curve(JointSource.dsbs(0.2), H2, [0.15, 0.02, 0.08], FAST)
    rates = [r for _, r in sorted(zip([0.15, 0.02, 0.08], [x.rate for x in res]))]
    assert rates == sorted(rates, reverse=True)


def test_infeasible_distortion_raises():
    src = JointSource.dsbs(0.2)
    d = DistortionMeasure(np.array([[0.1, 1.0], [1.0, 0.1]]))
    with pytest.raises(Infeasible):
        rdopt.solve_wyner_ziv(src, d, 0.05, FAST)


def test_hb_trivial_when_side_information_suffices():
    src = JointSource.dsbs(0.2)
    assert rdopt.heegard_berger_rate(src, H2, H2, 0.2, 0.5, FAST) == 0.0


def test_hb_bounded_by_single_user_rates():
    src = JointSource.dsbs(0.25, 0.2)
    D1, D2 = 0.1, 0.2
    hb = rdopt.solve_heegard_berger(src, H2, H2, D1, D2, SMALL)
    wz1 = rdopt.wyner_ziv_rate(src, H2, D1, FAST, "y1")
    wz2 = rdopt.wyner_ziv_rate(src, H2, D2, FAST, "y2")
    assert hb.rate >= max(wz1, wz2) - FAST.tolerance
    assert hb.rate <= wz1 + wz2 + 1e-9
    assert hb.distortions[0] <= D1 + 1e-12 and hb.distortions[1] <= D2 + 1e-12


def test_hb_lossless_first_matches_entropy_form():
    src = JointSource.dsbs(0.25)
    # with D2 loose, W2 is useless and the rate is H(X|Y1)
    assert rdopt.hb_lossless_first(src, H2, 0.5, FAST) == pytest.approx(cond_entropy(src.joint, (0,), (1,)), abs=1e-9)


def test_solver_is_deterministic():
    src = JointSource.dsbs(0.25, 0.2)
    a = rdopt.solve_heegard_berger(src, H2, H2, 0.1, 0.2, SMALL)
    b = rdopt.solve_heegard_berger(src, H2, H2, 0.1, 0.2, SMALL)
    assert a.rate == b.rate
    np.testing.assert_array_equal(a.witness.cond, b.witness.cond)
