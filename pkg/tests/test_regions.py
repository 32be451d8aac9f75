import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from siscale import regions
from siscale.probcore import DistortionMeasure, JointSource, ValidationError
from siscale.search import OptimizerConfig

H2 = DistortionMeasure.hamming(2)
SMALL = OptimizerConfig(restarts=1, card_v=2, card_w1=2, card_w2=2)


def random_source(rng, nx, ny1=2, ny2=2):
    px = rng.dirichlet(np.ones(nx))
    c1 = rng.dirichlet(np.ones(ny1), size=nx)
    c2 = rng.dirichlet(np.ones(ny2), size=ny1)
    return JointSource.from_channels(px, c1, c2)


def test_rate_pair_validation():
    regions.RatePair(0.2, 0.3)
    with pytest.raises(ValidationError):
        regions.RatePair(0.3, 0.2)
    with pytest.raises(ValidationError):
        regions.RatePair(-0.1, 0.2)
    with pytest.raises(ValidationError):
        regions.RatePair(np.nan, 1.0)


def test_scalable_aux_markov_check():
    ch = np.zeros((2, 1, 2, 2))
    ch[0, 0, 0, 0] = ch[1, 0, 1, 1] = 1.0
    regions.ScalableAux(ch, np.zeros((2, 2)), np.zeros((2, 2)), markov=True)
    bad = np.full((2, 1, 2, 2), 0.25)
    bad[0, 0] = [[0.5, 0.0], [0.0, 0.5]]
    with pytest.raises(ValidationError):
        regions.ScalableAux(bad, np.zeros((2, 2)), np.zeros((2, 2)), markov=True)


@pytest.mark.parametrize("seed", range(4))
def test_lossless_first_corner_is_conditional_entropy(seed):
    src = random_source(np.random.default_rng(seed), 3)
    d = DistortionMeasure.hamming(3)
    front = regions.lossless_region(src, "first", d, 0.9, OptimizerConfig(restarts=1), lossless_d=d, grid_size=3)
    expect = oracles.conditional_entropy_loop(src.pair("y1"))
    assert front.corner().r1 == pytest.approx(expect, abs=1e-9)
    assert front.bound_tag == regions.LOSSLESS


def test_lossless_second_sum_is_conditional_entropy():
    src = JointSource.dsbs(0.2, 0.1)
    front = regions.lossless_region(src, "second", H2, 0.1, OptimizerConfig(restarts=1), grid_size=3)
    assert front.r_sum[-1] == pytest.approx(oracles.h2(oracles.conv(0.2, 0.1)), abs=1e-12)


def test_lossless_rejects_non_gamma_measure():
    src = JointSource.dsbs(0.2, 0.1)
    with pytest.raises(ValidationError):
        regions.lossless_region(src, "first", H2, 0.1, lossless_d=DistortionMeasure(np.ones((2, 2))))
    with pytest.raises(ValidationError):
        regions.lossless_region(src, "sideways", H2, 0.1)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_deterministic_entropies_match_loops(seed):
    rng = np.random.default_rng(seed)
    src = random_source(rng, 4, 3, 2)
    q1 = np.array([0, 1, 2, 2])
    q2 = np.array([0, 0, 1, 1])  # q2 factors through q1
    r1, rs = regions.deterministic_entropies(src, q1, q2)
    z1y1 = np.zeros((3, src.ny1))
    z2y2 = np.zeros((2, src.ny2))
    t = np.zeros((3, 2, src.ny1))  # (z1, z2, y1)
    for x in range(4):
        z1y1[q1[x]] += src.px_y1[x]
        z2y2[q2[x]] += src.joint[x].sum(axis=0)
        t[q1[x], q2[x]] += src.px_y1[x]
    h_z1_given_y1z2 = oracles.entropy_loop(t) - oracles.entropy_loop(t.sum(axis=0))
    assert r1 == pytest.approx(oracles.conditional_entropy_loop(z1y1), abs=1e-12)
    assert rs == pytest.approx(oracles.conditional_entropy_loop(z2y2) + h_z1_given_y1z2, abs=1e-12)
    front = regions.deterministic_region(src, q1, q2, grid_size=2)
    wr = front.points[0].witness_rates
    assert wr[0] == pytest.approx(r1, abs=1e-9)
    assert wr[1] == pytest.approx(max(rs, r1), abs=1e-9)


def test_deterministic_requires_degraded_functions():
    src = random_source(np.random.default_rng(3), 4)
    q1, q2 = [0, 1, 0, 1], [0, 0, 1, 1]
    with pytest.raises(ValidationError):
        regions.deterministic_region(src, q1, q2)
    front = regions.deterministic_region(src, q1, q2, diagnostics=True)
    assert front.bound_tag == regions.CONVERSE_ONLY
    assert front.points[0].witness is None


def test_frontier_csv_and_contains():
    pts = [regions.FrontierPoint(0.1, 0.5), regions.FrontierPoint(0.2, 0.4), regions.FrontierPoint(0.4, 0.4)]
    fr = regions.RegionFrontier(pts, regions.INNER)
    lines = fr.to_csv().splitlines()
    assert lines[0] == "r1,r_sum,bound_tag"
    assert lines[1] == "0.1,0.5,inner"
    assert fr.contains(0.25, 0.45)
    assert not fr.contains(0.15, 0.45)
    assert not fr.contains(0.05, 1.0)
    assert fr.sum_at(0.2) == 0.4
    with pytest.raises(ValidationError):
        regions.RegionFrontier(pts[::-1], regions.INNER)


def test_outer_cap_shape():
    src = JointSource.dsbs(0.25, 0.2)
    cap = regions.outer_region_cap(src, H2, H2, 0.1, 0.2, OptimizerConfig(restarts=1, card_w1=3, card_w2=3), grid_size=5)
    assert cap.bound_tag == regions.OUTER_CAP
    assert np.all(cap.r_sum == cap.r_sum[0])
    assert cap.r1[-1] <= cap.r_sum[0] + 1e-12


def test_trivial_instance_is_origin():
    src = JointSource.dsbs(0.2)
    fr = regions.inner_region(src, H2, H2, 0.25, 0.5, SMALL, grid_size=3)
    assert fr.r1.tolist() == [0.0] and fr.r_sum.tolist() == [0.0]


def test_inner_frontier_witnesses_are_consistent():
    src = JointSource.dsbs(0.25, 0.2)
    D1, D2 = 0.1, 0.2
    fr = regions.inner_region(src, H2, H2, D1, D2, SMALL, grid_size=3)
    assert fr.points
    for pt in fr.points:
        r1, rs = pt.witness.rate_pair(src)
        assert r1 <= pt.r1 + 1e-9
        assert rs == pytest.approx(pt.r_sum, abs=1e-9)
        d1, d2 = pt.witness.distortions(src, H2, H2)
        assert d1 <= D1 + 1e-9 and d2 <= D2 + 1e-9
    again = regions.inner_region(src, H2, H2, D1, D2, SMALL, grid_size=3)
    assert again.to_csv() == fr.to_csv()


def test_hat_frontier_is_achievable_by_inner_rates():
    src = JointSource.dsbs(0.25, 0.2)
    fr = regions.inner_region_hat(src, H2, H2, 0.1, 0.2, OptimizerConfig(restarts=1, card_w1=2, card_w2=2), grid_size=3)
    for pt in fr.points:
        ch = regions._hat_as_inner(pt.witness)
        assert ch is not None
        aux = regions.ScalableAux(ch, pt.witness.f1, pt.witness.f2, markov=True)
        r1, rs = aux.rate_pair(src)
        assert r1 == pytest.approx(pt.witness_rates[0], abs=1e-9)
        assert rs == pytest.approx(pt.witness_rates[1], abs=1e-9)


def test_certificate_impossible_on_region_ID():
    cert = regions.perfect_scalability_certificate(JointSource.dsbs(0.25), H2, H2, 0.05, 0.2)
    assert cert.status == "impossible"
    assert not cert.found
