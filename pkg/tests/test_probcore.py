import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from siscale.probcore import (
    DistortionMeasure,
    Entropies,
    JointSource,
    Pmf,
    ValidationError,
    binary_convolve,
    binary_entropy,
    cond_entropy,
    cond_mutual_info,
    conditional_entropy,
    entropy,
    expected_distortion,
    load_source_json,
    min_distortion,
    mutual_information,
    zero_rate_distortion,
)


def random_joint(rng, shape):
    p = rng.dirichlet(np.ones(int(np.prod(shape))) * 0.6).reshape(shape)
    return p


joints = arrays(
    float,
    st.tuples(st.integers(2, 3), st.integers(1, 3), st.integers(1, 3)),
    elements=st.floats(0.0, 1.0),
).filter(lambda a: a.sum() > 1e-3).map(lambda a: a / a.sum())


@pytest.mark.parametrize(
    "p, expected",
    [([1.0], 0.0), ([0.5, 0.5], 1.0), ([0.25] * 4, 2.0), ([0.5, 0.25, 0.25], 1.5), ([1.0, 0.0], 0.0)],
)
def test_entropy_trivial(p, expected):
    assert entropy(p) == pytest.approx(expected, abs=1e-15)


def test_pmf_rejects_bad_input():
    with pytest.raises(ValidationError):
        Pmf([0.5, 0.6])
    with pytest.raises(ValidationError):
        Pmf([1.5, -0.5])
    with pytest.raises(ValidationError):
        Pmf([])
    with pytest.raises(ValidationError):
        Pmf([np.nan, 1.0])


def test_joint_source_rejects_bad_channels():
    with pytest.raises(ValidationError):
        JointSource(np.array([[0.5, 0.2], [0.1, 0.1]]), np.eye(2))
    with pytest.raises(ValidationError):
        JointSource(np.full((2, 2), 0.25), np.array([[0.5, 0.6], [1.0, 0.0]]))
    with pytest.raises(ValidationError):
        JointSource(np.full((2, 2), 0.25), np.eye(3))


def test_dsbs_source_layout():
    src = JointSource.dsbs(0.2, 0.1)
    assert src.joint.shape == (2, 2, 2)
    assert src.joint.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(src.px, [0.5, 0.5])
    # X - Y1 - Y2 by construction
    assert cond_mutual_info(src.joint, (0,), (2,), (1,)) < 1e-15
    blind = JointSource.dsbs(0.2)
    assert blind.ny2 == 1


@pytest.mark.parametrize("seed", range(5))
def test_cmi_matches_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    j = random_joint(rng, (3, 2, 2, 3))
    for a, b, c in [((0,), (3,), ()), ((0,), (3,), (1,)), ((0, 1), (3,), (2,)), ((0,), (1, 2), (3,))]:
        assert cond_mutual_info(j, a, b, c) == pytest.approx(oracles.cmi_loop(j, a, b, c), abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_matrix_helpers_match_loops(seed):
    rng = np.random.default_rng(100 + seed)
    j = random_joint(rng, (4, 3))
    assert conditional_entropy(j) == pytest.approx(oracles.conditional_entropy_loop(j), abs=1e-12)
    mi = oracles.entropy_loop(j.sum(1)) + oracles.entropy_loop(j.sum(0)) - oracles.entropy_loop(j)
    assert mutual_information(j) == pytest.approx(mi, abs=1e-12)


@given(joints)
@settings(max_examples=60, deadline=None)
def test_information_inequalities(j):
    e = Entropies(j)
    # nonnegativity and chain rule I(X;Y1 Y2) = I(X;Y1) + I(X;Y2|Y1)
    assert e.cmi((0,), (1,)) >= 0
    lhs = e.cmi((0,), (1, 2))
    rhs = e.cmi((0,), (1,)) + e.cmi((0,), (2,), (1,))
    assert lhs == pytest.approx(rhs, abs=1e-9)
    # conditioning reduces entropy
    assert e.ch((0,), (1,)) <= e.ch((0,)) + 1e-12
    assert e.ch((0,), (1, 2)) <= e.ch((0,), (1,)) + 1e-12
    assert cond_entropy(j, (0,), (1,)) == pytest.approx(e.ch((0,), (1,)), abs=1e-12)


@given(st.floats(0, 0.5), st.floats(0, 0.5))
def test_binary_convolution_properties(u, v):
    w = binary_convolve(u, v)
    assert w == pytest.approx(binary_convolve(v, u))
    # cascading two BSCs never helps
    assert max(u, v) - 1e-12 <= w <= 0.5 + 1e-12
    assert binary_convolve(u, 0.5) == pytest.approx(0.5)


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(0.11) == pytest.approx(oracles.h2(0.11), abs=1e-15)
    with pytest.raises(ValidationError):
        binary_entropy(1.2)


def test_distortion_measures():
    h = DistortionMeasure.hamming(3)
    assert h.in_gamma_d
    z = DistortionMeasure.of_function([0, 0, 1])
    np.testing.assert_array_equal(z.matrix, [[0, 1], [0, 1], [1, 0]])
    assert not z.in_gamma_d
    se = DistortionMeasure.squared_error([-1.0, 0.0, 2.0])
    assert se.matrix[0, 2] == 9.0
    with pytest.raises(ValidationError):
        DistortionMeasure(np.array([[0.0, -1.0], [1.0, 0.0]]))


def test_zero_rate_and_min_distortion():
    src = JointSource.dsbs(0.2)
    h = DistortionMeasure.hamming(2)
    assert zero_rate_distortion(src, h, "y1") == pytest.approx(0.2)
    assert zero_rate_distortion(src, h, "y2") == pytest.approx(0.5)
    assert min_distortion(src, h) == 0.0
    joint = np.array([[0.4, 0.1], [0.1, 0.4]])
    assert expected_distortion(joint, h) == pytest.approx(0.2)


def test_load_source_json_roundtrip(tmp_path):
    src = JointSource.dsbs(0.3, 0.1)
    data = dict(src.to_dict(), d1=(1 - np.eye(2)).tolist())
    path = tmp_path / "src.json"
    path.write_text(json.dumps(data))
    got, d1, d2 = load_source_json(str(path))
    np.testing.assert_allclose(got.joint, src.joint)
    assert d1.in_gamma_d and d2 is None
    with pytest.raises(ValidationError):
        load_source_json({"px_y1": [[0.5, 0.5]]})


def test_support_condition():
    assert JointSource.dsbs(0.2).support_condition()
    erasure = JointSource(np.array([[0.5, 0.0], [0.0, 0.5]]), np.eye(2))
    assert not erasure.support_condition()
    assert math.isclose(entropy(erasure.px), 1.0)
