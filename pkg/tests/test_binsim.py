import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from siscale import binsim as bs
from siscale.probcore import DistortionMeasure, JointSource, ValidationError

H2 = DistortionMeasure.hamming(2)
SRC = JointSource.dsbs(0.25, 0.2)


def small_suite(n=60, keep=0.1, **kw):
    aux = bs.erasure_aux(0.05, keep, 0.05, keep)
    spec = bs.rates_with_margin(aux, SRC, n, **kw)
    return aux, spec, bs.build_codebooks(spec, aux, SRC)


@pytest.mark.parametrize("n", [4, 20, 40])
def test_exact_type_is_typical(n):
    ref = np.array([0.25, 0.5, 0.25])
    x = np.repeat([0, 1, 2], [n // 4, n // 2, n // 4])
    assert bs.strongly_typical(x, ref, 1e-9)


def test_zero_mass_symbol_is_never_typical():
    ref = np.array([0.5, 0.5, 0.0])
    x = np.array([0, 1] * 50 + [2])
    assert not bs.strongly_typical(x, ref, 0.5)


def test_typicality_law_of_large_numbers():
    rng = np.random.default_rng(5)
    ref = np.array([0.2, 0.3, 0.5])
    hits = sum(bs.strongly_typical(rng.choice(3, size=10_000, p=ref), ref, 0.05) for _ in range(1000))
    assert hits >= 990


def test_joint_typicality_matches_counts():
    ref = np.array([[0.4, 0.1], [0.1, 0.4]])
    a = np.array([0, 0, 0, 0, 1, 1, 1, 1, 0, 1])
    b = np.array([0, 0, 0, 0, 1, 1, 1, 1, 1, 0])
    assert bs.jointly_typical((a, b), ref, 0.01 + 1e-12)
    assert not bs.jointly_typical((a, a), ref, 0.05)
    with pytest.raises(ValidationError):
        bs.jointly_typical((a,), ref, 0.1)


@given(st.integers(1, 400), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_vectorized_rows_agree_with_scalar_test(n, seed):
    rng = np.random.default_rng(seed)
    ref = rng.dirichlet(np.ones(6)).reshape(3, 2)
    cands = rng.integers(0, 3, size=(5, n)).astype(np.uint8)
    y = rng.integers(0, 2, size=n)
    got = bs._typical_rows(cands, y, 2, ref, 0.1)
    want = [bs.jointly_typical((c, y), ref, 0.1) for c in cands]
    assert got.tolist() == want


def test_zero_rate_gives_single_codeword():
    aux = bs.erasure_aux(0.05, 0.1, 0.05, 0.1)
    suite = bs.build_codebooks(bs.CodebookSpec(50), aux, SRC)
    assert suite.v.shape == (1, 50)
    assert suite.w1.shape == (1, 1, 50)


def test_rebuild_is_bit_identical():
    _, spec, a = small_suite()
    b = bs.build_codebooks(spec, a.aux, SRC)
    for name in ("v", "v_fine", "w1", "w1_bin", "w2", "w2_bin"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_bin_loads_balanced():
    spec = bs.CodebookSpec(20, r_w1=0.5, r_b=0.2, seed=3)
    suite = bs.build_codebooks(spec, bs.erasure_aux(0.1, 0.5, 0.1, 0.5), SRC)
    loads = np.bincount(suite.w1_bin[0], minlength=2 ** spec.bits("r_b"))
    assert loads.max() / loads.mean() <= 2


def test_oversized_codebook_refused():
    spec = bs.CodebookSpec(1000, r_v=0.5)
    with pytest.raises(bs.CodebookTooLarge) as exc:
        bs.build_codebooks(spec, bs.erasure_aux(0.1, 0.5, 0.1, 0.5), SRC)
    assert "codewords" in str(exc.value)


def test_singleton_bins_never_ambiguous():
    aux = bs.erasure_aux(0.05, 0.15, 0.05, 0.15)
    spec = bs.CodebookSpec(80, r_w1=0.1, r_b=0.1, r_w2=0.1, r_c=0.1)
    suite = bs.build_codebooks(spec, aux, SRC)
    # give every codeword a bin of its own
    suite.w1_bin = np.arange(suite.w1.shape[1])[None, :]
    suite.w2_bin = np.arange(suite.w2.shape[1])[None, :]
    rng = np.random.default_rng(1)
    for _ in range(20):
        x, y1, y2 = bs.sample_source(SRC, 80, rng)
        enc = bs.encode(suite, x)
        assert bs.decode_stage1(suite, enc.i, enc.k, y1).error != "w_ambiguous"
        assert bs.decode_stage2(suite, enc.i, enc.j, enc.l, y2).error != "w_ambiguous"


def test_stage_two_with_copied_side_information():
    # with Y2 = Y1 both stages see the same side information
    src = JointSource(np.asarray(SRC.px_y1), np.eye(2))
    aux = bs.erasure_aux(0.05, 0.1, 0.05, 0.1)
    spec = bs.CodebookSpec(60, r_w1=0.2, r_w2=0.2, r_b=0.2, r_c=0.2, seed=9)
    suite = bs.build_codebooks(spec, aux, src)
    rng = np.random.default_rng(4)
    for _ in range(5):
        x, y1, _ = bs.sample_source(src, 60, rng)
        enc = bs.encode(suite, x)
        a = bs.decode_stage1(suite, enc.i, enc.k, y1)
        b = bs.decode_stage2(suite, enc.i, enc.j, enc.l, y1)
        assert a.v_index == b.v_index


def test_encoding_error_cascade():
    aux, spec, suite = small_suite()
    x = np.zeros(spec.n, dtype=int)  # all-zero sequence is atypical for a uniform source
    enc = bs.encode(suite, x)
    assert enc.errors == ("E0",)
    _, y1, y2 = bs.sample_source(SRC, spec.n, np.random.default_rng(0))
    ev = bs._events(suite, enc, x, y1, y2)
    assert ev[0] and not any(ev[1:])


def test_rate_conditions_with_margin_hold():
    aux = bs.erasure_aux(0.05, 0.1, 0.05, 0.1)
    spec = bs.rates_with_margin(aux, SRC, 100)
    conds = bs.check_rate_conditions(spec, aux, SRC)
    assert len(conds) == 7
    assert all(c.ok for c in conds)
    short = bs.CodebookSpec(100, r_w1=spec.r_w1 * 0.5, r_w2=spec.r_w2, r_b=spec.r_b, r_c=spec.r_c)
    assert not all(c.ok for c in bs.check_rate_conditions(short, aux, SRC))


def test_run_trials_is_deterministic_and_json_ready():
    aux = bs.erasure_aux(0.05, 0.1, 0.05, 0.1)
    spec = bs.rates_with_margin(aux, SRC, 60)
    a = bs.run_trials(spec, aux, SRC, 8, H2, H2)
    b = bs.run_trials(spec, aux, SRC, 8, H2, H2)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    assert set(a["event_frequencies"]) == {f"E{i}" for i in range(12)}
    assert a["label"] == "guaranteed-achievable"
    assert 0.0 <= a["error_frequency"] <= 1.0


def test_zero_trials_rejected():
    aux = bs.erasure_aux(0.05, 0.1, 0.05, 0.1)
    with pytest.raises(ValidationError):
        bs.run_trials(bs.CodebookSpec(10), aux, SRC, 0, H2, H2)


def test_margin_violation_label():
    aux = bs.erasure_aux(0.05, 0.1, 0.05, 0.1)
    out = bs.run_trials(bs.CodebookSpec(30), aux, SRC, 2, H2, H2)
    assert out["label"] == "margin-violated"


@pytest.mark.parametrize("bad", [dict(n=0), dict(n=10, r_v=-0.1), dict(n=10, delta=0.0), dict(n=2.5)])
def test_spec_validation(bad):
    with pytest.raises(ValidationError):
        bs.CodebookSpec(**bad)


def test_erasure_aux_distortions():
    aux = bs.erasure_aux(0.05, 0.4, 0.1, 0.7)
    d1, d2 = aux.distortions(SRC, H2, H2)
    assert d1 == pytest.approx(0.4 * 0.05 + 0.6 * 0.25)
    # Y2 = Y1 through BSC(0.2): crossover 0.25 * 0.2
    assert d2 == pytest.approx(0.7 * 0.1 + 0.3 * (0.25 * 0.8 + 0.75 * 0.2))
