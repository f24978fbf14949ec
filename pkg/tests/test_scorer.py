import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtpref.errors import ContractError
from mtpref.scorer import (
    ScorerParams,
    char_ngrams,
    extract_features,
    featurize,
    featurize_many,
    fnv1a_64,
    forward,
    forward_batch,
    init_params,
    load_params,
    ngram_overlap,
    save_params,
    score_instances,
)

from conftest import inst

# published FNV-1a 64-bit test vectors
FNV_VECTORS = {
    b"": 0xCBF29CE484222325,
    b"a": 0xAF63DC4C8601EC8C,
    b"foobar": 0x85944171F73967E8,
}


@pytest.mark.parametrize("data,expected", FNV_VECTORS.items())
def test_fnv_vectors(data, expected):
    assert fnv1a_64(data) == expected


def test_golden_features(golden):
    g = golden["features_abc"]
    x = featurize(g["source"], g["candidate"], g["reference"], g["dim"])
    np.testing.assert_array_equal(x, np.array(g["values"]))


def test_golden_init(golden):
    g = golden["init_seed0_D4_H2"]
    p = init_params(0, dim=4, hidden=2)
    np.testing.assert_array_equal(p.hidden_weights, g["hidden_weights"])
    np.testing.assert_array_equal(p.out_weights, g["out_weights"])
    assert not p.hidden_bias.any() and p.out_bias == 0.0


def test_init_bound():
    p = init_params(5, 64, 16)
    bound = np.sqrt(6 / 80)
    assert np.abs(p.hidden_weights).max() <= bound and np.abs(p.out_weights).max() <= bound


def test_char_ngrams():
    assert char_ngrams("") == []
    assert char_ngrams("ab") == ["ab"]
    assert char_ngrams("abcd") == ["abc", "bcd"]


def test_overlap_identity_and_disjoint():
    assert ngram_overlap("the cat sat", "the cat sat") == 1.0
    assert ngram_overlap("aaaa", "bbbb") == 0.0
    assert ngram_overlap("", "") == 0.0
    # multiset Dice: {aaa:2} vs {aaa:1} -> 2*1/3
    assert ngram_overlap("aaaa", "aaa") == pytest.approx(2 / 3)


def test_identity_candidate_has_full_overlap():
    x = featurize("ein Satz", "a sentence", "a sentence")
    assert x[3] == 1.0 and x[4] == 1.0


def test_empty_candidate():
    x = featurize("source", "", "ref")
    assert x[0] == 1.0
    assert not x[1:].any()


def test_qe_zeroes_reference_slots():
    x = featurize("source text", "candidate text", None)
    assert x[3] == 0.0 and x[4] == 0.0 and x[5] > 0.0


def test_hashed_block_unit_norm():
    x = featurize("s", "some longer candidate text", "r")
    assert np.linalg.norm(x[6:]) == pytest.approx(1.0)


def test_length_clamp():
    x = featurize("a", "b" * 5000, "c")
    assert x[1] == 8.0 and x[2] == 8.0 and x[3] == 8.0


def test_dim_must_exceed_dense_block():
    with pytest.raises(ContractError):
        featurize("a", "b", "c", dim=6)
    assert featurize("a", "b", "c", dim=7).shape == (7,)


def test_identity_fields_do_not_matter():
    a = inst("1", "sysA", "hello world")
    b = inst("99", "sysZ", "hello world")
    np.testing.assert_array_equal(extract_features(a), extract_features(b))


def test_featurize_many_matches_single():
    triples = [("s", "c1", "r"), ("s", "c2", None), ("s", "c1", "r")]
    x = featurize_many(triples, dim=16)
    for row, t in zip(x, triples):
        np.testing.assert_array_equal(row, featurize(*t, dim=16))


def test_forward_examples():
    zero = ScorerParams(np.zeros((2, 8)), np.zeros(2), np.zeros(2), 0.0)
    assert forward(zero, np.ones(8)) == 0.0
    # v = (2,), tanh saturates at 20 -> reward just under 2 + c
    p = ScorerParams(np.full((1, 8), 20.0 / 8), np.zeros(1), np.array([2.0]), -2.0)
    assert abs(forward(p, np.ones(8))) < 1e-15


def test_forward_shape_mismatch():
    with pytest.raises(ContractError):
        forward_batch(init_params(0, 8, 2), np.zeros((3, 9)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reward_bounded_by_output_norm(seed):
    rng = np.random.default_rng(seed)
    p = ScorerParams(rng.normal(size=(4, 8)) * 10, rng.normal(size=4), rng.normal(size=4), float(rng.normal()))
    r, _ = forward_batch(p, rng.normal(size=(20, 8)) * 10)
    assert np.all(np.abs(r - p.out_bias) <= np.abs(p.out_weights).sum() + 1e-12)


def test_params_roundtrip(tmp_path):
    p = init_params(7, 16, 4)
    p.out_bias = 0.123456789012345
    save_params(p, tmp_path / "m.json")
    q = load_params(tmp_path / "m.json")
    np.testing.assert_array_equal(p.flat(), q.flat())
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["D"] == 16 and doc["H"] == 4


def test_params_malformed(tmp_path):
    (tmp_path / "m.json").write_text('{"D": 4, "H": 2, "hidden_weights": [1, 2]}')
    with pytest.raises(ContractError):
        load_params(tmp_path / "m.json")


def test_flat_roundtrip_and_names():
    p = init_params(1, 5, 3)
    q = ScorerParams.from_flat(p.flat(), 5, 3)
    np.testing.assert_array_equal(p.flat(), q.flat())
    names = ScorerParams.names(5, 3)
    assert len(names) == p.flat().size == 5 * 3 + 3 + 3 + 1
    assert names[-1] == "out_bias"
    with pytest.raises(ContractError):
        ScorerParams.from_flat(np.zeros(4), 5, 3)


def test_score_instances_matches_forward():
    p = init_params(2, 32, 4)
    items = [inst("1", "a", "one two"), inst("1", "b", "three")]
    r = score_instances(p, items)
    for ri, i in zip(r, items):
        assert ri == pytest.approx(forward(p, extract_features(i, 32)), rel=1e-12)
