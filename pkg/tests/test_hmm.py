import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ocrhmm import hmm
from ocrhmm.hmm import (
    DecodeError,
    HmmModel,
    correct_words,
    decode_tables,
    estimate_final_probs,
    estimate_final_transition_matrix,
    estimate_initial_probs,
    estimate_transition_matrix,
    fit_hmm,
    path_score,
    viterbi_decode,
)

import oracles


def L(ch):
    return ord(ch) - 97


def test_transition_counts():
    a = estimate_transition_matrix(["ab", "ab", "ac"])
    np.testing.assert_allclose(a[0, :3], [0, 2 / 3, 1 / 3])
    assert a[1:].sum() == 0


def test_single_letter_corpus():
    assert not estimate_transition_matrix(["a", "q", "z"]).any()


def test_add_alpha_only_on_seen_rows():
    a = estimate_transition_matrix(["ab"], alpha=1.0)
    assert a[0].sum() == pytest.approx(1) and a[0, 1] == pytest.approx(2 / 27)
    assert a[1].sum() == 0


def test_initial_and_final():
    pi = estimate_initial_probs(["ab", "ba", "ac"])
    assert (pi[0], pi[1]) == pytest.approx((2 / 3, 1 / 3))
    assert estimate_initial_probs(["ab", "ac"])[0] == 1
    f = estimate_final_probs(["ab", "cb", "cd"])
    assert (f[1], f[3]) == pytest.approx((2 / 3, 1 / 3))
    assert estimate_final_probs(["ag", "bg"])[L("g")] == 1


def test_final_transition(caplog):
    ft = estimate_final_transition_matrix(["ab", "ac"])
    np.testing.assert_allclose(ft[0, :3], [0, 0.5, 0.5])
    assert ft[1:].sum() == 0
    ft = estimate_final_transition_matrix(["abc", "xbd", "q"])
    assert ft[L("b"), L("c")] == 0.5 and ft[L("a")].sum() == 0
    assert not estimate_final_transition_matrix(["a", "b"]).any()
    assert "no words of length" in caplog.text


def test_conditional_end_probs():
    m = fit_hmm(["ab", "bb"], end_model="conditional")
    # b appears 3 times, closes 2 words
    assert m.end_probs()[1] == pytest.approx(2 / 3)
    assert fit_hmm(["ab", "bb"]).end_probs()[1] == 1


def test_json_round_trip():
    m = fit_hmm(["hello", "help", "a"])
    back = HmmModel.from_json(m.to_json())
    for name in ("transition", "initial", "final_dist", "final_transition"):
        np.testing.assert_array_equal(getattr(back, name), getattr(m, name))


def _random_model(rng, n, zero_frac=0.2):
    def stoch(shape):
        p = rng.random(shape) * (rng.random(shape) > zero_frac)
        s = p.sum(axis=-1, keepdims=True)
        return np.divide(p, s, out=np.zeros_like(p), where=s > 0)

    return HmmModel(
        transition=stoch((n, n)),
        initial=stoch(n),
        final_dist=stoch(n),
        final_transition=stoch((n, n)),
        end_model="marginal",
        end_conditional=rng.random(n),
    )


def _oracle(model, emissions, mode):
    with np.errstate(divide="ignore"):
        log_e = np.log(emissions.T)
    tables = decode_tables(model, emissions.shape[1], mode)
    return oracles.viterbi_brute(*tables[:3], log_e, tables[3])


def test_viterbi_against_exhaustive_search():
    rng = np.random.default_rng(2024)
    for _ in range(300):
        n = int(rng.integers(1, 7))
        length = int(rng.integers(1, 5))
        model = _random_model(rng, n)
        emis = rng.random((n, length)) * (rng.random((n, length)) > 0.1)
        mode = int(rng.integers(1, 4))
        got = viterbi_decode(model, emis, mode)
        path, best = _oracle(model, emis, mode)
        if math.isinf(best):
            assert got.fallback
            assert got.letters == list(np.argmax(emis, axis=0))
        else:
            assert got.letters == path
            assert abs(got.log_likelihood - best) <= 1e-9
            assert path_score(model, emis, got.letters, mode) == pytest.approx(best, abs=1e-9)


def test_tie_rule_prefers_lower_letters():
    n = 3
    model = HmmModel(np.full((n, n), 1 / n), np.full(n, 1 / n), np.full(n, 1 / n), np.full((n, n), 1 / n))
    emis = np.ones((n, 3))
    for mode in (1, 2, 3):
        assert viterbi_decode(model, emis, mode).letters == [0, 0, 0]


def test_single_step_mode1(rng):
    model = _random_model(rng, 26, zero_frac=0)
    e = rng.random((26, 1))
    got = viterbi_decode(model, e, 1).letters
    assert got == [int(np.argmax(np.log(model.initial) + np.log(e[:, 0])))]


def test_uniform_model_is_per_column_argmax(rng):
    n = 26
    model = HmmModel(np.full((n, n), 1 / n), np.full(n, 1 / n), np.full(n, 1 / n), np.full((n, n), 1 / n))
    e = rng.random((n, 6))
    assert viterbi_decode(model, e, 1).letters == list(e.argmax(0))


def test_mode3_single_letter_uses_final_distribution(rng):
    model = _random_model(rng, 5, zero_frac=0)
    e = rng.random((5, 1))
    got = viterbi_decode(model, e, 3)
    ref = int(np.argmax(np.log(model.initial) + np.log(e[:, 0]) + np.log(model.final_dist)))
    assert got.letters == [ref]


def test_corrects_impossible_transition():
    # l never precedes c in this corpus, o does
    model = fit_hmm(["lo", "oc", "lol", "col", "loc"])
    e = np.full((26, 2), 1e-3)
    e[L("l"), 0] = 0.9
    e[L("c"), 1] = 0.5
    e[L("o"), 1] = 0.4
    base = list(e.argmax(0))
    assert base == [L("l"), L("c")]
    got = viterbi_decode(model, e, 1)
    assert got.letters == [L("l"), L("o")]
    path, best = _oracle(model, e, 1)
    assert got.letters == path


def test_one_hot_truth_is_kept():
    words = ["hello", "help", "lop"]
    model = fit_hmm(words)
    cols = [L(c) for w in words for c in w]
    e = np.zeros((26, len(cols)))
    e[cols, np.arange(len(cols))] = 1
    for mode in (1, 2, 3):
        dec = correct_words(model, e, [5, 4, 3], mode)
        assert hmm.flatten(dec).tolist() == cols


def test_length_mismatch():
    model = fit_hmm(["ab"])
    with pytest.raises(DecodeError):
        correct_words(model, np.ones((26, 3)), [2, 2])


@settings(max_examples=200, deadline=None)
@given(
    n=st.integers(1, 6),
    length=st.integers(1, 4),
    mode=st.sampled_from([1, 2, 3]),
    seed=st.integers(0, 2**32 - 1),
)
def test_property_decoded_score_is_maximal(n, length, mode, seed):
    rng = np.random.default_rng(seed)
    model = _random_model(rng, n)
    emis = rng.random((n, length))
    got = viterbi_decode(model, emis, mode)
    path, best = _oracle(model, emis, mode)
    if not math.isinf(best):
        assert got.letters == path and abs(got.log_likelihood - best) <= 1e-9


def test_full_split_statistics(full_data):
    from ocrhmm.dataset import group_words, split_dataset

    split = split_dataset(full_data.words, seed=0)
    model = fit_hmm(group_words(full_data, split, "train"))
    assert model.transition[0, 0] == 0
    assert model.initial.sum() == pytest.approx(1, abs=1e-12)
    assert model.final_dist.sum() == pytest.approx(1, abs=1e-12)
    # five letters close more than half of all words
    assert np.sort(model.final_dist)[::-1][:5].sum() > 0.5
    rows = model.final_transition.sum(axis=1)
    assert np.all(np.isclose(rows, 1) | (rows == 0))
