import itertools
import math

import numpy as np
import pytest

from emocause.corpus import Instance, Vocabulary
from emocause.embeddings import EmbeddingMatrix
from emocause.memnet import (MemnetParams, attention_scores, memnet_backward,
                             memnet_forward, memory_read, softmax_norm)


def small_params(columns, head, bias=0.0, hops=1):
    """Params over an explicit embedding table given as a list of columns."""
    values = np.asarray(columns, dtype=np.float64).T  # (d, V)
    vocab = Vocabulary([f"w{i}" for i in range(values.shape[1])], oov_id=0)
    emb = EmbeddingMatrix(values, values.shape[0], vocab)
    return MemnetParams(embedding=emb, head_weights=np.asarray(head, dtype=np.float64),
                        bias=bias, hops=hops)


def instance(token_ids, emotion_word_id, distance=0, label=False):
    return Instance(doc_id="t", clause_index=0, token_ids=tuple(token_ids),
                    emotion_word_id=emotion_word_id, distance=distance, label=label)


class TestAttentionScores:
    def test_hand_computed_values(self):
        scores = attention_scores([[1.0, 2.0], [3.0, 4.0]], [1.0, 1.0])
        assert np.array_equal(scores, [3.0, 7.0])

    def test_orthogonal_embedding_scores_zero(self):
        scores = attention_scores([[1.0, 0.0], [0.0, 1.0]], [0.0, 2.0])
        assert scores[0] == 0.0

    def test_linearity_in_query(self):
        emb = np.array([[0.5, -1.0], [2.0, 0.25]])
        q = np.array([0.5, 1.5])
        assert np.allclose(attention_scores(emb, 3.0 * q), 3.0 * attention_scores(emb, q))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            attention_scores([[1.0, 2.0]], [1.0, 2.0, 3.0])


class TestSoftmaxNorm:
    def test_equal_scores_give_uniform_attention(self):
        for k in (1, 2, 5, 9):
            a = softmax_norm(np.full(k, 0.7))
            assert np.allclose(a, 1.0 / k)

    def test_closed_form_quarter_three_quarters(self):
        a = softmax_norm([0.0, math.log(3.0)])
        assert a == pytest.approx([0.25, 0.75], rel=1e-12)

    def test_large_scores_do_not_overflow(self):
        a = softmax_norm([1000.0, 1000.0])
        assert np.array_equal(a, [0.5, 0.5])

    def test_shift_invariance(self, rng):
        for _ in range(200):
            m = rng.normal(size=rng.integers(1, 12))
            c = rng.normal() * 50.0
            assert np.max(np.abs(softmax_norm(m + c) - softmax_norm(m))) < 1e-9

    def test_normalization_bounds(self, rng):
        for _ in range(500):
            a = softmax_norm(rng.normal(scale=5.0, size=rng.integers(1, 20)))
            assert abs(a.sum() - 1.0) < 1e-9
            assert np.all(a >= 0.0) and np.all(a <= 1.0)

    def test_rejects_non_finite_scores(self):
        with pytest.raises(ValueError):
            softmax_norm([np.nan, 0.0])


class TestMemoryRead:
    def test_single_word_adds_query(self):
        out = memory_read([[1.0, 2.0]], [1.0], [0.5, 0.5])
        assert np.array_equal(out, [1.5, 2.5])

    def test_one_hot_attention_selects_word(self):
        emb = [[1.0, 0.0], [0.0, 1.0], [5.0, 5.0]]
        out = memory_read(emb, [0.0, 0.0, 1.0], [1.0, -1.0])
        assert np.array_equal(out, [6.0, 4.0])

    def test_uniform_attention_over_identical_embeddings(self):
        # k = 4 keeps 1/k and the partial sums exactly representable
        e = np.array([0.25, -2.0, 8.0])
        out = memory_read([e, e, e, e], [0.25] * 4, np.zeros(3))
        assert np.array_equal(out, e)

    def test_rejects_unnormalized_attention(self):
        with pytest.raises(ValueError):
            memory_read([[1.0, 0.0]], [0.4], [0.0, 0.0])


class TestMemnetForward:
    def test_zero_head_gives_half(self):
        params = small_params([[0.3, -0.7], [1.0, 2.0], [0.1, 0.4]], head=[0.0, 0.0, 0.0])
        p, _ = memnet_forward(instance([1, 2], 0, distance=3), params)
        assert p == 0.5

    def test_matches_scalar_oracle(self):
        # independently hand-computed forward pass, d=2, k=2, one hop:
        # e1=(0.1,0.2) e2=(0.3,-0.1) E=(0.2,0.1) w=(0.5,-0.4,0.3) bias=0.1 dist=-1
        params = small_params([[0.2, 0.1], [0.1, 0.2], [0.3, -0.1]],
                              head=[0.5, -0.4, 0.3], bias=0.1, hops=1)
        p, trace = memnet_forward(instance([1, 2], 0, distance=-1), params)
        assert trace.scores[0] == pytest.approx([0.04, 0.05], rel=1e-12)
        assert p == pytest.approx(0.4851418746895531, rel=1e-12)

    def test_output_invariant_under_token_permutations(self, rng):
        for k in (2, 3, 4, 5):
            columns = rng.uniform(-0.8, 0.8, size=(k + 2, 3))
            params = small_params(columns, head=rng.uniform(-1, 1, 4), bias=0.2, hops=3)
            tokens = list(range(1, k + 1))
            base, _ = memnet_forward(instance(tokens, 0, distance=1), params)
            for perm in itertools.permutations(tokens):
                p, _ = memnet_forward(instance(perm, 0, distance=1), params)
                # mathematically identical; summation order may shift last ulps
                assert abs(p - base) < 1e-12

    def test_first_hop_trace_matches_single_hop_model(self):
        columns = [[0.4, -0.2], [0.3, 0.9], [-0.5, 0.1], [0.2, 0.2]]
        deep = small_params(columns, head=[0.1, 0.2, 0.3], bias=0.05, hops=3)
        shallow = small_params(columns, head=[0.1, 0.2, 0.3], bias=0.05, hops=1)
        inst = instance([1, 2, 3], 0, distance=-2)
        _, t_deep = memnet_forward(inst, deep)
        _, t_shallow = memnet_forward(inst, shallow)
        assert np.array_equal(t_deep.scores[0], t_shallow.scores[0])
        assert np.array_equal(t_deep.attention[0], t_shallow.attention[0])
        assert np.array_equal(t_deep.outputs[0], t_shallow.outputs[0])

    def test_empty_clause_rejected(self):
        params = small_params([[0.1, 0.1]], head=[0.0, 0.0, 0.0])
        with pytest.raises(ValueError, match="empty clause"):
            memnet_forward(instance([], 0), params)

    def test_hop_count_must_be_positive(self):
        with pytest.raises(ValueError):
            small_params([[0.1, 0.1]], head=[0.0, 0.0, 0.0], hops=0)


class TestMemnetBackward:
    def test_bias_gradient_is_probability_minus_label(self):
        params = small_params([[0.3, -0.7], [1.0, 2.0]], head=[0.0, 0.0, 0.0])
        grads = memnet_backward(instance([1], 0, distance=0), params, label=0.5)
        assert grads.bias == 0.0
        grads = memnet_backward(instance([1], 0, distance=0), params, label=1)
        assert grads.bias == pytest.approx(-0.5)

    def test_matches_central_finite_differences(self, rng):
        from emocause.training import gradient_check
        for hops in (1, 2, 3):
            columns = rng.uniform(-0.5, 0.5, size=(5, 4))
            params = small_params(columns, head=rng.uniform(-0.5, 0.5, 5), bias=0.1, hops=hops)
            inst = instance([1, 2, 3, 2], 4, distance=-1, label=True)
            report = gradient_check("basic", inst, params)
            assert report.passed, report.block_errors

    def test_freeze_flag_zeroes_embedding_gradients(self):
        params = small_params([[0.3, -0.7], [1.0, 2.0]], head=[0.5, 0.5, 0.5], bias=0.1)
        grads = memnet_backward(instance([1], 0, distance=2), params, label=1,
                                freeze_embeddings=True)
        assert grads.embedding
        for g in grads.embedding.values():
            assert np.all(g == 0.0)
        assert np.any(grads.head_weights != 0.0)

    def test_repeated_token_gradients_accumulate(self):
        params = small_params([[0.3, -0.7], [1.0, 2.0]], head=[0.5, -0.5, 0.25], bias=0.0)
        grads_once = memnet_backward(instance([1], 0), params, label=1)
        grads_twice = memnet_backward(instance([1, 1], 0), params, label=1)
        assert set(grads_twice.embedding) == {0, 1}
        # two identical positions read the same column; its gradient is a sum
        assert grads_twice.embedding[1].shape == grads_once.embedding[1].shape
