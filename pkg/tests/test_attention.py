import math

import numpy as np
import pytest

from tapalab.attention import (
    AttentionConfig,
    ScoreMatrix,
    attention_weights,
    finite_difference_grad,
    gradient_relative_error,
    run_gradcheck,
    score_matrix,
    softmax_rows,
    tapa_score_grad,
)
from tapalab.encodings import RoPEParams, TAPAParams, rope_score_expanded, tapa_score
from tapalab.exceptions import ConfigurationError, DomainError

ROPE = AttentionConfig("rope", rope=RoPEParams(2, 0.1))
TAPA = AttentionConfig("tapa", tapa=TAPAParams(4, 0.5, 0.1))


def _row(values, mask=None):
    v = np.atleast_2d(np.asarray(values, dtype=float))
    m = np.zeros_like(v, dtype=bool) if mask is None else np.atleast_2d(mask)
    return ScoreMatrix(v, m)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        AttentionConfig("alibi")
    with pytest.raises(ConfigurationError):
        AttentionConfig("tapa", rope=RoPEParams(4, 0.1))
    assert TAPA.label == "tapa" and TAPA.D == 4


def test_single_token_self_score():
    q = np.array([[1.5, -2.0]])
    k = np.array([[0.5, 1.0]])
    s = score_matrix(q, k, ROPE)
    assert s.values.shape == (1, 1)
    assert s.values[0, 0] == pytest.approx((q[0] @ k[0]) / math.sqrt(2), abs=1e-15)


def test_small_matrix_equals_scalar_ops():
    Q = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 1.0]])
    K = np.array([[2.0, 0.0], [1.0, 1.0], [-1.0, 2.0]])
    s = score_matrix(Q, K, ROPE)
    for m in range(3):
        for n in range(3):
            if n > m:
                assert s.mask[m, n] and s.values[m, n] == -np.inf
            else:
                assert s.values[m, n] == rope_score_expanded(Q[m], K[n], m, n, ROPE.rope)


def test_rope_matrix_shift_invariant():
    rng = np.random.default_rng(0)
    Q, K = rng.standard_normal((5, 8)), rng.standard_normal((5, 8))
    cfg = AttentionConfig("rope", rope=RoPEParams(8, 1e-3))
    pos = np.arange(5.0)
    assert np.array_equal(score_matrix(Q, K, cfg, pos).values, score_matrix(Q, K, cfg, pos + 7).values)


def test_tapa_matrix_uses_scalar_score():
    rng = np.random.default_rng(1)
    Q, K = rng.standard_normal((4, 4)), rng.standard_normal((4, 4))
    pos = np.array([0.0, 10.0, 50.0, 1000.0])
    s = score_matrix(Q, K, TAPA, pos)
    assert s.values[3, 1] == tapa_score(Q[3], K[1], 1000.0, 10.0, TAPA.tapa)


def test_score_matrix_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        score_matrix(np.ones((3, 4)), np.ones((3, 4)), ROPE)
    with pytest.raises(ConfigurationError):
        score_matrix(np.ones((3, 2)), np.ones((2, 2)), ROPE)
    with pytest.raises(ConfigurationError):
        score_matrix(np.ones((2, 2)), np.ones((2, 2)), ROPE, positions=[0.0])
    with pytest.raises(ConfigurationError):
        score_matrix(np.array([[np.nan, 0.0]]), np.ones((1, 2)), ROPE)


def test_softmax_examples():
    assert np.allclose(softmax_rows(_row([0.0, 0.0])).values, [[0.5, 0.5]], atol=1e-15)
    assert np.allclose(softmax_rows(_row([1000.0, 1000.0])).values, [[0.5, 0.5]], atol=1e-15)
    assert np.allclose(softmax_rows(_row([0.0, math.log(3)])).values, [[0.25, 0.75]], atol=1e-15)
    with pytest.raises(DomainError):
        softmax_rows(_row([1.0, 2.0], [True, True]))


def test_rows_sum_to_one_and_masked_zero():
    rng = np.random.default_rng(2)
    Q, K = 30 * rng.standard_normal((12, 8)), 30 * rng.standard_normal((12, 8))
    W = attention_weights(Q, K, AttentionConfig("rope", rope=RoPEParams(8, 1e-4)))
    assert np.all(np.abs(W.sum(axis=1) - 1) <= 1e-12)
    assert np.all(W[np.triu_indices(12, 1)] == 0)


def test_causality_under_perturbation():
    rng = np.random.default_rng(3)
    Q, K = rng.standard_normal((6, 4)), rng.standard_normal((6, 4))
    W = attention_weights(Q, K, TAPA)
    K2 = K.copy()
    K2[4:] += 5.0
    W2 = attention_weights(Q, K2, TAPA)
    assert np.array_equal(W[:4], W2[:4])


def test_grad_zero_distance_has_no_phase_gradient():
    t = TAPAParams(8, 0.5, 0.2)
    rng = np.random.default_rng(4)
    q, k = rng.standard_normal(8), rng.standard_normal(8)
    g = tapa_score_grad(q, k, 12, 12, t)
    assert np.all(g.d_q[4:] == 0) and np.all(g.d_k[4:] == 0)
    assert np.allclose(g.d_q[:4], k[:4] / 2)


def test_grad_vanishing_amplitude():
    t = TAPAParams(8, 0.5, 0.2)
    rng = np.random.default_rng(5)
    q, k = rng.standard_normal(8), rng.standard_normal(8)
    q[:4] = 0
    g = tapa_score_grad(q, k, 100, 3, t)
    phi = 2 * math.pi * 97**0.2 * (q[4:] @ k[4:]) / 2
    assert np.allclose(g.d_q[:4], k[:4] * math.cos(phi) / 2, atol=1e-15)
    assert np.all(g.d_q[4:] == 0) and np.all(g.d_k[4:] == 0)


def test_grad_matches_finite_differences():
    t = TAPAParams(16, 0.25, 0.3)
    rng = np.random.default_rng(6)
    q, k = rng.standard_normal(16), rng.standard_normal(16)
    an = tapa_score_grad(q, k, 700, 20, t)
    fd = finite_difference_grad(lambda x, y: tapa_score(x, y, 700, 20, t), q, k)
    assert gradient_relative_error(an, fd) <= 1e-5
    with pytest.raises(ConfigurationError):
        tapa_score_grad(q, k, 1, 0, TAPAParams(16, 0.25, 0.3, "linear"))


def test_run_gradcheck_deterministic():
    a = run_gradcheck(20, seed=3)
    b = run_gradcheck(20, seed=3)
    assert a == b
    assert max(r.max_rel_err for r in a) <= 1e-5
    with pytest.raises(ConfigurationError):
        run_gradcheck(0)
