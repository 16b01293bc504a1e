import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from tapalab.attention import AttentionConfig, attention_weights, score_matrix
from tapalab.encodings import PositionMap, RoPEParams, TAPAParams
from tapalab.estimators import RoPEAttention, TAPAAttention, split_qk
from tapalab.exceptions import ConfigurationError


@pytest.fixture
def X():
    return np.random.default_rng(0).standard_normal((6, 16))


def test_get_params_and_clone():
    est = TAPAAttention(head_dim=8, theta=0.25, alpha=0.3)
    assert est.get_params() == {"head_dim": 8, "theta": 0.25, "alpha": 0.3, "phase": "quadratic_split"}
    c = clone(est)
    assert c.get_params() == est.get_params() and c is not est
    est.set_params(alpha=0.2)
    assert est.alpha == 0.2


def test_rope_transform_matches_functional(X):
    est = RoPEAttention(head_dim=8, theta0=1e-3).fit(X)
    assert est.n_features_in_ == 16 and est.frequencies_.shape == (4,)
    cfg = AttentionConfig("rope", rope=RoPEParams(8, 1e-3))
    assert np.array_equal(est.transform(X), attention_weights(X[:, :8], X[:, 8:], cfg))
    W = est.fit_transform(X)
    assert np.allclose(W.sum(axis=1), 1.0, atol=1e-12)


def test_rope_interpolation(X):
    est = RoPEAttention(head_dim=8, theta0=1e-3, position_scale=2.0).fit(X)
    cfg = AttentionConfig("rope", rope=RoPEParams(8, 1e-3), position_map=PositionMap("interpolation", 2.0))
    assert np.array_equal(est.score_matrix(X), score_matrix(X[:, :8], X[:, 8:], cfg).values)


def test_tapa_positions_and_fitted_attrs(X):
    est = TAPAAttention(head_dim=8).fit(X)
    assert est.n_amplitude_ == 4
    pos = np.array([0.0, 3.0, 9.0, 100.0, 101.0, 5000.0])
    cfg = AttentionConfig("tapa", tapa=TAPAParams(8, 0.5, 0.1))
    assert np.array_equal(est.score_matrix(X, pos), score_matrix(X[:, :8], X[:, 8:], cfg, pos).values)


def test_errors(X):
    with pytest.raises(NotFittedError):
        RoPEAttention(head_dim=8).transform(X)
    with pytest.raises(ConfigurationError):
        RoPEAttention(head_dim=4).fit(X)
    with pytest.raises(ConfigurationError):
        TAPAAttention(head_dim=8, phase="general").fit(X)
    with pytest.raises(ConfigurationError):
        TAPAAttention(head_dim=8, theta=0.3).fit()
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        split_qk(bad, 8)
