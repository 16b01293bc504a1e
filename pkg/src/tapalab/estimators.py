"""scikit-learn style wrappers around the attention score functions.

Both estimators take ``X`` of shape ``(L, 2*D)``: the first ``D`` columns are
the query rows, the last ``D`` the key rows. ``transform`` returns the
``(L, L)`` causal attention weights, ``score_matrix`` the raw scores with
``-inf`` on masked entries. Neither model has trainable state; ``fit`` only
validates hyper-parameters and records derived quantities, which keeps them
usable inside pipelines and ``clone``/``get_params`` machinery.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .attention import AttentionConfig, score_matrix, softmax_rows
from .encodings import PositionMap, RoPEParams, TAPAParams, rope_thetas
from .exceptions import ConfigurationError

__all__ = ["RoPEAttention", "TAPAAttention", "split_qk"]


def split_qk(X, head_dim: int):
    """Validate ``X`` and split it into ``(Q, K)``."""
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if X.shape[1] != 2 * head_dim:
        raise ConfigurationError(f"X has {X.shape[1]} columns, expected 2*head_dim = {2 * head_dim}")
    return X[:, :head_dim], X[:, head_dim:]


class _AttentionBase(TransformerMixin, BaseEstimator):
    def _config(self) -> AttentionConfig:
        raise NotImplementedError

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        self.n_features_in_ = 2 * self.head_dim
        if X is not None:
            split_qk(X, self.head_dim)
        return self

    def score_matrix(self, X, positions=None) -> np.ndarray:
        check_is_fitted(self)
        Q, K = split_qk(X, self.head_dim)
        return score_matrix(Q, K, self.config_, positions).values

    def transform(self, X, positions=None) -> np.ndarray:
        check_is_fitted(self)
        Q, K = split_qk(X, self.head_dim)
        return softmax_rows(score_matrix(Q, K, self.config_, positions)).values


class RoPEAttention(_AttentionBase):
    """Causal RoPE attention.

    Parameters
    ----------
    head_dim : int
        Even head dimension ``D``.
    theta0 : float
        Inverse base frequency, in ``(0, 1)``.
    position_scale : float
        Position interpolation factor; ``1.0`` means identity.
    """

    def __init__(self, head_dim=128, theta0=2e-6, position_scale=1.0):
        self.head_dim = head_dim
        self.theta0 = theta0
        self.position_scale = position_scale

    def _config(self):
        pmap = None if self.position_scale == 1.0 else PositionMap("interpolation", self.position_scale)
        return AttentionConfig("rope", rope=RoPEParams(self.head_dim, self.theta0), position_map=pmap)

    def fit(self, X=None, y=None):
        super().fit(X, y)
        self.frequencies_ = rope_thetas(self.config_.rope)
        return self


class TAPAAttention(_AttentionBase):
    """Causal token-aware phase attention (split form).

    Parameters
    ----------
    head_dim : int
    theta : float
        Fraction of coordinates in the amplitude segment.
    alpha : float
        Distance exponent in the phase.
    phase : {"quadratic_split", "linear"}
    """

    def __init__(self, head_dim=128, theta=0.5, alpha=0.1, phase="quadratic_split"):
        self.head_dim = head_dim
        self.theta = theta
        self.alpha = alpha
        self.phase = phase

    def _config(self):
        if self.phase == "general":
            raise ConfigurationError("TAPAAttention covers the split phase kinds")
        return AttentionConfig("tapa", tapa=TAPAParams(self.head_dim, self.theta, self.alpha, self.phase))

    def fit(self, X=None, y=None):
        super().fit(X, y)
        self.n_amplitude_ = self.config_.tapa.n_amp
        return self
