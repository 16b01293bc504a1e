"""Causal single-head attention scores, masked softmax and TAPA gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .encodings import (
    GeneralTAPA,
    PositionMap,
    RoPEParams,
    TAPAParams,
    distance_power,
    rope_score_expanded,
    tapa_score,
    tapa_score_general,
)
from .exceptions import ConfigurationError, DomainError
from .numeric import rng_for

__all__ = [
    "AttentionConfig",
    "ScoreMatrix",
    "ScoreGradient",
    "GradcheckResult",
    "score_matrix",
    "softmax_rows",
    "attention_weights",
    "tapa_score_grad",
    "finite_difference_grad",
    "gradient_relative_error",
    "run_gradcheck",
    "GRAD_STEP",
    "GRAD_TOL",
]

GRAD_STEP = 1e-5
GRAD_TOL = 1e-5
# below this magnitude the relative tolerance degrades to an absolute one
# of GRAD_TOL * _REL_FLOOR = 1e-8
_REL_FLOOR = 1e-3


@dataclass(frozen=True)
class AttentionConfig:
    """Method tag plus the parameters of one score function.

    ``method`` is ``"rope"`` (needs ``rope``), ``"tapa"`` (needs ``tapa``)
    or ``"tapa_general"`` (needs ``general``).
    """

    method: str
    rope: RoPEParams | None = None
    tapa: TAPAParams | None = None
    general: GeneralTAPA | None = None
    position_map: PositionMap | None = None
    label: str = ""

    def __post_init__(self):
        need = {"rope": self.rope, "tapa": self.tapa, "tapa_general": self.general}
        if self.method not in need:
            raise ConfigurationError(f"unknown attention method {self.method!r}")
        if need[self.method] is None:
            raise ConfigurationError(f"method {self.method!r} requires its parameter block")
        if not self.label:
            object.__setattr__(self, "label", self.method)

    @property
    def D(self) -> int:
        return {"rope": self.rope, "tapa": self.tapa, "tapa_general": self.general}[self.method].D

    def score(self, q, k, m, n) -> float:
        if self.method == "rope":
            return rope_score_expanded(q, k, m, n, self.rope, self.position_map)
        if self.method == "tapa":
            return tapa_score(q, k, m, n, self.tapa)
        return tapa_score_general(q, k, m, n, self.general)


@dataclass
class ScoreMatrix:
    """``values[m, n]`` with ``mask[m, n] = True`` where the entry is excluded.

    Masked entries hold ``-inf`` before softmax and ``0`` after.
    """

    values: np.ndarray
    mask: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ScoreGradient:
    d_q: np.ndarray
    d_k: np.ndarray


def _check_inputs(Q, K, positions, D):
    Q = np.asarray(Q, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    if Q.ndim != 2 or Q.shape != K.shape:
        raise ConfigurationError(f"Q and K must be L x D matrices of equal shape, got {Q.shape} and {K.shape}")
    if Q.shape[0] < 1:
        raise ConfigurationError("sequence length must be at least 1")
    if Q.shape[1] != D:
        raise ConfigurationError(f"row width {Q.shape[1]} does not match configured D={D}")
    if not (np.isfinite(Q).all() and np.isfinite(K).all()):
        raise ConfigurationError("Q and K must be finite")
    pos = np.arange(Q.shape[0], dtype=np.float64) if positions is None else np.asarray(positions, dtype=np.float64)
    if pos.shape != (Q.shape[0],):
        raise ConfigurationError(f"need {Q.shape[0]} positions, got shape {pos.shape}")
    return Q, K, pos


def score_matrix(Q, K, config: AttentionConfig, positions=None) -> ScoreMatrix:
    """Pairwise pre-softmax scores with causal masking (``n > m`` excluded)."""
    Q, K, pos = _check_inputs(Q, K, positions, config.D)
    L = Q.shape[0]
    mask = np.triu(np.ones((L, L), dtype=bool), k=1)
    values = np.full((L, L), -np.inf)
    for m in range(L):
        for n in range(m + 1):
            values[m, n] = config.score(Q[m], K[n], pos[m], pos[n])
    return ScoreMatrix(values, mask)


def softmax_rows(s: ScoreMatrix) -> ScoreMatrix:
    """Max-subtracted softmax over the unmasked entries of each row."""
    keep = ~s.mask
    if not keep.any(axis=1).all():
        raise DomainError("softmax over a fully masked row")
    x = np.where(keep, s.values, -np.inf)
    x = x - x.max(axis=1, keepdims=True)
    e = np.where(keep, np.exp(x), 0.0)
    return ScoreMatrix(e / e.sum(axis=1, keepdims=True), s.mask.copy())


def attention_weights(Q, K, config: AttentionConfig, positions=None) -> np.ndarray:
    return softmax_rows(score_matrix(Q, K, config, positions)).values


def tapa_score_grad(q, k, m, n, t: TAPAParams) -> ScoreGradient:
    """Analytic partials of the split-form TAPA score w.r.t. ``q`` and ``k``."""
    if t.phase_kind != "quadratic_split":
        raise ConfigurationError("analytic gradient is implemented for the quadratic split form")
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    if q.shape != (t.D,) or k.shape != (t.D,):
        raise DomainError(f"q and k must have length {t.D}")
    a = t.n_amp
    sa, sp = math.sqrt(a), math.sqrt(t.n_phase)
    amp = q[:a] @ k[:a] / sa
    w = 2 * math.pi * distance_power(m, n, t.alpha) / sp
    phi = w * (q[a:] @ k[a:])
    c, s = math.cos(phi), math.sin(phi)
    d_q = np.concatenate([k[:a] * c / sa, -amp * s * w * k[a:]])
    d_k = np.concatenate([q[:a] * c / sa, -amp * s * w * q[a:]])
    return ScoreGradient(d_q, d_k)


def finite_difference_grad(f, q, k, h: float = GRAD_STEP) -> ScoreGradient:
    """Central differences of the scalar ``f(q, k)`` in every coordinate."""
    q = np.array(q, dtype=np.float64)
    k = np.array(k, dtype=np.float64)
    out = []
    for v, call in ((q, lambda x: f(x, k)), (k, lambda x: f(q, x))):
        g = np.empty_like(v)
        for i in range(v.size):
            up, dn = v.copy(), v.copy()
            up[i] += h
            dn[i] -= h
            g[i] = (call(up) - call(dn)) / (2 * h)
        out.append(g)
    return ScoreGradient(*out)


def gradient_relative_error(analytic: ScoreGradient, numeric: ScoreGradient) -> float:
    """Max over coordinates of ``|a - n| / max(|a|, |n|, 1e-3)``."""
    a = np.concatenate([analytic.d_q, analytic.d_k])
    n = np.concatenate([numeric.d_q, numeric.d_k])
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), _REL_FLOOR)
    return float(np.max(np.abs(a - n) / scale))


@dataclass(frozen=True)
class GradcheckResult:
    trial: int
    D: int
    theta: float
    alpha: float
    m: int
    n: int
    max_rel_err: float


def _random_config(rng):
    D = int(rng.choice([4, 8, 16, 32, 64]))
    a = int(rng.integers(1, D))
    t = TAPAParams(D=D, theta=a / D, alpha=float(rng.uniform(0.05, 0.5)))
    n = int(rng.integers(0, 1024))
    m = n + int(rng.integers(0, 1025))
    if rng.random() < 0.5:
        m, n = n, m
    q = rng.standard_normal(D)
    k = rng.standard_normal(D)
    return t, q, k, m, n


def run_gradcheck(n_trials: int, seed: int = 0, h: float = GRAD_STEP) -> list[GradcheckResult]:
    """Compare analytic and central-difference gradients on random configurations."""
    if n_trials < 1:
        raise ConfigurationError("need at least one gradient-check trial")
    results = []
    for trial in range(n_trials):
        t, q, k, m, n = _random_config(rng_for(seed, 7, trial))
        an = tapa_score_grad(q, k, m, n, t)
        fd = finite_difference_grad(lambda x, y: tapa_score(x, y, m, n, t), q, k, h)
        results.append(GradcheckResult(trial, t.D, t.theta, t.alpha, m, n, gradient_relative_error(an, fd)))
    return results
