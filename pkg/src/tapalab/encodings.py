"""RoPE and TAPA score functions and position maps.

All angles use the ``2*pi`` convention: the ``d``-th RoPE slice is rotated
by ``2*pi*(m - n)*theta_d`` with ``theta_d = theta0**(2d/D)``.

TAPA splits ``q = (q_A, q_P)`` and ``k = (k_A, k_P)`` with the amplitude
segment taking the first ``theta*D`` coordinates::

    Attn = q_A.k_A / sqrt(theta D) * cos(2 pi |m-n|^alpha * q_P.k_P / sqrt((1-theta) D))
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DomainError
from .numeric import reduced_turns

__all__ = [
    "RoPEParams",
    "TAPAParams",
    "GeneralTAPA",
    "PositionMap",
    "PHASE_KINDS",
    "rope_theta_d",
    "rope_thetas",
    "ab_coefficients",
    "ab_arrays",
    "rope_score_complex",
    "rope_score_expanded",
    "rope_scores_batch",
    "apply_position_map",
    "distance_power",
    "split_matrices",
    "tapa_score_general",
    "tapa_score_split",
    "tapa_score",
    "tapa_scores_batch",
    "linear_phase",
]

PHASE_KINDS = ("quadratic_split", "linear", "general")


def _check_even_dim(D):
    if not isinstance(D, (int, np.integer)) or D < 2 or D % 2:
        raise ConfigurationError(f"head dimension D must be an even positive integer, got {D!r}")


@dataclass(frozen=True)
class RoPEParams:
    D: int
    theta0: float

    def __post_init__(self):
        _check_even_dim(self.D)
        if not 0.0 < self.theta0 < 1.0:
            raise ConfigurationError(f"theta0 must lie in (0, 1), got {self.theta0!r}")


@dataclass(frozen=True)
class TAPAParams:
    D: int
    theta: float = 0.5
    alpha: float = 0.1
    phase_kind: str = "quadratic_split"

    def __post_init__(self):
        _check_even_dim(self.D)
        if not 0.0 < self.theta < 1.0:
            raise ConfigurationError(f"theta must lie in (0, 1), got {self.theta!r}")
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha!r}")
        if self.phase_kind not in PHASE_KINDS:
            raise ConfigurationError(f"unknown phase kind {self.phase_kind!r}")
        width = self.theta * self.D
        if abs(width - round(width)) > 1e-9 or not 0 < round(width) < self.D:
            raise ConfigurationError(
                f"theta*D = {width} must be an integer strictly between 0 and D"
            )

    @property
    def n_amp(self) -> int:
        return int(round(self.theta * self.D))

    @property
    def n_phase(self) -> int:
        return self.D - self.n_amp


@dataclass(frozen=True, eq=False)
class GeneralTAPA:
    """TAPA with arbitrary amplitude matrix ``M`` and quadratic phase matrix ``N``."""

    M: np.ndarray
    N: np.ndarray
    alpha: float

    def __post_init__(self):
        M = np.asarray(self.M, dtype=np.float64)
        N = np.asarray(self.N, dtype=np.float64)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape != N.shape:
            raise ConfigurationError(f"M and N must be equal square matrices, got {M.shape} and {N.shape}")
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha!r}")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "N", N)

    @property
    def D(self) -> int:
        return self.M.shape[0]


@dataclass(frozen=True)
class PositionMap:
    """``identity`` leaves positions alone; ``interpolation`` divides by ``scale``."""

    kind: str = "identity"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("identity", "interpolation"):
            raise ConfigurationError(f"unknown position map {self.kind!r}")
        if not self.scale >= 1.0:
            raise ConfigurationError(f"interpolation scale must be >= 1, got {self.scale!r}")


def rope_theta_d(d: int, p: RoPEParams) -> float:
    if not 0 <= d <= p.D // 2 - 1:
        raise DomainError(f"slice index d={d} outside [0, {p.D // 2 - 1}]")
    return p.theta0 ** (2.0 * d / p.D)


def rope_thetas(p: RoPEParams) -> np.ndarray:
    return p.theta0 ** (2.0 * np.arange(p.D // 2) / p.D)


def _vec(x, D=None, name="vector"):
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional")
    if D is not None and v.shape[0] != D:
        raise DomainError(f"{name} has length {v.shape[0]}, expected {D}")
    return v


def _pair(q, k, D=None):
    q = _vec(q, D, "q")
    k = _vec(k, q.shape[0], "k")
    if q.shape[0] % 2:
        raise DomainError("vectors must have even length")
    return q, k


def ab_arrays(q, k):
    """Vectors of all ``A_d`` and ``B_d`` (last axis holds the coordinates)."""
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    if q.shape != k.shape or q.shape[-1] % 2:
        raise DomainError(f"q and k must share an even last dimension, got {q.shape} and {k.shape}")
    q0, q1 = q[..., 0::2], q[..., 1::2]
    k0, k1 = k[..., 0::2], k[..., 1::2]
    return q0 * k0 + q1 * k1, q0 * k1 - q1 * k0


def ab_coefficients(q, k, d: int):
    q, k = _pair(q, k)
    if not 0 <= d <= q.shape[0] // 2 - 1:
        raise DomainError(f"slice index d={d} outside [0, {q.shape[0] // 2 - 1}]")
    i, j = 2 * d, 2 * d + 1
    return q[i] * k[i] + q[j] * k[j], q[i] * k[j] - q[j] * k[i]


def apply_position_map(pos: float, pmap: PositionMap | None) -> float:
    if pmap is None or pmap.kind == "identity":
        return pos
    return pos / pmap.scale


def _relative(m, n, pmap):
    return apply_position_map(m, pmap) - apply_position_map(n, pmap)


def rope_score_complex(q, k, m, n, p: RoPEParams, pmap: PositionMap | None = None) -> float:
    """Score via the complexified slices ``Re sum q^C conj(k^C) e^{2 pi i (m-n) theta_d}``."""
    q, k = _pair(q, k, p.D)
    turns = reduced_turns(_relative(m, n, pmap), p.theta0, p.D)
    qc = q[0::2] + 1j * q[1::2]
    kc = k[0::2] + 1j * k[1::2]
    return float(np.sum(qc * np.conj(kc) * np.exp(2j * np.pi * turns)).real / math.sqrt(p.D))


def rope_score_expanded(q, k, m, n, p: RoPEParams, pmap: PositionMap | None = None) -> float:
    """Score via the real expansion ``sum A_d cos + B_d sin``."""
    q, k = _pair(q, k, p.D)
    turns = reduced_turns(_relative(m, n, pmap), p.theta0, p.D)
    A, B = ab_arrays(q, k)
    ang = 2 * np.pi * turns
    return float(np.sum(A * np.cos(ang) + B * np.sin(ang)) / math.sqrt(p.D))


def rope_scores_batch(Q, K, lam, p: RoPEParams) -> np.ndarray:
    """Row-wise RoPE scores of ``(n, D)`` arrays at relative distance(s) ``lam``.

    ``lam`` is a scalar or a length-``n`` array.
    """
    A, B = ab_arrays(Q, K)
    ang = 2 * np.pi * reduced_turns(lam, p.theta0, p.D)
    return np.sum(A * np.cos(ang) + B * np.sin(ang), axis=-1) / math.sqrt(p.D)


def distance_power(m, n, alpha):
    """``|m - n|**alpha`` with the convention ``0**alpha = 0``."""
    dist = np.abs(np.asarray(m, dtype=np.float64) - np.asarray(n, dtype=np.float64))
    out = np.where(dist > 0, dist ** alpha, 0.0)
    return float(out) if out.ndim == 0 else out


def split_matrices(t: TAPAParams):
    """Block matrices ``(M, N)`` turning the split form into the general form."""
    M = np.zeros((t.D, t.D))
    N = np.zeros((t.D, t.D))
    a = t.n_amp
    M[:a, :a] = np.eye(a) / math.sqrt(a)
    N[a:, a:] = np.eye(t.n_phase) / math.sqrt(t.n_phase)
    return M, N


def tapa_score_general(q, k, m, n, g: GeneralTAPA) -> float:
    q, k = _pair(q, k, g.D)
    phase = q @ g.N @ k
    return float((q @ g.M @ k) * math.cos(2 * math.pi * distance_power(m, n, g.alpha) * phase))


def _segments(q, k, t):
    a = t.n_amp
    return q[..., :a], k[..., :a], q[..., a:], k[..., a:]


def linear_phase(q, k, t: TAPAParams) -> float:
    """Linear phase: sum of both phase segments over ``sqrt((1-theta) D)``."""
    q, k = _pair(q, k, t.D)
    _, _, qp, kp = _segments(q, k, t)
    return float((qp.sum() + kp.sum()) / math.sqrt(t.n_phase))


def tapa_score_split(q, k, m, n, t: TAPAParams) -> float:
    q, k = _pair(q, k, t.D)
    qa, ka, qp, kp = _segments(q, k, t)
    amp = qa @ ka / math.sqrt(t.n_amp)
    phase = qp @ kp / math.sqrt(t.n_phase)
    return float(amp * math.cos(2 * math.pi * distance_power(m, n, t.alpha) * phase))


def tapa_score(q, k, m, n, t: TAPAParams) -> float:
    """Dispatch on ``t.phase_kind`` (``quadratic_split`` or ``linear``)."""
    if t.phase_kind == "quadratic_split":
        return tapa_score_split(q, k, m, n, t)
    if t.phase_kind == "linear":
        q, k = _pair(q, k, t.D)
        qa, ka, _, _ = _segments(q, k, t)
        amp = qa @ ka / math.sqrt(t.n_amp)
        return float(amp * math.cos(2 * math.pi * distance_power(m, n, t.alpha) * linear_phase(q, k, t)))
    raise ConfigurationError("phase_kind 'general' needs a GeneralTAPA; use tapa_score_general")


def tapa_scores_batch(Q, K, dist, t: TAPAParams) -> np.ndarray:
    """Row-wise split-form scores; ``dist`` is a scalar or per-row distance."""
    Q = np.asarray(Q, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    qa, ka, qp, kp = _segments(Q, K, t)
    amp = np.einsum("ij,ij->i", qa, ka) / math.sqrt(t.n_amp)
    if t.phase_kind == "linear":
        phase = (qp.sum(axis=1) + kp.sum(axis=1)) / math.sqrt(t.n_phase)
    elif t.phase_kind == "quadratic_split":
        phase = np.einsum("ij,ij->i", qp, kp) / math.sqrt(t.n_phase)
    else:
        raise ConfigurationError("batch scoring supports the split phase kinds only")
    r = distance_power(dist, 0.0, t.alpha)
    return amp * np.cos(2 * np.pi * r * phase)
