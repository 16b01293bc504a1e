"""Numeric kernels shared by every other module.

Three things live here:

* a seeded linear-Gaussian sampler of query/key pairs with prescribed
  per-pair moments ``E[A_d] = mu0`` and ``E[B_d] = nu0``;
* summary statistics for Monte Carlo output;
* argument reduction for ``cos(2*pi*lam*theta_d)`` where ``lam*theta_d`` is
  too large for float64 to carry its fractional part.

Random streams are keyed by ``(seed, stream_index, chunk)`` through
:class:`numpy.random.SeedSequence`, so a Monte Carlo run split into chunks
gives bit-identical output no matter how many workers evaluate the chunks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import mpmath
import numpy as np

from .exceptions import ConfigurationError, InsufficientDataError

__all__ = [
    "SamplerSpec",
    "SummaryStats",
    "rng_for",
    "sample_pair",
    "sample_pairs",
    "sample_tapa_pairs",
    "sampler_sigma0_sq",
    "pair_moments",
    "summarize",
    "draw_chunked",
    "reduced_turns",
    "EXTENDED_THRESHOLD",
    "DEFAULT_CHUNK",
]

Z95 = 1.96
DEFAULT_CHUNK = 1 << 15
_U64 = (1 << 64) - 1

# float64 carries ~2**-53 relative error in lam*theta_d; above 2**20 the
# absolute phase error would exceed ~1e-10 turns, so switch to mpmath.
EXTENDED_THRESHOLD = float(1 << 20)
_GUARD_BITS = 64


@dataclass(frozen=True)
class SamplerSpec:
    """Parameters of the query/key pair sampler.

    ``q`` is standard normal in dimension ``D`` and
    ``k = (mu0/2) q + (nu0/2) R(q) + b * eps`` where ``R`` rotates each
    coordinate pair ``(x, y) -> (-y, x)`` and ``eps`` is independent
    standard normal noise.
    """

    D: int
    mu0: float = 0.0
    nu0: float = 0.0
    b: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.D, (int, np.integer)) or self.D < 4 or self.D % 2:
            raise ConfigurationError(f"D must be an even integer >= 4, got {self.D!r}")
        if not (self.b > 0 and math.isfinite(self.b)):
            raise ConfigurationError(f"noise scale b must be positive, got {self.b!r}")
        if not (math.isfinite(self.mu0) and math.isfinite(self.nu0)):
            raise ConfigurationError("mu0 and nu0 must be finite")
        if not 0 <= int(self.seed) <= _U64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")


@dataclass(frozen=True)
class SummaryStats:
    n: int
    mean: float
    variance: float
    ci95_half_width: float

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the stream addressed by ``keys`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def _linear_gaussian(rng, n, dim, mu0, nu0, b):
    q = rng.standard_normal((n, dim))
    eps = rng.standard_normal((n, dim))
    k = b * eps
    if mu0:
        k += 0.5 * mu0 * q
    if nu0:
        pairs = dim // 2 * 2
        rot = np.zeros_like(q)
        rot[:, 0:pairs:2] = -q[:, 1:pairs:2]
        rot[:, 1:pairs:2] = q[:, 0:pairs:2]
        k += 0.5 * nu0 * rot
    return q, k


def sample_pairs(spec: SamplerSpec, n: int, stream_index: int = 0, chunk: int = 0):
    """Draw ``n`` query/key pairs; returns two ``(n, D)`` arrays."""
    if stream_index < 0 or chunk < 0:
        raise ConfigurationError("stream_index and chunk must be non-negative")
    rng = rng_for(spec.seed, stream_index, chunk)
    return _linear_gaussian(rng, n, spec.D, spec.mu0, spec.nu0, spec.b)


def sample_pair(spec: SamplerSpec, stream_index: int = 0):
    """Single ``(q, k)`` pair from stream ``stream_index``."""
    q, k = sample_pairs(spec, 1, stream_index)
    return q[0], k[0]


def sample_tapa_pairs(spec: SamplerSpec, n_amp: int, n: int, stream_index: int = 0, chunk: int = 0):
    """Pairs for TAPA experiments.

    The first ``n_amp`` coordinates (amplitude segment) follow the
    linear-Gaussian construction of ``spec``; the remaining phase
    coordinates of ``q`` and ``k`` are i.i.d. standard normal and
    independent of everything else.
    """
    if not 0 < n_amp < spec.D:
        raise ConfigurationError(f"amplitude width must lie in (0, D), got {n_amp}")
    rng = rng_for(spec.seed, stream_index, chunk)
    qa, ka = _linear_gaussian(rng, n, n_amp, spec.mu0, spec.nu0, spec.b)
    qp = rng.standard_normal((n, spec.D - n_amp))
    kp = rng.standard_normal((n, spec.D - n_amp))
    return np.hstack([qa, qp]), np.hstack([ka, kp])


def sampler_sigma0_sq(spec: SamplerSpec) -> float:
    """Per-coordinate second moment ``E[(q_i k_i)^2]`` of the sampler.

    With ``a = mu0/2`` and ``c = nu0/2``, each product is
    ``a q_i^2 -/+ c q_i q_j + b q_i eps_i`` whose second moment is
    ``3a^2 + c^2 + b^2`` (odd Gaussian moments vanish).
    """
    a, c = 0.5 * spec.mu0, 0.5 * spec.nu0
    return 3.0 * a * a + c * c + spec.b**2


def pair_moments(spec: SamplerSpec):
    """Exact ``(Var A_d, Var B_d, Cov(A_d, B_d))`` for one coordinate pair."""
    b2 = spec.b**2
    return spec.mu0**2 + 2 * b2, spec.nu0**2 + 2 * b2, spec.mu0 * spec.nu0


def summarize(samples) -> SummaryStats:
    x = np.asarray(samples, dtype=np.float64).ravel()
    n = x.size
    if n < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {n}")
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    return SummaryStats(n, mean, var, Z95 * math.sqrt(var / n))


def draw_chunked(
    fn: Callable[[int, int], np.ndarray],
    n_samples: int,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> np.ndarray:
    """Evaluate ``fn(chunk_index, size)`` over fixed chunks and concatenate in order.

    Chunk boundaries depend only on ``n_samples`` and ``chunk_size``, so the
    output is identical for any ``workers``.
    """
    sizes = [chunk_size] * (n_samples // chunk_size)
    if n_samples % chunk_size:
        sizes.append(n_samples % chunk_size)
    jobs = list(enumerate(sizes))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    else:
        parts = [fn(i, s) for i, s in jobs]
    if not parts:
        return np.empty(0)
    return np.concatenate(parts)


def _extended_turn(lam: float, theta0: float, d: int, D: int, magnitude: float) -> float:
    bits = _GUARD_BITS + 53 + max(0, math.frexp(magnitude)[1])
    with mpmath.workprec(bits):
        x = mpmath.mpf(lam) * mpmath.power(mpmath.mpf(theta0), mpmath.mpf(2 * d) / D)
        return float(x - mpmath.nint(x))


def reduced_turns(lam, theta0: float, D: int) -> np.ndarray:
    """Fractional part of ``lam * theta0**(2d/D)`` for ``d = 0..D/2-1``.

    Returns values in ``[-1/2, 1/2]`` (nearest-integer reduction) with shape
    ``np.shape(lam) + (D//2,)``. Products whose magnitude exceeds
    :data:`EXTENDED_THRESHOLD` are reduced in multi-precision arithmetic with
    enough bits to resolve the fractional part to double precision.
    """
    lam_arr = np.asarray(lam, dtype=np.float64)
    d = np.arange(D // 2)
    theta = theta0 ** (2.0 * d / D)
    x = lam_arr[..., None] * theta
    out = x - np.rint(x)
    big = np.abs(x) > EXTENDED_THRESHOLD
    if big.any():
        for idx in zip(*np.nonzero(big)):
            lam_i = float(lam_arr[idx[:-1]]) if lam_arr.ndim else float(lam_arr)
            out[idx] = _extended_turn(lam_i, theta0, int(idx[-1]), D, abs(float(x[idx])))
    return out
