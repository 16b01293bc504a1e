"""Distance-bias histograms and decay-curve comparisons under synthetic statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .attention import AttentionConfig
from .encodings import apply_position_map, rope_scores_batch, tapa_scores_batch
from .exceptions import ConfigurationError
from .numeric import SamplerSpec, draw_chunked, reduced_turns, rng_for, sample_pairs, sample_tapa_pairs, summarize
from .theory import (
    DecayCurve,
    DecayRow,
    fit_loglog_slope,
    gamma_bias,
    rope_bias_samples,
    tapa_amplitude_moments,
    tapa_expected_bias_oracle,
    theorem4_decay_check,
)

__all__ = [
    "HistogramSpec",
    "BiasHistogram",
    "run_bias_histogram",
    "histogram_mean_oracle",
    "run_decay_comparison",
]

# distances drawn from their own stream so the pair stream stays shared
_DISTANCE_STREAM = 1


@dataclass(frozen=True)
class HistogramSpec:
    """``short_range`` and ``long_range`` are inclusive integer distance intervals."""

    short_range: tuple
    long_range: tuple
    n_pairs: int
    bins: int
    encoding: AttentionConfig
    sampler: SamplerSpec

    def __post_init__(self):
        for name in ("short_range", "long_range"):
            lo, hi = getattr(self, name)
            if not (int(lo) == lo and int(hi) == hi and 0 <= lo <= hi):
                raise ConfigurationError(f"{name} must be an integer interval with 0 <= lo <= hi")
        (a, b), (c, d) = self.short_range, self.long_range
        if not (b < c or d < a):
            raise ConfigurationError("short and long ranges must be disjoint")
        if self.n_pairs < 1000:
            raise ConfigurationError("n_pairs must be at least 10^3")
        if self.bins < 10:
            raise ConfigurationError("bins must be at least 10")
        if self.encoding.method == "tapa_general":
            raise ConfigurationError("histograms support rope and split-form tapa encodings")
        if self.encoding.D != self.sampler.D:
            raise ConfigurationError("encoding and sampler dimensions differ")


@dataclass
class BiasHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    mean: float
    std: float
    n: int
    ci95_half_width: float = 0.0
    deltas: np.ndarray = field(default=None, repr=False)


def _draw_pairs(encoding, sampler, size, stream, chunk):
    if encoding.method == "tapa":
        return sample_tapa_pairs(sampler, encoding.tapa.n_amp, size, stream, chunk)
    return sample_pairs(sampler, size, stream, chunk)


def _scores(encoding, Q, K, dist):
    if encoding.method == "rope":
        return rope_scores_batch(Q, K, apply_position_map(dist, encoding.position_map), encoding.rope)
    return tapa_scores_batch(Q, K, dist, encoding.tapa)


def run_bias_histogram(spec: HistogramSpec, workers: int = 1, stream_index: int = 0) -> BiasHistogram:
    """Histogram of ``Attn(short distance) - Attn(long distance)`` over fresh pairs.

    Each trial scores one ``(q, k)`` pair at a short and a long distance
    (uniform on the integer ranges, key at position 0, query at the distance).
    Edges span the observed data range so every sample is binned.
    """
    enc, smp = spec.encoding, spec.sampler
    (s_lo, s_hi), (l_lo, l_hi) = spec.short_range, spec.long_range

    def chunk(i, size):
        Q, K = _draw_pairs(enc, smp, size, stream_index, i)
        rng = rng_for(smp.seed, stream_index, i, _DISTANCE_STREAM)
        near = rng.integers(s_lo, s_hi + 1, size).astype(np.float64)
        far = rng.integers(l_lo, l_hi + 1, size).astype(np.float64)
        return _scores(enc, Q, K, near) - _scores(enc, Q, K, far)

    deltas = draw_chunked(chunk, spec.n_pairs, workers=workers)
    counts, edges = np.histogram(deltas, bins=spec.bins, range=(float(deltas.min()), float(deltas.max())))
    st = summarize(deltas)
    return BiasHistogram(edges, counts, st.mean, st.std, st.n, st.ci95_half_width, deltas)


def _mean_gamma(rng_, sampler, p):
    lams = np.arange(rng_[0], rng_[1] + 1, dtype=np.float64)
    ang = 2 * np.pi * reduced_turns(lams, p.theta0, p.D)
    gam = (sampler.mu0 * np.cos(ang) + sampler.nu0 * np.sin(ang)).sum(axis=1) / p.D
    return float(gam.mean())


def histogram_mean_oracle(spec: HistogramSpec) -> float:
    """Exact ``E[Delta]`` under the uniform distance distributions.

    RoPE: ``sqrt(D)`` times the difference of the average distance biases.
    TAPA: ``E[amp]`` times the difference of the average phase factors.
    """
    enc, smp = spec.encoding, spec.sampler
    if enc.method == "rope":
        p = enc.rope
        if enc.position_map is not None and enc.position_map.kind == "interpolation":
            s = enc.position_map.scale
            vals = []
            for lo, hi in (spec.short_range, spec.long_range):
                lams = np.arange(lo, hi + 1) / s
                vals.append(np.mean([gamma_bias(x, smp.mu0, smp.nu0, p) for x in lams]))
            return math.sqrt(p.D) * (vals[0] - vals[1])
        return math.sqrt(p.D) * (_mean_gamma(spec.short_range, smp, p) - _mean_gamma(spec.long_range, smp, p))
    t = enc.tapa
    mean_amp, _ = tapa_amplitude_moments(smp, t)
    fac = [np.mean([tapa_expected_bias_oracle(x, t) for x in range(lo, hi + 1)])
           for lo, hi in (spec.short_range, spec.long_range)]
    return mean_amp * (fac[0] - fac[1])


def _rope_curve(config, distances, sampler, n_samples, stream_index, workers):
    p = config.rope
    rows = []
    for i, dist in enumerate(distances):
        lam = apply_position_map(float(dist), config.position_map)
        st = summarize(rope_bias_samples(lam, sampler, p, n_samples, stream_index + i, workers))
        rows.append(DecayRow(float(dist), st.mean, st.ci95_half_width, gamma_bias(lam, sampler.mu0, sampler.nu0, p)))
    pos = [(r.distance, r.estimate) for r in rows if r.distance > 0 and r.estimate > 0]
    slope = fit_loglog_slope(*zip(*pos)) if len(pos) >= 2 else None
    return DecayCurve(config.label, rows, slope)


def run_decay_comparison(encodings, distances, sampler: SamplerSpec, n_samples: int, stream_index: int = 0,
                         workers: int = 1) -> list[DecayCurve]:
    """Normalized expected score versus distance for each encoding.

    RoPE rows estimate ``E[Attn]/sqrt(D)`` (oracle: ``gamma_bias``); TAPA
    rows estimate ``E[Attn]/E[amp]`` (oracle: ``tapa_expected_bias_oracle``).
    """
    distances = list(distances)
    if not distances:
        raise ConfigurationError("empty distance list")
    curves = []
    for j, config in enumerate(encodings):
        stream = stream_index + 1000 * j
        if config.D != sampler.D:
            raise ConfigurationError(f"encoding {config.label} has D={config.D}, sampler has D={sampler.D}")
        if config.method == "rope":
            curves.append(_rope_curve(config, distances, sampler, n_samples, stream, workers))
        elif config.method == "tapa":
            curve, _ = theorem4_decay_check(config.tapa, sampler, distances, n_samples, stream, workers)
            curve.encoding = config.label
            curves.append(curve)
        else:
            raise ConfigurationError("decay comparison supports rope and split-form tapa encodings")
    return curves
