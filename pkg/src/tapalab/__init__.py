"""Rotary and token-aware phase attention scoring with numerical checks of their distance behaviour."""

from .attention import AttentionConfig, attention_weights, run_gradcheck, score_matrix, softmax_rows, tapa_score_grad
from .encodings import GeneralTAPA, PositionMap, RoPEParams, TAPAParams, rope_score_complex, rope_score_expanded, tapa_score
from .estimators import RoPEAttention, TAPAAttention
from .exceptions import ConfigurationError, DomainError, InsufficientDataError, PreconditionError, TapalabError
from .numeric import SamplerSpec, SummaryStats, reduced_turns, sample_pairs, summarize
from .theory import TheoryCheckReport, cd_sum, gamma_bias, monte_carlo_rope_bias, sd_sum

__version__ = "0.1.0"

__all__ = [
    "AttentionConfig",
    "ConfigurationError",
    "DomainError",
    "GeneralTAPA",
    "InsufficientDataError",
    "PositionMap",
    "PreconditionError",
    "RoPEAttention",
    "RoPEParams",
    "SamplerSpec",
    "SummaryStats",
    "TAPAAttention",
    "TAPAParams",
    "TapalabError",
    "TheoryCheckReport",
    "attention_weights",
    "cd_sum",
    "gamma_bias",
    "monte_carlo_rope_bias",
    "reduced_turns",
    "rope_score_complex",
    "rope_score_expanded",
    "run_gradcheck",
    "sample_pairs",
    "score_matrix",
    "sd_sum",
    "softmax_rows",
    "summarize",
    "tapa_score",
    "tapa_score_grad",
]
