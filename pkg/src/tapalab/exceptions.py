"""Exception types raised across tapalab."""


class TapalabError(ValueError):
    """Base class for all library errors."""


class ConfigurationError(TapalabError):
    """Invalid parameter set (bad head dimension, non-integral split, ...)."""


class DomainError(TapalabError):
    """Argument outside the domain of an operation."""


class PreconditionError(TapalabError):
    """A theorem or lemma was asked to check parameters outside its hypotheses.

    ``condition`` holds the human-readable hypothesis that failed, e.g.
    ``"θ0 < 1/10"``.
    """

    def __init__(self, condition, detail=""):
        self.condition = condition
        msg = f"precondition violated: {condition}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class InsufficientDataError(TapalabError):
    """Too few samples for the requested statistic."""
