"""Exception types.  All derive from ValueError so callers can catch broadly."""


class NcfactorError(ValueError):
    pass


class SizingError(NcfactorError):
    """Requested truncation or alphabet is unusable."""


class ContainmentError(NcfactorError):
    """A subspace expected to lie inside another does not."""


class NotContractiveError(NcfactorError):
    """An operator or tuple violates the contraction inequality."""


class ConsistencyError(NcfactorError):
    """A computed object fails an internal identity beyond tolerance."""


class TruncationInconsistentError(ConsistencyError):
    """A defining relation does not hold on the truncated data."""


class DecompositionError(NcfactorError):
    pass


class NotPureError(NcfactorError):
    pass


class ChainError(NcfactorError):
    """An invariant subspace chain failed verification."""


class ConfigError(NcfactorError):
    """Bad configuration or input file."""
