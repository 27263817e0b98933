"""Exception hierarchy for sparsekit.

Every error raised on purpose by this package derives from SparsekitError,
so callers (and the command line driver) can map failures to exit codes
without string matching.
"""


class SparsekitError(Exception):
    """Base class for all sparsekit errors."""


class GraphParseError(SparsekitError):
    """An edge-list file could not be tokenized into (u, v, w) rows."""


class GraphValidationError(SparsekitError):
    """A structurally parsed graph violates a contract (self loop,
    nonpositive weight, disconnected, bad vertex ids, ...)."""


class FactorValidationError(SparsekitError):
    """A factor set is not PSD or does not sum to the identity."""


class ConfigError(SparsekitError):
    """A user-supplied configuration value is outside the accepted range."""


class BarrierViolationError(SparsekitError):
    """The spectrum of the accumulated matrix is not strictly inside the
    (ell, u) barrier window."""


class PotentialOverflowError(SparsekitError):
    """A barrier gap is so small that exp(1/gap) would overflow float64.
    Raised instead of silently returning inf."""


class PreconditionError(SparsekitError):
    """Inputs to an inequality check are outside its assumed regime.
    Distinct from the inequality itself failing."""


class NoPositiveDirectionError(SparsekitError):
    """Every factor has a nonpositive inner product with the reward matrix,
    so the sampling distribution is empty."""


class RejectionLoopError(SparsekitError):
    """The sampling oracle exceeded its cap of consecutive rejections."""


class OracleContractError(SparsekitError):
    """An oracle response violates one of its hard output contracts
    (sparsity bound, nonnegativity, or PSD dominance)."""


class SdpDomainError(SparsekitError):
    """An SDP oracle or solver input is outside its domain."""


class SolverConvergenceError(SparsekitError):
    """An iterative routine hit its iteration cap without converging."""
