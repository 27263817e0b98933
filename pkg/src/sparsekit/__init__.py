"""sparsekit: deterministic-size spectral sparsification of graphs and
identity-decomposed matrix families, with independent quality checks."""

__version__ = "0.1.0"

from .errors import (
    BarrierViolationError,
    ConfigError,
    FactorValidationError,
    GraphParseError,
    GraphValidationError,
    NoPositiveDirectionError,
    OracleContractError,
    PotentialOverflowError,
    PreconditionError,
    RejectionLoopError,
    SdpDomainError,
    SolverConvergenceError,
    SparsekitError,
)
from .graph import (
    FactorSet,
    WeightedGraph,
    build_graph,
    complement_basis,
    export_sparsifier,
    from_matrices,
    from_vectors,
    isotropize,
    laplacian,
    load_graph,
    save_graph,
)
from .oracle import (
    ORACLE_SPEED,
    OracleRequest,
    OracleResponse,
    sampling_oracle,
    sampling_probabilities,
    sdp_oracle,
    validate_response,
)
from .potential import (
    BarrierState,
    check_shift_inequality,
    check_step_inequality,
    gradient_matrices,
    phi,
    phi_lower,
    phi_upper,
)
from .sdp import (
    SOLVER_KAPPA,
    SdpInstance,
    SdpSolution,
    error_bound,
    exp_trace_oracle,
    matfun_taylor,
    solve_packing_sdp,
    taylor_coefficients,
    taylor_f,
    threshold_degree,
)
from .sparsify import (
    CertificateReport,
    SparsifierResult,
    SparsifyConfig,
    barrier_update,
    certify,
    initial_state,
    sparsify,
    sparsify_with_restarts,
)
from .verify import (
    check_cuts,
    check_quadratic_form,
    effective_resistance_baseline,
    leverage_scores,
)

__all__ = [name for name in dir() if not name.startswith("_")]
