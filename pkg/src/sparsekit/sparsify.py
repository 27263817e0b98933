"""Deterministic-size spectral sparsification by barrier-potential steps.

The loop keeps a PSD accumulation A with its spectrum strictly between a
lower barrier ell and an upper barrier u (starting at -1/4 and 1/4) and a
potential Phi = tr exp((uI-A)^{-1}) + tr exp((A-ell I)^{-1}) that never
increases.  Each iteration asks a one-sided oracle for a sparse PSD step
dominated by both squared barrier gaps, adds eps times that step, and
advances both barriers; the window widens at a rate proportional to the
oracle speed until u - ell reaches 1, at which point rescaling the
accumulated coefficients by 2/(u+ell) recenters the spectrum around 1.

Total factor count of the output is bounded by the number of iterations
times the per-call sparsity budget; with the default oracles this is
O(d / eps^2) factors.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._linalg import eigh, sym
from .errors import (
    BarrierViolationError,
    ConfigError,
    NoPositiveDirectionError,
    OracleContractError,
    PreconditionError,
    SolverConvergenceError,
)
from .oracle import (
    ORACLE_SPEED,
    OracleRequest,
    OracleResponse,
    declared_sdp_error,
    sampling_oracle,
    sdp_oracle,
    validate_response,
    zero_response,
)
from .potential import INEQ_SLACK, BarrierState, grad_kernel, phi_from_gaps
from .sdp import matfun_taylor

log = logging.getLogger("sparsekit")

# hard domain of the step size; the barrier-shift formulas need eps < 1/4
# empirical floor kept by the potential control: while the potential is
# polynomial in d (<= d^10), every bound block satisfies
# lambda_min(B) * ln(d)^2 >= LAMBDA_FLOOR_KAPPA
LAMBDA_FLOOR_KAPPA = 0.01

EPS_HARD = 0.25
# above this the potential-decrease constants get thin; warn but proceed
EPS_SOFT = 0.05

TRACE_SCHEMA = 1


@dataclass
class SparsifyConfig:
    """Knobs for one sparsification run.

    epsilon
        Step size; also sets the quality target (certification uses
        10 * epsilon by default).  Must lie in (0, 1/4).
    oracle
        "sampling" (randomized, zero reward error) or "sdp" (sampled
        support plus an approximate packing solve).
    seed
        int or numpy SeedSequence; drives every random choice.
    delta_sdp
        Accuracy handed to the packing solver; defaults to
        epsilon / ln(d)^2 so the declared reward error is epsilon.
    max_iterations
        Safety cap; defaults to ceil(50 ln(max(d,2))^2 / epsilon^2).
    taylor_degree
        When set, the reward matrices are produced by the polynomial
        kernel evaluation instead of an eigendecomposition.
    certify_tolerance
        Quality bound used by certify/restarts; default 10 * epsilon.
    restarts
        Independent attempts in sparsify_with_restarts.
    """

    epsilon: float
    oracle: str = "sampling"
    seed: object = 0
    delta_sdp: float = None
    max_iterations: int = None
    taylor_degree: int = None
    certify_tolerance: float = None
    restarts: int = 5

    def validate(self, dim=None):
        if not 0.0 < self.epsilon < EPS_HARD:
            raise ConfigError(
                f"epsilon must be in (0, {EPS_HARD}), got {self.epsilon}"
            )
        if self.epsilon > EPS_SOFT:
            log.warning(
                "epsilon=%g is above %g; width growth constants are only "
                "guaranteed up to 1/4 and quality degrades",
                self.epsilon,
                EPS_SOFT,
            )
        if self.oracle not in ("sampling", "sdp"):
            raise ConfigError(f"unknown oracle {self.oracle!r}")
        if self.delta_sdp is not None and not 0.0 < self.delta_sdp < 1.0:
            raise ConfigError(f"delta_sdp must be in (0, 1), got {self.delta_sdp}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ConfigError("max_iterations must be positive")
        if self.taylor_degree is not None and self.taylor_degree < 2:
            raise ConfigError("taylor_degree must be at least 2")
        if self.certify_tolerance is not None and self.certify_tolerance <= 0:
            raise ConfigError("certify_tolerance must be positive")
        if self.restarts < 1:
            raise ConfigError("restarts must be at least 1")
        return self

    def resolved_delta(self, dim):
        if self.delta_sdp is not None:
            return self.delta_sdp
        logd = max(math.log(dim), math.log(2.0))
        return min(0.49, max(1e-6, self.epsilon / logd**2))

    def resolved_max_iterations(self, dim):
        if self.max_iterations is not None:
            return self.max_iterations
        logd = math.log(max(dim, 2))
        return int(math.ceil(50.0 * logd**2 / self.epsilon**2))


@dataclass
class TraceRow:
    j: int
    u: float
    ell: float
    lambda_min_b: float
    phi: float
    nnz: int
    objective: float


@dataclass
class RunTrace:
    epsilon: float
    oracle: str
    dim: int
    m: int
    rows: list = field(default_factory=list)

    def to_jsonl(self, path):
        """One meta line, then one line per iteration; no wall-clock data,
        so identical runs write identical bytes."""
        with open(path, "w") as fh:
            meta = {
                "schema": TRACE_SCHEMA,
                "kind": "meta",
                "epsilon": self.epsilon,
                "oracle": self.oracle,
                "dim": self.dim,
                "m": self.m,
            }
            fh.write(json.dumps(meta, sort_keys=True) + "\n")
            for r in self.rows:
                row = {
                    "kind": "row",
                    "j": r.j,
                    "u": r.u,
                    "ell": r.ell,
                    "lambda_min_b": r.lambda_min_b,
                    "phi": r.phi,
                    "nnz": r.nnz,
                    "objective": r.objective,
                }
                fh.write(json.dumps(row, sort_keys=True) + "\n")


def initial_state(dim):
    """Fresh loop state: A = 0 with barriers at -1/4 and 1/4."""
    return BarrierState(A=np.zeros((dim, dim)), u=0.25, ell=-0.25, j=0)


def barrier_update(eps, speed, lam_min_b, error_eps):
    """Barrier increments (delta_u, delta_ell) for one iteration.

        delta_u   = eps (1+2 eps)(1+error) / (1-4 eps) * speed * lam_min_b
        delta_ell = eps (1-2 eps)(1-error) / (1+4 eps) * speed * lam_min_b

    The upper barrier always moves at least as fast as the lower one, so
    the window widens every iteration, and the asymmetric weighting keeps
    the potential from rising no matter how the oracle's step splits
    between the two sides.
    """
    if not 0.0 < eps < EPS_HARD:
        raise PreconditionError(f"eps must be in (0, {EPS_HARD}), got {eps}")
    if not 0.0 <= error_eps < 1.0:
        raise PreconditionError(f"oracle error must be in [0, 1), got {error_eps}")
    if not 0.0 < speed <= 1.0:
        raise PreconditionError(f"oracle speed must be in (0, 1], got {speed}")
    if lam_min_b <= 0.0:
        raise PreconditionError(f"lambda_min of the bound must be positive, got {lam_min_b}")
    base = eps * speed * lam_min_b
    delta_u = base * (1.0 + 2.0 * eps) * (1.0 + error_eps) / (1.0 - 4.0 * eps)
    delta_ell = base * (1.0 - 2.0 * eps) * (1.0 - error_eps) / (1.0 + 4.0 * eps)
    return delta_u, delta_ell


@dataclass
class SparsifierResult:
    """Output of one run: nonnegative coefficients over the input factors.

    `factor_coefficients[i]` scales factor i; the scaled sum has spectrum
    in [1 - eps_actual, 1 + eps_actual] (see certify).  When the factor
    set carries edge provenance, `coefficients` keys the same values by
    edge index and the result can be exported as a reweighted subgraph.
    """

    factor_coefficients: dict
    epsilon: float
    dim: int
    u_final: float
    ell_final: float
    iterations: int
    dead_steps: int
    trace: RunTrace
    coefficients: dict = None
    edge_keyed: bool = False

    @property
    def nnz(self):
        return sum(1 for v in self.factor_coefficients.values() if v > 0.0)


@dataclass
class CertificateReport:
    ok: bool
    eps_actual: float
    lam_min: float
    lam_max: float
    nnz: int
    tolerance: float


def _iteration_quantities(state, eps, taylor_degree):
    """Everything one iteration needs from a single eigendecomposition.

    Returns (c_plus, c_minus, b_upper, b_lower, lam_min_b, phi_now,
    trace_c).  Matches gradient_matrices exactly on the default path.
    """
    lam, vec = eigh(state.A)
    g_up = state.u - lam
    g_lo = lam - state.ell
    phi_now = phi_from_gaps(g_up, g_lo)
    k_up = grad_kernel(g_up)
    k_lo = grad_kernel(g_lo)
    if taylor_degree is None:
        c_plus = (1.0 - 2.0 * eps) * sym((vec * k_lo) @ vec.T)
        c_minus = (1.0 + 2.0 * eps) * sym((vec * k_up) @ vec.T)
    else:
        ident = np.eye(state.dim)
        c_plus = (1.0 - 2.0 * eps) * matfun_taylor(
            state.A - state.ell * ident, taylor_degree, clip_psd=True
        )
        c_minus = (1.0 + 2.0 * eps) * matfun_taylor(
            state.u * ident - state.A, taylor_degree, clip_psd=True
        )
    b_upper = sym((vec * g_up**2) @ vec.T)
    b_lower = sym((vec * g_lo**2) @ vec.T)
    lam_min_b = float(min(g_up.min(), g_lo.min()) ** 2)
    trace_c = float((1.0 - 2.0 * eps) * k_lo.sum() - (1.0 + 2.0 * eps) * k_up.sum())
    return c_plus, c_minus, b_upper, b_lower, lam_min_b, phi_now, trace_c


def sparsify(factors, config, observer=None):
    """Run the barrier loop on a factor set summing to the identity.

    observer, when given, is called with each TraceRow as it is emitted.
    Raises SolverConvergenceError if the window fails to reach width 1
    within the iteration cap, and BarrierViolationError /
    OracleContractError if an internal invariant breaks.
    """
    config.validate()
    factors.validate()
    d = factors.n
    eps = config.epsilon
    state = initial_state(d)
    seed_root = (
        config.seed
        if isinstance(config.seed, np.random.SeedSequence)
        else np.random.SeedSequence(config.seed)
    )
    delta = config.resolved_delta(d)
    max_iter = config.resolved_max_iterations(d)
    trace = RunTrace(epsilon=eps, oracle=config.oracle, dim=d, m=factors.m)

    acc = {}
    dead = 0
    phi_prev = None
    while state.u - state.ell < 1.0:
        if state.j >= max_iter:
            raise SolverConvergenceError(
                f"window width {state.u - state.ell:.6f} after {state.j} "
                f"iterations (cap {max_iter})"
            )
        (
            c_plus,
            c_minus,
            b_upper,
            b_lower,
            lam_min_b,
            phi_now,
            trace_c,
        ) = _iteration_quantities(state, eps, config.taylor_degree)
        if phi_prev is not None and phi_now > phi_prev + INEQ_SLACK * max(1.0, phi_prev):
            raise BarrierViolationError(
                f"potential rose from {phi_prev:.6e} to {phi_now:.6e} at step {state.j}"
            )
        phi_prev = phi_now

        req = OracleRequest(
            factors=factors,
            B_upper=b_upper,
            B_lower=b_lower,
            C_plus=c_plus,
            C_minus=c_minus,
            seed=seed_root.spawn(1)[0],
        )
        err_declared = 0.0 if config.oracle == "sampling" else declared_sdp_error(delta, d)
        try:
            if config.oracle == "sampling":
                resp = sampling_oracle(req)
            else:
                resp = sdp_oracle(req, delta)
        except NoPositiveDirectionError:
            # a zero step is a valid oracle answer only when the total
            # reward is nonpositive, which is exactly when no single
            # factor can have positive reward (the factors sum to I)
            scale_c = float(np.trace(c_plus) + np.trace(c_minus))
            if trace_c > INEQ_SLACK * max(1.0, scale_c):
                raise OracleContractError(
                    "no positive direction reported while tr(C) > 0"
                )
            resp = zero_response(d, ORACLE_SPEED, err_declared)
            dead += 1
        validate_response(req, resp)

        objective = float(np.tensordot(c_plus - c_minus, resp.Delta))
        for i, a in resp.alpha.items():
            acc[int(i)] = acc.get(int(i), 0.0) + eps * a
        row = TraceRow(
            j=state.j,
            u=state.u,
            ell=state.ell,
            lambda_min_b=lam_min_b,
            phi=phi_now,
            nnz=len(acc),
            objective=objective,
        )
        trace.rows.append(row)
        if observer is not None:
            observer(row)

        delta_u, delta_ell = barrier_update(eps, resp.speed, lam_min_b, resp.error)
        state = BarrierState(
            A=sym(state.A + eps * resp.Delta),
            u=state.u + delta_u,
            ell=state.ell + delta_ell,
            j=state.j + 1,
        )
    state.validate()

    # recenter: spectrum sits in (ell, u), so scaling by 2/(u+ell) moves it
    # into an interval around 1
    mid = 0.5 * (state.u + state.ell)
    if mid <= 0.0:
        raise SolverConvergenceError(f"window midpoint {mid:.6e} never became positive")
    scale = 1.0 / mid
    factor_coefficients = {i: c * scale for i, c in sorted(acc.items())}

    result = SparsifierResult(
        factor_coefficients=factor_coefficients,
        epsilon=eps,
        dim=d,
        u_final=state.u,
        ell_final=state.ell,
        iterations=state.j,
        dead_steps=dead,
        trace=trace,
    )
    if factors.provenance is not None:
        edge_coeffs = {}
        for i, c in factor_coefficients.items():
            key = int(factors.provenance[i])
            edge_coeffs[key] = edge_coeffs.get(key, 0.0) + c
        result.coefficients = edge_coeffs
        result.edge_keyed = True
    else:
        result.coefficients = dict(factor_coefficients)
    return result


def certify(factors, result, tolerance=None):
    """Spectral check of a result against the identity.

    Rebuilds the weighted factor sum and reports
    eps_actual = max(1 - lam_min, lam_max - 1).  Never trusts any value
    recorded during the run.
    """
    tol = 10.0 * result.epsilon if tolerance is None else tolerance
    idx = list(result.factor_coefficients.keys())
    val = list(result.factor_coefficients.values())
    if min(val, default=0.0) < 0.0:
        raise OracleContractError("negative coefficient in sparsifier result")
    total = factors.assemble(idx, val)
    w = np.linalg.eigvalsh(sym(total))
    eps_actual = float(max(1.0 - w[0], w[-1] - 1.0))
    return CertificateReport(
        ok=eps_actual <= tol,
        eps_actual=eps_actual,
        lam_min=float(w[0]),
        lam_max=float(w[-1]),
        nnz=sum(1 for v in val if v > 0.0),
        tolerance=tol,
    )


def sparsify_with_restarts(factors, config, observer=None):
    """Run sparsify up to config.restarts times and keep the first
    certified result.

    Each attempt gets an independent seed derived from config.seed.
    Returns (result, report, attempt_index).  Raises
    SolverConvergenceError when every attempt misses the tolerance.
    """
    config.validate()
    seed_root = (
        config.seed
        if isinstance(config.seed, np.random.SeedSequence)
        else np.random.SeedSequence(config.seed)
    )
    children = seed_root.spawn(config.restarts)
    best = None
    for attempt, child in enumerate(children):
        run_cfg = replace(config, seed=child)
        result = sparsify(factors, run_cfg, observer=observer)
        report = certify(factors, result, config.certify_tolerance)
        if report.ok:
            return result, report, attempt
        if best is None or report.eps_actual < best[1].eps_actual:
            best = (result, report)
        log.warning(
            "restart %d missed tolerance: eps_actual=%.4f > %.4f",
            attempt,
            report.eps_actual,
            report.tolerance,
        )
    raise SolverConvergenceError(
        f"no certified sparsifier in {config.restarts} attempts; "
        f"best eps_actual={best[1].eps_actual:.4f} vs tolerance {best[1].tolerance:.4f}"
    )
