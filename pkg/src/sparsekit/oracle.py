"""One-sided oracles for the two-block packing step.

Both oracles receive rank-1 (or dense PSD) factors M_i with sum M_i = I,
two PSD blocks B_upper, B_lower (each dominated by I), and a reward split
C = C_plus - C_minus.  They return a sparse nonnegative combination
Delta = sum alpha_i M_i with

    (1) nnz(alpha) <= lambda_min(B) * tr(B^{-1}),
    (2) Delta <= B_upper and Delta <= B_lower, alpha >= 0,
    (3) E[C . Delta] >= S * lambda_min(B) * (tr C - err * tr(C_plus+C_minus))

where the block quantities are lambda_min(B) = min over the two blocks and
tr(B^{-1}) = sum over the two blocks, S is the declared speed and err the
declared error.  The block-diagonal structure is never materialized: a
factor acts as the same matrix in both blocks, which cancels the 1/2 that
would otherwise weight each block of the reward.

`sampling_oracle` implements the rejection-sampled potential walk (speed
1/32, error 0).  `sdp_oracle` samples a support of the same size and runs
the in-repo packing SDP solver over it (speed 1/32, error delta * ln(d)^2).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from ._linalg import eigvalsh, min_eig, rng_from, sym
from .errors import (
    NoPositiveDirectionError,
    OracleContractError,
    RejectionLoopError,
    SdpDomainError,
)

ORACLE_SPEED = 1.0 / 32.0

# give up after this many consecutive rejected proposals; acceptance
# probability is at least 1/2 per proposal, so 64 misses indicates a bug
REJECTION_CAP = 64

TAU_PSD = 1e-9


@dataclass
class OracleRequest:
    factors: object
    B_upper: np.ndarray
    B_lower: np.ndarray
    C_plus: np.ndarray
    C_minus: np.ndarray
    seed: object = 0

    def validate(self):
        d = self.factors.n
        for name, mat in (("B_upper", self.B_upper), ("B_lower", self.B_lower)):
            if mat.shape != (d, d):
                raise OracleContractError(f"{name} has shape {mat.shape}, want {(d, d)}")
            w = eigvalsh(mat)
            if w[0] < -TAU_PSD or w[-1] > 1.0 + 1e-9:
                raise OracleContractError(
                    f"{name} eigenvalues [{w[0]:.3e}, {w[-1]:.3e}] not within [0, 1]"
                )
        for name, mat in (("C_plus", self.C_plus), ("C_minus", self.C_minus)):
            w = eigvalsh(mat)
            scale = max(abs(w[-1]), 1.0)
            if w[0] < -1e-9 * scale:
                raise OracleContractError(f"{name} is not PSD (min eig {w[0]:.3e})")


@dataclass
class OracleResponse:
    alpha: dict
    Delta: np.ndarray
    speed: float
    error: float
    n_proposals: int = 0
    n_accepted: int = 0

    @property
    def nnz(self):
        return sum(1 for v in self.alpha.values() if v != 0.0)


def block_lambda_min(b_upper, b_lower):
    return min(min_eig(b_upper), min_eig(b_lower))


def block_trace_inv(b_upper, b_lower):
    wu = eigvalsh(b_upper)
    wl = eigvalsh(b_lower)
    if wu[0] <= 0 or wl[0] <= 0:
        raise SdpDomainError("bound blocks must be positive definite")
    return float((1.0 / wu).sum() + (1.0 / wl).sum())


def sampling_probabilities(factors, c):
    """Distribution proportional to the positive part of M_i . C.

    Returns (probs, beta) with beta = sum of the positive inner products.
    Raises NoPositiveDirectionError when every inner product is
    nonpositive, in which case the only compliant oracle output is zero.
    """
    dots = factors.dots(c)
    pos = np.clip(dots, 0.0, None)
    beta = float(pos.sum())
    if beta <= 0.0:
        raise NoPositiveDirectionError(
            "all factor inner products with the reward are nonpositive"
        )
    return pos / beta, beta


def zero_response(dim, speed, error):
    """The compliant response when no factor has positive reward."""
    return OracleResponse(alpha={}, Delta=np.zeros((dim, dim)), speed=speed, error=error)


def budget(b_upper, b_lower):
    """Sparsity budget floor(lambda_min(B) * tr(B^{-1})) over both blocks."""
    return int(np.floor(block_lambda_min(b_upper, b_lower) * block_trace_inv(b_upper, b_lower)))


def _chol_lower(mat):
    return cholesky(sym(mat), lower=True, check_finite=False)


def _trace_inv_from_chol(low):
    inv = solve_triangular(low, np.eye(low.shape[0]), lower=True, check_finite=False)
    return float((inv * inv).sum())


def sampling_oracle(req):
    """Randomized one-sided oracle with speed 1/32 and error 0.

    Walks T = floor(lambda_min(B) tr(B^{-1})) steps.  Each step samples a
    factor proportionally to its positive reward, scales it by
    1/(4 Psi_j p_t) with Psi_j the barrier trace of the current state, and
    accepts only if the scaled factor stays below half the remaining
    barrier in both blocks; the final state is divided by the accumulated
    barrier level u_T.  Identical seeds give bit-identical responses.
    """
    req.validate()
    factors = req.factors
    d = factors.n
    c = sym(req.C_plus - req.C_minus)
    probs, _ = sampling_probabilities(factors, c)  # may raise: caller handles
    t_total = budget(req.B_upper, req.B_lower)
    if t_total < 1:
        raise OracleContractError(f"degenerate sparsity budget {t_total}")
    lam_b = block_lambda_min(req.B_upper, req.B_lower)

    rng = rng_from(req.seed)
    # draw proposals in batches; unused draws are discarded deterministically
    buf = []

    def next_index():
        nonlocal buf
        if not buf:
            buf = list(rng.choice(factors.m, size=4 * t_total + 8, p=probs))
        return int(buf.pop())

    rank1 = factors.vectors is not None
    acc = np.zeros((d, d))
    level = 1.0
    alpha = {}
    n_prop = 0
    n_acc = 0
    for _ in range(t_total):
        y_up = level * req.B_upper - acc
        y_lo = level * req.B_lower - acc
        lo_up = _chol_lower(y_up)
        lo_lo = _chol_lower(y_lo)
        psi = _trace_inv_from_chol(lo_up) + _trace_inv_from_chol(lo_lo)
        accepted = None
        for _ in range(REJECTION_CAP):
            t = next_index()
            n_prop += 1
            scale = 1.0 / (4.0 * psi * probs[t])
            # accept iff scale * M_t <= (level*B - acc)/2 in both blocks
            if rank1:
                v = factors.vectors[t]
                zu = solve_triangular(lo_up, v, lower=True, check_finite=False)
                zl = solve_triangular(lo_lo, v, lower=True, check_finite=False)
                ok = 2.0 * scale * float(zu @ zu) <= 1.0 and 2.0 * scale * float(zl @ zl) <= 1.0
            else:
                mt = factors.matrices[t]
                ok = (
                    eigvalsh(y_up - 2.0 * scale * mt)[0] >= 0.0
                    and eigvalsh(y_lo - 2.0 * scale * mt)[0] >= 0.0
                )
            if ok:
                accepted = (t, scale)
                n_acc += 1
                break
        if accepted is None:
            raise RejectionLoopError(
                f"{REJECTION_CAP} consecutive proposals rejected"
            )
        t, scale = accepted
        if rank1:
            v = factors.vectors[t]
            acc += scale * np.outer(v, v)
        else:
            acc += scale * factors.matrices[t]
        alpha[t] = alpha.get(t, 0.0) + scale
        level += 1.0 / (psi * lam_b)

    alpha = {i: a / level for i, a in sorted(alpha.items())}
    return OracleResponse(
        alpha=alpha,
        Delta=sym(acc / level),
        speed=ORACLE_SPEED,
        error=0.0,
        n_proposals=n_prop,
        n_accepted=n_acc,
    )


def sdp_oracle(req, delta):
    """One-sided oracle that samples a support and solves a packing SDP.

    Draws floor(lambda_min(B) tr(B^{-1})) factor indices i.i.d. from the
    positive-reward distribution, then maximizes C . sum alpha_i M_i over
    alpha >= 0 supported on the sample, subject to the combination staying
    below both blocks.  Declared speed is 1/32; the declared error is
    delta * ln(d)^2 (clipped to >= ln(2)^2 scale for tiny d), matching the
    accuracy delta requested from the solver.
    """
    from . import sdp as sdp_mod

    if not 0.0 < delta < 1.0:
        raise SdpDomainError(f"delta must be in (0, 1), got {delta}")
    req.validate()
    factors = req.factors
    d = factors.n
    c = sym(req.C_plus - req.C_minus)
    probs, _ = sampling_probabilities(factors, c)  # may raise: caller handles
    t_total = budget(req.B_upper, req.B_lower)
    if t_total < 1:
        raise OracleContractError(f"degenerate sparsity budget {t_total}")

    rng = rng_from(req.seed)
    support = np.unique(rng.choice(factors.m, size=t_total, p=probs))
    dots = factors.dots(c)
    keep = support[dots[support] > 0.0]
    err = declared_sdp_error(delta, d)
    if keep.size == 0:
        return zero_response(d, ORACLE_SPEED, err)

    mats = np.stack([factors.factor(int(i)) for i in keep])
    inst = sdp_mod.SdpInstance(
        c=dots[keep],
        factors=mats,
        blocks=[req.B_upper.copy(), req.B_lower.copy()],
        delta=delta,
    )
    sol = sdp_mod.solve_packing_sdp(inst)
    alpha = {
        int(i): float(x) for i, x in zip(keep, sol.x) if x > 0.0
    }
    delta_mat = factors.assemble(list(alpha.keys()), list(alpha.values()))
    return OracleResponse(
        alpha=alpha,
        Delta=delta_mat,
        speed=ORACLE_SPEED,
        error=err,
        n_proposals=int(t_total),
        n_accepted=len(alpha),
    )


def declared_sdp_error(delta, d):
    """Reward error implied by solving the restricted SDP to accuracy delta."""
    return delta * max(np.log(d), np.log(2.0)) ** 2


def validate_response(req, resp, tau_rel=TAU_PSD):
    """Hard output contracts; raises OracleContractError on any violation.

    Checks the sparsity budget, nonnegativity of the coefficients, that
    Delta equals the declared combination, and PSD dominance by both
    blocks with slack tau_rel * ||B||_2.
    """
    cap = block_lambda_min(req.B_upper, req.B_lower) * block_trace_inv(
        req.B_upper, req.B_lower
    )
    if resp.nnz > cap + 1e-9:
        raise OracleContractError(f"nnz {resp.nnz} exceeds budget {cap:.6f}")
    if any(a < 0.0 for a in resp.alpha.values()):
        raise OracleContractError("negative coefficient in oracle response")
    rebuilt = req.factors.assemble(list(resp.alpha.keys()), list(resp.alpha.values()))
    scale = max(np.abs(resp.Delta).max(), 1.0)
    if np.abs(rebuilt - resp.Delta).max() > 1e-8 * scale:
        raise OracleContractError("Delta does not match its coefficients")
    norm_b = max(eigvalsh(req.B_upper)[-1], eigvalsh(req.B_lower)[-1])
    tol = tau_rel * norm_b
    for name, blk in (("B_upper", req.B_upper), ("B_lower", req.B_lower)):
        gap = min_eig(blk - resp.Delta)
        if gap < -tol:
            raise OracleContractError(
                f"Delta exceeds {name}: min eig of difference {gap:.3e} < -{tol:.3e}"
            )
