"""Barrier potentials for the two-sided spectral sparsification loop.

For a symmetric matrix A with spectrum strictly inside the window
(ell, u) the potentials are

    phi_upper(A, u)   = tr exp((u I - A)^{-1}) = sum_i exp(1/(u - lam_i))
    phi_lower(A, ell) = tr exp((A - ell I)^{-1}) = sum_i exp(1/(lam_i - ell))

and phi is their sum.  Small barrier gaps blow these up doubly
exponentially; any gap whose reciprocal exceeds EXP_GUARD raises
PotentialOverflowError instead of returning inf.

The two check_* style predicates verify, by direct dense evaluation, the
inequalities that control (a) how much the potential can grow when a PSD
step Delta is added, and (b) how much it shrinks when the barriers are
shifted.  Both raise PreconditionError when the inputs are outside the
assumed regime, which is reported separately from the inequality itself
failing.
"""

from dataclasses import dataclass, field

import numpy as np

from ._linalg import eigh, eigvalsh, min_eig, spectral_norm, sym
from .errors import BarrierViolationError, PotentialOverflowError, PreconditionError

TAU_BAR = 1e-12
EXP_GUARD = 700.0

# numerical slack, relative to the magnitudes involved, when comparing the
# two sides of an inequality that holds with equality in edge cases
INEQ_SLACK = 1e-9


@dataclass
class BarrierState:
    """Loop state: accumulated matrix A with barriers ell < spec(A) < u."""

    A: np.ndarray
    u: float
    ell: float
    j: int = 0

    @property
    def dim(self):
        return self.A.shape[0]

    def gaps(self):
        """(u - lam_i, lam_i - ell) for the spectrum of A, both positive."""
        lam = eigvalsh(self.A)
        return self.u - lam, lam - self.ell

    def validate(self, max_width=None):
        gu, gl = self.gaps()
        if gu.min() < TAU_BAR or gl.min() < TAU_BAR:
            raise BarrierViolationError(
                f"spectrum escapes window ({self.ell}, {self.u}): "
                f"margins {gl.min():.3e}, {gu.min():.3e}"
            )
        if max_width is not None and self.u - self.ell > max_width:
            raise BarrierViolationError(
                f"window width {self.u - self.ell} exceeds {max_width}"
            )


def _guarded_exp_inv(gaps):
    gaps = np.asarray(gaps)
    if gaps.min() < TAU_BAR:
        raise BarrierViolationError("eigenvalue at or beyond a barrier")
    inv = 1.0 / gaps
    if inv.max() > EXP_GUARD:
        raise PotentialOverflowError(
            f"potential overflow: barrier gap {gaps.min():.3e} gives "
            f"exponent {inv.max():.1f} > {EXP_GUARD:.0f}"
        )
    return np.exp(inv)


def phi_from_gaps(gaps_upper, gaps_lower):
    """Potential value from precomputed barrier gaps (both sides)."""
    return float(_guarded_exp_inv(gaps_upper).sum() + _guarded_exp_inv(gaps_lower).sum())


def phi_upper(a, u):
    lam = eigvalsh(a)
    return float(_guarded_exp_inv(u - lam).sum())


def phi_lower(a, ell):
    lam = eigvalsh(a)
    return float(_guarded_exp_inv(lam - ell).sum())


def phi(state):
    gu, gl = state.gaps()
    return phi_from_gaps(gu, gl)


def grad_kernel(gaps):
    """Scalar kernel exp(1/g) / g^2 of the potential gradient."""
    return _guarded_exp_inv(gaps) / np.asarray(gaps) ** 2


def gradient_matrices(state, eps):
    """Reward and penalty matrices for the oracle at the current state.

    Returns (C_plus, C_minus) where

        C_plus  = (1 - 2 eps) * (A - ell I)^{-2} exp((A - ell I)^{-1})
        C_minus = (1 + 2 eps) * (u I - A)^{-2} exp((u I - A)^{-1})

    computed through a single eigendecomposition of A.  Both are PSD.
    """
    if not 0 <= eps < 0.25:
        raise PreconditionError(f"eps must be in [0, 1/4), got {eps}")
    lam, vec = eigh(state.A)
    state.validate()
    k_lo = grad_kernel(lam - state.ell)
    k_up = grad_kernel(state.u - lam)
    c_plus = (1.0 - 2.0 * eps) * sym((vec * k_lo) @ vec.T)
    c_minus = (1.0 + 2.0 * eps) * sym((vec * k_up) @ vec.T)
    return c_plus, c_minus


def _gradient_weighted_traces(a, u, ell):
    """tr(exp((uI-A)^{-1}) (uI-A)^{-2}) and the lower-barrier analogue,
    plus the kernel matrices themselves for Delta-weighted traces."""
    lam, vec = eigh(a)
    k_up = grad_kernel(u - lam)
    k_lo = grad_kernel(lam - ell)
    up_mat = sym((vec * k_up) @ vec.T)
    lo_mat = sym((vec * k_lo) @ vec.T)
    return up_mat, lo_mat, float(k_up.sum()), float(k_lo.sum())


def _require(cond, msg):
    if not cond:
        raise PreconditionError(msg)


def check_step_inequality(a, u, ell, delta_mat, delta):
    """Verify the potential bound for adding a PSD step Delta.

    Preconditions (PreconditionError if violated): spec(A) inside
    (ell, u), u - ell <= 1, 0 <= delta <= 1/10, Delta PSD, and
    Delta <= delta*(uI-A)^2 and Delta <= delta*(A-ell I)^2 in the PSD
    order.  Returns True iff

        phi(A + Delta) <= phi(A) + (1+2 delta) tr(K_up Delta)
                                 - (1-2 delta) tr(K_lo Delta)

    where K_up, K_lo are the gradient kernel matrices at A.
    """
    a = np.asarray(a, dtype=float)
    delta_mat = np.asarray(delta_mat, dtype=float)
    _require(0.0 <= delta <= 0.1, f"delta={delta} outside [0, 1/10]")
    _require(u - ell <= 1.0 + 1e-12, f"window width {u - ell} exceeds 1")
    lam = eigvalsh(a)
    _require(lam[-1] < u and lam[0] > ell, "spectrum not inside the window")
    scale = max(spectral_norm(delta_mat), 1e-30)
    tol = 1e-10 * scale
    _require(min_eig(delta_mat) >= -tol, "Delta is not PSD")
    up_sq = _barrier_square(a, u, upper=True)
    lo_sq = _barrier_square(a, ell, upper=False)
    _require(
        min_eig(delta * up_sq - delta_mat) >= -tol,
        "Delta not dominated by delta*(uI-A)^2",
    )
    _require(
        min_eig(delta * lo_sq - delta_mat) >= -tol,
        "Delta not dominated by delta*(A-ell I)^2",
    )

    up_mat, lo_mat, _, _ = _gradient_weighted_traces(a, u, ell)
    before = phi_from_gaps(u - lam, lam - ell)
    lam_after = eigvalsh(a + delta_mat)
    after = phi_from_gaps(u - lam_after, lam_after - ell)
    rhs = (
        before
        + (1.0 + 2.0 * delta) * float(np.tensordot(up_mat, delta_mat))
        - (1.0 - 2.0 * delta) * float(np.tensordot(lo_mat, delta_mat))
    )
    slack = INEQ_SLACK * max(1.0, abs(after), abs(rhs))
    return after <= rhs + slack


def check_shift_inequality(a, u, ell, delta_u, delta_ell, delta):
    """Verify the potential bound for shifting both barriers upward.

    Preconditions: spec(A) inside (ell, u), 0 <= delta <= 1/10,
    0 <= delta_u <= delta * lambda_min(uI-A)^2 and
    0 <= delta_ell <= delta * lambda_min(A-ell I)^2.  Returns True iff

        phi_{u+du, ell+dl}(A) <= phi_{u, ell}(A)
            - (1-2 delta) du tr(K_up) + (1+2 delta) dl tr(K_lo).
    """
    a = np.asarray(a, dtype=float)
    _require(0.0 <= delta <= 0.1, f"delta={delta} outside [0, 1/10]")
    lam = eigvalsh(a)
    _require(lam[-1] < u and lam[0] > ell, "spectrum not inside the window")
    min_up = float((u - lam).min()) ** 2
    min_lo = float((lam - ell).min()) ** 2
    tol = 1e-12
    _require(-tol <= delta_u <= delta * min_up + tol, "delta_u outside [0, delta*lam_min(uI-A)^2]")
    _require(-tol <= delta_ell <= delta * min_lo + tol, "delta_ell outside [0, delta*lam_min(A-ell I)^2]")

    _, _, tr_up, tr_lo = _gradient_weighted_traces(a, u, ell)
    before = phi_from_gaps(u - lam, lam - ell)
    after = phi_from_gaps(u + delta_u - lam, lam - (ell + delta_ell))
    rhs = before - (1.0 - 2.0 * delta) * delta_u * tr_up + (1.0 + 2.0 * delta) * delta_ell * tr_lo
    slack = INEQ_SLACK * max(1.0, abs(after), abs(rhs))
    return after <= rhs + slack


def _barrier_square(a, bound, upper):
    lam, vec = eigh(a)
    g = (bound - lam) if upper else (lam - bound)
    return sym((vec * g**2) @ vec.T)
