from fractions import Fraction

import numpy as np
import pytest

from sparsekit.errors import (
    NoPositiveDirectionError,
    OracleContractError,
    SdpDomainError,
)
from sparsekit.graph import from_matrices, from_vectors, isotropize
from sparsekit.generators import complete
from sparsekit.oracle import (
    ORACLE_SPEED,
    OracleRequest,
    budget,
    block_lambda_min,
    block_trace_inv,
    sampling_oracle,
    sampling_probabilities,
    sdp_oracle,
    validate_response,
    zero_response,
)
from sparsekit.potential import gradient_matrices
from sparsekit.sparsify import initial_state


def _identity_vectors(d):
    return from_vectors(np.eye(d))


def test_sampling_probabilities_positive_part():
    fs = _identity_vectors(3)
    c = np.diag([2.0, -1.0, 2.0])
    probs, beta = sampling_probabilities(fs, c)
    assert beta == pytest.approx(4.0)
    assert np.allclose(probs, [0.5, 0.0, 0.5])


def test_sampling_probabilities_no_direction():
    fs = _identity_vectors(2)
    with pytest.raises(NoPositiveDirectionError):
        sampling_probabilities(fs, -np.eye(2))


def test_block_quantities_and_budget():
    b_up = np.diag([0.25, 0.5])
    b_lo = np.diag([0.125, 0.25])
    assert block_lambda_min(b_up, b_lo) == pytest.approx(0.125)
    assert block_trace_inv(b_up, b_lo) == pytest.approx(4 + 2 + 8 + 4)
    assert budget(b_up, b_lo) == 2  # floor(0.125 * 18)
    with pytest.raises(SdpDomainError):
        block_trace_inv(np.diag([0.25, 0.0]), b_lo)


def test_budget_at_least_one_for_pd_blocks():
    # lambda_min * tr(B^{-1}) >= lambda_min / lambda_min = 1 always
    rng = np.random.default_rng(3)
    for _ in range(50):
        d = int(rng.integers(1, 8))
        w1 = rng.uniform(0.05, 1.0, d)
        w2 = rng.uniform(0.05, 1.0, d)
        assert budget(np.diag(w1), np.diag(w2)) >= 1


def test_sampling_oracle_single_factor_walk():
    """One factor in dimension 1 makes the whole walk computable by hand.

    With B = [[1/4]] both blocks, the budget is floor(1/4 * 8) = 2 steps:
      step 1: psi = 8,     scale = 1/32,  level -> 3/2
      step 2: psi = 64/11, scale = 11/256, level -> 35/16
    so alpha = (1/32 + 11/256) / (35/16) = 19/560.
    """
    fs = from_matrices(np.array([[[1.0]]]))
    req = OracleRequest(
        factors=fs,
        B_upper=np.array([[0.25]]),
        B_lower=np.array([[0.25]]),
        C_plus=np.array([[2.0]]),
        C_minus=np.array([[1.0]]),
        seed=123,
    )
    resp = sampling_oracle(req)
    expect = float(Fraction(19, 560))
    assert resp.alpha == pytest.approx({0: expect}, rel=1e-12)
    assert resp.Delta[0, 0] == pytest.approx(expect, rel=1e-12)
    assert resp.speed == ORACLE_SPEED == 1.0 / 32.0
    assert resp.error == 0.0
    assert resp.n_proposals == resp.n_accepted == 2
    validate_response(req, resp)


def _start_request(d, eps, seed):
    g = complete(d + 1)
    fs = isotropize(g)
    st = initial_state(d)
    c_plus, c_minus = gradient_matrices(st, eps)
    b = np.eye(d) / 16.0  # (1/4)^2 gaps at the start
    return OracleRequest(
        factors=fs, B_upper=b, B_lower=b, C_plus=c_plus, C_minus=c_minus, seed=seed
    )


def test_sampling_oracle_rejects_start_state():
    # at the symmetric start C_plus - C_minus is negative definite
    req = _start_request(6, 0.1, seed=0)
    with pytest.raises(NoPositiveDirectionError):
        sampling_oracle(req)


def _midrun_request(d, seed, oracle_eps=0.1):
    """A realistic asymmetric request: positive reward directions exist."""
    rng = np.random.default_rng(seed)
    g = complete(d + 1)
    fs = isotropize(g)
    u, ell = 0.35, -0.28
    # skew the spectrum toward ell: small lower gaps make adding mass rewarding
    lam = rng.uniform(ell + 0.12 * (u - ell), u - 0.35 * (u - ell), size=d)
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    from sparsekit._linalg import sym
    from sparsekit.potential import BarrierState

    st = BarrierState(A=sym(q @ np.diag(lam) @ q.T), u=u, ell=ell)
    c_plus, c_minus = gradient_matrices(st, oracle_eps)
    b_up = sym(q @ np.diag((u - lam) ** 2) @ q.T)
    b_lo = sym(q @ np.diag((lam - ell) ** 2) @ q.T)
    return OracleRequest(
        factors=fs, B_upper=b_up, B_lower=b_lo, C_plus=c_plus, C_minus=c_minus, seed=seed
    )


def test_sampling_oracle_contracts_on_random_states():
    for seed in range(25):
        req = _midrun_request(7, seed)
        try:
            resp = sampling_oracle(req)
        except NoPositiveDirectionError:
            continue
        validate_response(req, resp)
        assert resp.nnz <= budget(req.B_upper, req.B_lower)
        assert all(a >= 0 for a in resp.alpha.values())
        # Delta is PSD
        assert np.linalg.eigvalsh(resp.Delta)[0] >= -1e-12


def test_sampling_oracle_deterministic():
    r1 = sampling_oracle(_midrun_request(9, 42))
    r2 = sampling_oracle(_midrun_request(9, 42))
    assert r1.alpha == r2.alpha
    assert np.array_equal(r1.Delta, r2.Delta)


def test_sdp_oracle_contracts_and_error_declaration():
    d = 5
    delta = 0.05
    for seed in (1, 2, 3):
        req = _midrun_request(d, seed)
        resp = sdp_oracle(req, delta)
        validate_response(req, resp)
        assert resp.speed == ORACLE_SPEED
        assert resp.error == pytest.approx(delta * np.log(d) ** 2)
    with pytest.raises(SdpDomainError):
        sdp_oracle(_midrun_request(d, 1), 1.5)


def test_sdp_oracle_deterministic():
    r1 = sdp_oracle(_midrun_request(6, 5), 0.1)
    r2 = sdp_oracle(_midrun_request(6, 5), 0.1)
    assert r1.alpha == r2.alpha


def test_zero_response_is_valid():
    req = _midrun_request(4, 0)
    resp = zero_response(4, ORACLE_SPEED, 0.0)
    validate_response(req, resp)
    assert resp.nnz == 0


def test_validate_response_catches_tampering():
    req = _midrun_request(5, 8)
    resp = sampling_oracle(req)

    big = zero_response(5, ORACLE_SPEED, 0.0)
    big.alpha = {0: 50.0}
    big.Delta = 50.0 * req.factors.factor(0)
    with pytest.raises(OracleContractError):
        validate_response(req, big)  # Delta exceeds the bound blocks

    neg = zero_response(5, ORACLE_SPEED, 0.0)
    neg.alpha = {0: -1e-3}
    neg.Delta = -1e-3 * req.factors.factor(0)
    with pytest.raises(OracleContractError):
        validate_response(req, neg)

    lie = sampling_oracle(req)
    lie.Delta = lie.Delta * 1.5  # no longer matches its coefficients
    with pytest.raises(OracleContractError):
        validate_response(req, lie)


def test_request_validation():
    fs = _identity_vectors(3)
    good = np.eye(3) / 4
    with pytest.raises(OracleContractError):
        OracleRequest(
            factors=fs, B_upper=2 * np.eye(3), B_lower=good,
            C_plus=np.eye(3), C_minus=np.eye(3),
        ).validate()  # upper block exceeds I
    with pytest.raises(OracleContractError):
        OracleRequest(
            factors=fs, B_upper=good, B_lower=good,
            C_plus=-np.eye(3), C_minus=np.eye(3),
        ).validate()  # reward part not PSD
