import json
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from sparsekit.errors import (
    ConfigError,
    OracleContractError,
    PreconditionError,
    SolverConvergenceError,
)
from sparsekit.generators import complete, path
from sparsekit.graph import from_vectors, isotropize
from sparsekit.sparsify import (
    SparsifyConfig,
    barrier_update,
    certify,
    initial_state,
    sparsify,
    sparsify_with_restarts,
)


def test_config_validation():
    SparsifyConfig(epsilon=0.04).validate()
    for bad in (0.0, 0.25, 0.3, -0.1):
        with pytest.raises(ConfigError):
            SparsifyConfig(epsilon=bad).validate()
    with pytest.raises(ConfigError):
        SparsifyConfig(epsilon=0.1, oracle="greedy").validate()
    with pytest.raises(ConfigError):
        SparsifyConfig(epsilon=0.1, delta_sdp=1.5).validate()
    with pytest.raises(ConfigError):
        SparsifyConfig(epsilon=0.1, max_iterations=0).validate()
    with pytest.raises(ConfigError):
        SparsifyConfig(epsilon=0.1, taylor_degree=1).validate()
    with pytest.raises(ConfigError):
        SparsifyConfig(epsilon=0.1, certify_tolerance=0.0).validate()
    with pytest.raises(ConfigError):
        SparsifyConfig(epsilon=0.1, restarts=0).validate()


def test_config_warns_above_soft_range(caplog):
    with caplog.at_level("WARNING", logger="sparsekit"):
        SparsifyConfig(epsilon=0.2).validate()
    assert any("epsilon" in r.message for r in caplog.records)


def test_config_resolved_defaults():
    cfg = SparsifyConfig(epsilon=0.1)
    assert cfg.resolved_delta(20) == pytest.approx(0.1 / np.log(20) ** 2)
    # dimension 1 falls back to the ln 2 floor
    assert cfg.resolved_delta(1) == cfg.resolved_delta(2)
    assert SparsifyConfig(epsilon=1e-7).resolved_delta(3) == 1e-6
    assert SparsifyConfig(epsilon=0.24).resolved_delta(2) == 0.49
    assert cfg.resolved_max_iterations(8) == int(
        np.ceil(50.0 * np.log(8) ** 2 / 0.01)
    )
    assert SparsifyConfig(epsilon=0.1, max_iterations=7).resolved_max_iterations(8) == 7
    assert SparsifyConfig(epsilon=0.1, delta_sdp=0.2).resolved_delta(50) == 0.2


def test_initial_state_window():
    st = initial_state(5)
    assert st.u == 0.25 and st.ell == -0.25
    assert np.all(st.A == 0.0)
    st.validate()


def test_barrier_update_exact_fractions():
    # eps 1/10, speed 1/32, lam 1/16, no reward error:
    #   base = 1/5120, up = base * 1.2 / 0.6, down = base * 0.8 / 1.4
    du, dl = barrier_update(0.1, 1.0 / 32.0, 1.0 / 16.0, 0.0)
    assert du == pytest.approx(float(Fraction(1, 2560)), rel=1e-14)
    assert dl == pytest.approx(float(Fraction(1, 8960)), rel=1e-14)
    assert du > dl  # the window always widens faster on top


def test_barrier_update_error_scaling():
    du0, dl0 = barrier_update(0.1, 1.0 / 32.0, 1.0 / 16.0, 0.0)
    du, dl = barrier_update(0.1, 1.0 / 32.0, 1.0 / 16.0, 0.5)
    assert du == pytest.approx(du0 * 1.5, rel=1e-14)
    assert dl == pytest.approx(dl0 * 0.5, rel=1e-14)


def test_barrier_update_preconditions():
    with pytest.raises(PreconditionError):
        barrier_update(0.3, 1.0, 0.1, 0.0)
    with pytest.raises(PreconditionError):
        barrier_update(0.1, 0.0, 0.1, 0.0)
    with pytest.raises(PreconditionError):
        barrier_update(0.1, 1.5, 0.1, 0.0)
    with pytest.raises(PreconditionError):
        barrier_update(0.1, 1.0, 0.0, 0.0)
    with pytest.raises(PreconditionError):
        barrier_update(0.1, 1.0, 0.1, 1.0)


def _k8_factors():
    return isotropize(complete(8))


def test_sparsify_complete_graph_certifies():
    fs = _k8_factors()
    res = sparsify(fs, SparsifyConfig(epsilon=0.15, seed=1))
    rep = certify(fs, res)
    assert rep.ok
    assert rep.eps_actual <= 1.5
    assert rep.nnz == res.nnz > 0
    assert res.iterations == len(res.trace.rows)
    assert res.u_final - res.ell_final >= 1.0
    # the symmetric start has no positive direction, so the first step is dead
    assert res.dead_steps >= 1
    assert res.edge_keyed
    assert res.coefficients == res.factor_coefficients


def test_sparsify_deterministic():
    fs = _k8_factors()
    r1 = sparsify(fs, SparsifyConfig(epsilon=0.15, seed=9))
    r2 = sparsify(fs, SparsifyConfig(epsilon=0.15, seed=9))
    assert r1.factor_coefficients == r2.factor_coefficients
    assert [(a.u, a.ell, a.phi) for a in r1.trace.rows] == [
        (a.u, a.ell, a.phi) for a in r2.trace.rows
    ]


def test_sparsify_observer_and_monotone_potential():
    fs = _k8_factors()
    rows = []
    res = sparsify(fs, SparsifyConfig(epsilon=0.15, seed=3), observer=rows.append)
    assert len(rows) == res.iterations
    assert [r.j for r in rows] == list(range(len(rows)))
    phis = [r.phi for r in rows]
    for a, b in zip(phis, phis[1:]):
        assert b <= a + 1e-6 * max(1.0, a)
    widths = [r.u - r.ell for r in rows]
    assert all(b > a for a, b in zip(widths, widths[1:]))


def test_trace_jsonl_round_trip(tmp_path):
    fs = _k8_factors()
    res = sparsify(fs, SparsifyConfig(epsilon=0.15, seed=5))
    p1 = tmp_path / "a.jsonl"
    p2 = tmp_path / "b.jsonl"
    res.trace.to_jsonl(p1)
    res.trace.to_jsonl(p2)
    assert p1.read_bytes() == p2.read_bytes()
    lines = p1.read_text().splitlines()
    meta = json.loads(lines[0])
    assert meta["schema"] == 1 and meta["kind"] == "meta"
    assert meta["dim"] == 7 and meta["m"] == 28
    assert meta["oracle"] == "sampling"
    assert len(lines) - 1 == res.iterations
    row = json.loads(lines[1])
    assert set(row) == {"kind", "j", "u", "ell", "lambda_min_b", "phi", "nnz", "objective"}


def test_sparsify_iteration_cap():
    fs = _k8_factors()
    with pytest.raises(SolverConvergenceError):
        sparsify(fs, SparsifyConfig(epsilon=0.15, seed=1, max_iterations=3))


def test_certify_rejects_rescaled_coefficients():
    fs = _k8_factors()
    res = sparsify(fs, SparsifyConfig(epsilon=0.15, seed=1))
    tampered = replace(
        res, factor_coefficients={k: 0.5 * v for k, v in res.factor_coefficients.items()}
    )
    rep = certify(fs, tampered, tolerance=0.3)
    assert not rep.ok
    assert rep.eps_actual == pytest.approx(0.5, abs=0.2)

    negative = replace(res, factor_coefficients={0: -1.0, 1: 2.0})
    with pytest.raises(OracleContractError):
        certify(fs, negative)


def test_restarts_return_first_certified_attempt():
    fs = _k8_factors()
    res, rep, attempt = sparsify_with_restarts(
        fs, SparsifyConfig(epsilon=0.15, seed=2, restarts=3)
    )
    assert attempt == 0
    assert rep.ok
    assert res.nnz == rep.nnz


def test_restarts_exhaust_on_unreachable_tolerance():
    fs = _k8_factors()
    cfg = SparsifyConfig(epsilon=0.15, seed=2, restarts=2, certify_tolerance=1e-6)
    with pytest.raises(SolverConvergenceError):
        sparsify_with_restarts(fs, cfg)


def test_sparsify_bare_factors_not_edge_keyed():
    fs = from_vectors(np.eye(6))
    res = sparsify(fs, SparsifyConfig(epsilon=0.15, seed=4))
    rep = certify(fs, res)
    assert rep.ok
    assert not res.edge_keyed
    # without provenance the mirror dict is keyed by factor index
    assert res.coefficients == res.factor_coefficients
    # every axis is essential here
    assert res.nnz == 6


def test_sparsify_sdp_oracle_path_graph():
    fs = isotropize(path(4))
    res = sparsify(fs, SparsifyConfig(epsilon=0.15, seed=0, oracle="sdp"))
    rep = certify(fs, res)
    assert rep.ok
    # cut edges can never be dropped
    assert res.nnz == 3


def test_sparsify_taylor_route_certifies():
    fs = _k8_factors()
    res = sparsify(fs, SparsifyConfig(epsilon=0.15, seed=6, taylor_degree=600))
    rep = certify(fs, res)
    assert rep.ok
