"""Independent quality checks for graph sparsifiers.

Everything here judges a candidate subgraph against the original graph
from scratch: quadratic-form agreement on the complement of the all-ones
vector, cut-weight agreement on random vertex subsets, and a classic
resistance-sampling baseline to compare sizes against.  None of it reuses
state from the sparsification run.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh as scipy_eigh

from ._linalg import rng_from, sym
from .errors import GraphValidationError
from .graph import build_graph, complement_basis, isotropize, laplacian


@dataclass
class QualityReport:
    eps_actual: float
    lam_min: float
    lam_max: float
    rayleigh_max_dev: float
    n_probes: int


@dataclass
class CutReport:
    max_dev: float
    n_cuts: int


def check_quadratic_form(g, h, n_probes=64, seed=0):
    """Spectral comparison of h against g on the complement of ones.

    Solves the generalized eigenproblem of the two reduced Laplacians and
    reports eps_actual = max(1 - lam_min, lam_max - 1), plus the largest
    Rayleigh-quotient deviation over random probe vectors as a
    cross-check (it can never exceed eps_actual by more than roundoff).
    """
    if g.n != h.n:
        raise GraphValidationError(f"vertex counts differ: {g.n} vs {h.n}")
    q = complement_basis(g.n)
    lg = sym(q.T @ laplacian(g) @ q)
    lh = sym(q.T @ laplacian(h) @ q)
    lam = scipy_eigh(lh, lg, eigvals_only=True)
    eps_actual = float(max(1.0 - lam[0], lam[-1] - 1.0))

    rng = rng_from(seed)
    worst = 0.0
    lg_full = laplacian(g)
    lh_full = laplacian(h)
    for _ in range(n_probes):
        x = rng.standard_normal(g.n)
        x -= x.mean()
        den = float(x @ lg_full @ x)
        if den <= 0.0:
            continue
        worst = max(worst, abs(float(x @ lh_full @ x) / den - 1.0))
    return QualityReport(
        eps_actual=eps_actual,
        lam_min=float(lam[0]),
        lam_max=float(lam[-1]),
        rayleigh_max_dev=worst,
        n_probes=n_probes,
    )


def _cut_weight(g, side):
    total = 0.0
    for u, v, w in g.edges:
        if side[u] != side[v]:
            total += w
    return total


def check_cuts(g, h, n_cuts=200, seed=0):
    """Relative cut-weight agreement over random proper vertex subsets.

    Cut weights are quadratic forms at indicator vectors, so the largest
    deviation here is bounded by the quadratic-form eps_actual.
    """
    if g.n != h.n:
        raise GraphValidationError(f"vertex counts differ: {g.n} vs {h.n}")
    rng = rng_from(seed)
    worst = 0.0
    done = 0
    while done < n_cuts:
        side = rng.integers(0, 2, size=g.n).astype(bool)
        if side.all() or not side.any():
            continue
        cg = _cut_weight(g, side)
        if cg <= 0.0:
            continue
        worst = max(worst, abs(_cut_weight(h, side) / cg - 1.0))
        done += 1
    return CutReport(max_dev=worst, n_cuts=n_cuts)


def leverage_scores(g):
    """w_e * effective_resistance(e) for every edge, in edge order.

    These sum to n - 1 for a connected graph.
    """
    return isotropize(g).traces()


def effective_resistance_baseline(g, eps, seed=0):
    """Classic independent-sampling sparsifier, for size/quality baselines.

    Draws q = ceil(9 (n-1) ln(n) / eps^2) edges with replacement, each
    with probability proportional to its leverage score, reweighted so
    the expectation matches g.  Returned as a reweighted subgraph.
    """
    if not 0.0 < eps < 1.0:
        raise GraphValidationError(f"eps must be in (0, 1), got {eps}")
    lev = leverage_scores(g)
    probs = lev / lev.sum()
    d = g.n - 1
    q = int(math.ceil(9.0 * d * math.log(d + 1) / eps**2))
    rng = rng_from(seed)
    draws = rng.choice(g.m, size=q, p=probs)
    counts = np.bincount(draws, minlength=g.m)
    kept = []
    for i, cnt in enumerate(counts):
        if cnt == 0:
            continue
        u, v, w = g.edges[i]
        kept.append((u, v, w * cnt / (q * probs[i])))
    return build_graph(g.n, kept)
