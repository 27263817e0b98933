"""Deterministic test-graph families.

All weights are 1 unless stated otherwise; random families take a seed
and are reproducible.  Every generator returns a connected
WeightedGraph.
"""

import numpy as np

from ._linalg import rng_from
from .errors import GraphValidationError
from .graph import build_graph


def complete(k):
    """K_k."""
    if k < 2:
        raise GraphValidationError(f"complete graph needs k >= 2, got {k}")
    return build_graph(k, [(i, j, 1.0) for i in range(k) for j in range(i + 1, k)])


def path(k):
    """Path on k vertices."""
    if k < 2:
        raise GraphValidationError(f"path needs k >= 2, got {k}")
    return build_graph(k, [(i, i + 1, 1.0) for i in range(k - 1)])


def cycle(k):
    """Cycle on k vertices."""
    if k < 3:
        raise GraphValidationError(f"cycle needs k >= 3, got {k}")
    edges = [(i, (i + 1) % k, 1.0) for i in range(k)]
    return build_graph(k, edges)


def grid(rows, cols):
    """rows x cols grid graph."""
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise GraphValidationError(f"grid needs at least 2 vertices, got {rows}x{cols}")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1, 1.0))
            if r + 1 < rows:
                edges.append((v, v + cols, 1.0))
    return build_graph(rows * cols, edges)


def barbell(k):
    """Two K_k cliques joined by a single bridge edge; 2k vertices."""
    if k < 2:
        raise GraphValidationError(f"barbell needs k >= 2, got {k}")
    edges = []
    for base in (0, k):
        edges.extend(
            (base + i, base + j, 1.0) for i in range(k) for j in range(i + 1, k)
        )
    edges.append((k - 1, k, 1.0))
    return build_graph(2 * k, edges)


def gnp(n, p, seed=0, max_resamples=100):
    """Erdos-Renyi G(n, p), resampled until connected.

    Raises GraphValidationError if max_resamples draws all come out
    disconnected; pick a larger p or n in that case.
    """
    if n < 2:
        raise GraphValidationError(f"gnp needs n >= 2, got {n}")
    if not 0.0 < p <= 1.0:
        raise GraphValidationError(f"gnp needs p in (0, 1], got {p}")
    rng = rng_from(seed)
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(max_resamples):
        mask = rng.random(iu.size) < p
        edges = [(int(a), int(b), 1.0) for a, b in zip(iu[mask], ju[mask])]
        try:
            return build_graph(n, edges)
        except GraphValidationError:
            continue
    raise GraphValidationError(
        f"no connected G({n}, {p}) sample in {max_resamples} draws"
    )


def expander_like(n, degree=6, seed=0):
    """Union of degree/2 random Hamiltonian cycles; connected by construction.

    Parallel edges from different cycles merge by weight, so weighted
    degrees are about `degree` but not exactly regular.
    """
    if n < 3:
        raise GraphValidationError(f"expander needs n >= 3, got {n}")
    if degree < 2 or degree % 2 != 0:
        raise GraphValidationError(f"degree must be a positive even number, got {degree}")
    rng = rng_from(seed)
    edges = []
    for _ in range(degree // 2):
        perm = rng.permutation(n)
        edges.extend(
            (int(perm[i]), int(perm[(i + 1) % n]), 1.0) for i in range(n)
        )
    return build_graph(n, edges)
