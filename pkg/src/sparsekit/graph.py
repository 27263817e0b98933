"""Weighted graphs, Laplacians, and the isotropic reduction.

A connected weighted graph G is turned into a set of rank-1 PSD factors
M_e = v_e v_e^T in dimension n-1 with sum_e M_e = I.  The factors live on
the orthogonal complement of the all-ones vector: with Q an orthonormal
basis of that complement and L_red = Q^T L Q the reduced Laplacian,

    v_e = sqrt(w_e) * L_red^{-1/2} Q^T b_e,

where b_e is the signed incidence vector of edge e.  The trace of M_e is
w_e times the effective resistance of e, so traces sum to n-1.

Tolerances used by this module:

    TAU_SUM   Frobenius tolerance on ||sum M_i - I||, scaled by dimension
    TAU_CONN  relative floor on the algebraic connectivity of L
"""

from dataclasses import dataclass, field

import numpy as np

from ._linalg import eigh, sym
from .errors import FactorValidationError, GraphParseError, GraphValidationError

TAU_SUM = 1e-8
TAU_CONN = 1e-10


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected weighted graph with vertex ids 0..n-1.

    Edges are stored canonically as (u, v, w) with u < v, sorted, one entry
    per vertex pair.  Weights are strictly positive.
    """

    n: int
    edges: tuple

    @property
    def m(self):
        return len(self.edges)

    def degrees(self):
        deg = np.zeros(self.n)
        for u, v, w in self.edges:
            deg[u] += w
            deg[v] += w
        return deg


def _canonical_edges(n, raw_edges, merge_duplicates=True):
    """Validate and canonicalize an iterable of (u, v, w) triples."""
    merged = {}
    for u, v, w in raw_edges:
        u, v, w = int(u), int(v), float(w)
        if u == v:
            raise GraphValidationError(f"self loop at vertex {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphValidationError(f"vertex id out of range: ({u}, {v})")
        if not w > 0 or not np.isfinite(w):
            raise GraphValidationError(f"nonpositive weight {w} on edge ({u}, {v})")
        key = (u, v) if u < v else (v, u)
        if key in merged and not merge_duplicates:
            raise GraphValidationError(f"duplicate edge {key}")
        merged[key] = merged.get(key, 0.0) + w
    return tuple((u, v, w) for (u, v), w in sorted(merged.items()))


def _connected(n, edges):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v, _ in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
    return len({find(x) for x in range(n)}) == 1


def build_graph(n, edges):
    """Construct a validated WeightedGraph from raw (u, v, w) triples.

    Parallel edges are merged by summing weights.  Raises
    GraphValidationError for self loops, nonpositive weights, bad vertex
    ids, or a disconnected graph.
    """
    if n < 2:
        raise GraphValidationError(f"need at least 2 vertices, got {n}")
    canon = _canonical_edges(n, edges)
    if not canon:
        raise GraphValidationError("graph has no edges")
    if not _connected(n, canon):
        raise GraphValidationError("graph is not connected")
    return WeightedGraph(n=n, edges=canon)


def load_graph(path):
    """Read a whitespace-separated "u v w" edge list.

    Lines starting with '#' and blank lines are ignored.  Duplicate edges
    are merged by summing their weights.  The vertex count is one plus the
    largest id seen.  Tokenization problems raise GraphParseError;
    semantic problems raise GraphValidationError.
    """
    raw = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 3:
                raise GraphParseError(
                    f"{path}:{lineno}: expected 'u v w', got {line.strip()!r}"
                )
            try:
                u, v = int(parts[0]), int(parts[1])
                w = float(parts[2])
            except ValueError as exc:
                raise GraphParseError(f"{path}:{lineno}: {exc}") from exc
            raw.append((u, v, w))
    if not raw:
        raise GraphValidationError(f"{path}: no edges found")
    ids = [u for u, _, _ in raw] + [v for _, v, _ in raw]
    if min(ids) < 0:
        raise GraphValidationError(f"{path}: negative vertex id")
    n = max(ids) + 1
    return build_graph(n, raw)


def save_graph(g, path):
    """Write an edge list in the same format load_graph reads.

    Weights use repr() so a load/save round trip is bit exact.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# sparsekit edge list: n={g.n} m={g.m}\n")
        for u, v, w in g.edges:
            fh.write(f"{u} {v} {w!r}\n")


def laplacian(g):
    """Dense graph Laplacian L = sum_e w_e b_e b_e^T."""
    lap = np.zeros((g.n, g.n))
    for u, v, w in g.edges:
        lap[u, u] += w
        lap[v, v] += w
        lap[u, v] -= w
        lap[v, u] -= w
    return lap


def complement_basis(n):
    """Orthonormal basis Q (n x (n-1)) of the complement of the all-ones
    vector, built from a Householder reflection so it is deterministic."""
    e1 = np.zeros(n)
    e1[0] = 1.0
    ones = np.full(n, 1.0 / np.sqrt(n))
    u = e1 - ones
    h = np.eye(n) - 2.0 * np.outer(u, u) / (u @ u)
    return h[:, 1:]


@dataclass(frozen=True)
class FactorSet:
    """A set of symmetric PSD matrices M_i with sum_i M_i = I_n.

    Rank-1 factors are stored as rows of `vectors` (M_i = v_i v_i^T);
    general factors as an (m, n, n) stack in `matrices`.  Exactly one of
    the two is set.  `provenance[i]` maps factor i back to the edge index
    it came from, when the set was derived from a graph.
    """

    n: int
    vectors: np.ndarray = None
    matrices: np.ndarray = None
    provenance: np.ndarray = None

    @property
    def m(self):
        store = self.vectors if self.vectors is not None else self.matrices
        return store.shape[0]

    def factor(self, i):
        if self.vectors is not None:
            v = self.vectors[i]
            return np.outer(v, v)
        return self.matrices[i]

    def dots(self, c):
        """Vector of inner products M_i . C for all factors."""
        if self.vectors is not None:
            return np.einsum("ij,jk,ik->i", self.vectors, c, self.vectors)
        return np.einsum("ijk,jk->i", self.matrices, c)

    def traces(self):
        if self.vectors is not None:
            return np.einsum("ij,ij->i", self.vectors, self.vectors)
        return np.einsum("ikk->i", self.matrices)

    def assemble(self, indices, values):
        """Dense sum_i values[i] * M_indices[i]."""
        total = np.zeros((self.n, self.n))
        if len(indices) == 0:
            return total
        idx = np.asarray(indices, dtype=int)
        val = np.asarray(values, dtype=float)
        if self.vectors is not None:
            vs = self.vectors[idx]
            return sym((vs * val[:, None]).T @ vs)
        for i, a in zip(idx, val):
            total += a * self.matrices[i]
        return sym(total)

    def validate(self):
        """Check PSD-ness of each factor and sum-to-identity."""
        ident = np.eye(self.n)
        total = np.zeros((self.n, self.n))
        if self.vectors is not None:
            total = self.vectors.T @ self.vectors
        else:
            for i in range(self.m):
                mi = self.matrices[i]
                if not np.allclose(mi, mi.T, atol=1e-12):
                    raise FactorValidationError(f"factor {i} not symmetric")
                w = np.linalg.eigvalsh(sym(mi))
                scale = max(abs(w[-1]), 1.0)
                if w[0] < -1e-9 * scale:
                    raise FactorValidationError(
                        f"factor {i} not PSD: min eigenvalue {w[0]:.3e}"
                    )
                total += mi
        err = np.linalg.norm(total - ident)
        if err > TAU_SUM * self.n:
            raise FactorValidationError(
                f"factors sum to identity only within {err:.3e} "
                f"(allowed {TAU_SUM * self.n:.3e})"
            )
        return err


def from_vectors(vectors, provenance=None):
    vectors = np.asarray(vectors, dtype=float)
    fs = FactorSet(n=vectors.shape[1], vectors=vectors, provenance=provenance)
    fs.validate()
    return fs


def from_matrices(matrices, provenance=None):
    matrices = np.asarray(matrices, dtype=float)
    fs = FactorSet(n=matrices.shape[1], matrices=matrices, provenance=provenance)
    fs.validate()
    return fs


def isotropize(g):
    """Reduce a connected graph to rank-1 factors summing to I_{n-1}.

    Parameters
    ----------
    g : WeightedGraph

    Returns
    -------
    FactorSet with m = g.m rank-1 factors in dimension n-1 and identity
    provenance (factor i corresponds to edge i of g.edges).

    Raises
    ------
    GraphValidationError if the algebraic connectivity falls below
    TAU_CONN times the maximum weighted degree, i.e. the graph is
    numerically disconnected.
    """
    n = g.n
    lap = laplacian(g)
    q = complement_basis(n)
    lred = sym(q.T @ lap @ q)
    w, u = eigh(lred)
    max_deg = float(g.degrees().max())
    if w[0] <= TAU_CONN * max_deg:
        raise GraphValidationError(
            f"algebraic connectivity {w[0]:.3e} below threshold "
            f"{TAU_CONN * max_deg:.3e}: graph is numerically disconnected"
        )
    # columns of proj map incidence vectors into the isotropic coordinates
    root_inv = sym((u * (1.0 / np.sqrt(w))) @ u.T)
    proj = root_inv @ q.T
    vecs = np.empty((g.m, n - 1))
    for i, (a, b, wt) in enumerate(g.edges):
        vecs[i] = np.sqrt(wt) * (proj[:, a] - proj[:, b])
    return from_vectors(vecs, provenance=np.arange(g.m))


def export_sparsifier(g, result):
    """Materialize a sparsifier as a reweighted subgraph of g.

    Edge i of g keeps weight result.coefficients[i] * w_i when the
    coefficient is positive, and is dropped otherwise.  Requires a result
    whose coefficients are keyed by edge index (i.e. produced from a
    factor set with provenance).
    """
    if not getattr(result, "edge_keyed", False):
        raise GraphValidationError(
            "sparsifier result has no edge provenance; cannot export"
        )
    kept = []
    for i, c in sorted(result.coefficients.items()):
        if c <= 0:
            continue
        u, v, w = g.edges[i]
        kept.append((u, v, c * w))
    return build_graph(g.n, kept)
