import numpy as np
import pytest

from sparsekit.errors import (
    FactorValidationError,
    GraphParseError,
    GraphValidationError,
)
from sparsekit.graph import (
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


def test_build_graph_canonicalizes_and_merges():
    g = build_graph(4, [(2, 1, 1.0), (1, 2, 0.5), (0, 1, 1.0), (2, 3, 2.0)])
    assert g.n == 4
    # duplicates merged by weight sum, endpoints ordered, edges sorted
    assert g.edges == ((0, 1, 1.0), (1, 2, 1.5), (2, 3, 2.0))
    assert g.m == 3


def test_build_graph_rejections():
    with pytest.raises(GraphValidationError):
        build_graph(3, [(0, 0, 1.0), (0, 1, 1.0), (1, 2, 1.0)])  # self loop
    with pytest.raises(GraphValidationError):
        build_graph(3, [(0, 1, -2.0), (1, 2, 1.0)])  # negative weight
    with pytest.raises(GraphValidationError):
        build_graph(3, [(0, 1, 0.0), (1, 2, 1.0)])  # zero weight
    with pytest.raises(GraphValidationError):
        build_graph(3, [(0, 5, 1.0)])  # id out of range
    with pytest.raises(GraphValidationError):
        build_graph(4, [(0, 1, 1.0), (2, 3, 1.0)])  # disconnected
    with pytest.raises(GraphValidationError):
        build_graph(3, [])  # no edges


def test_degrees():
    g = build_graph(3, [(0, 1, 2.0), (1, 2, 3.0)])
    assert np.allclose(g.degrees(), [2.0, 5.0, 3.0])


def test_load_save_round_trip(tmp_path):
    g = build_graph(4, [(0, 1, 0.1), (1, 2, 1 / 3), (2, 3, 7.25), (0, 3, 1.0)])
    p = tmp_path / "g.txt"
    save_graph(g, p)
    h = load_graph(p)
    assert h.n == g.n
    assert h.edges == g.edges  # bit-exact weights via repr round trip


def test_load_graph_comments_and_errors(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# header\n\n0 1 1.0  # trailing comment\n1 2 2.0\n")
    g = load_graph(p)
    assert g.m == 2
    p.write_text("0 1\n")
    with pytest.raises(GraphParseError):
        load_graph(p)
    p.write_text("0 one 1.0\n")
    with pytest.raises(GraphParseError):
        load_graph(p)
    p.write_text("# only comments\n")
    with pytest.raises(GraphValidationError):
        load_graph(p)


def test_laplacian_triangle():
    g = build_graph(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
    expect = np.array([[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]])
    assert np.array_equal(laplacian(g), expect)


def test_complement_basis_properties():
    for n in (2, 3, 7, 20):
        q = complement_basis(n)
        assert q.shape == (n, n - 1)
        assert np.allclose(q.T @ q, np.eye(n - 1), atol=1e-12)
        assert np.allclose(q.T @ np.ones(n), 0.0, atol=1e-12)


def test_isotropize_identity_sum_and_traces():
    g = build_graph(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
    fs = isotropize(g)
    assert fs.n == 2 and fs.m == 3
    total = fs.vectors.T @ fs.vectors
    assert np.allclose(total, np.eye(2), atol=1e-12)
    # every edge of a triangle has effective resistance 2/3
    assert np.allclose(fs.traces(), 2.0 / 3.0, atol=1e-12)
    assert np.array_equal(fs.provenance, [0, 1, 2])


def test_isotropize_path_bridges():
    g = build_graph(3, [(0, 1, 1.0), (1, 2, 1.0)])
    fs = isotropize(g)
    # both edges are bridges: leverage exactly 1
    assert np.allclose(fs.traces(), 1.0, atol=1e-12)


def test_isotropize_single_edge():
    g = build_graph(2, [(0, 1, 3.0)])
    fs = isotropize(g)
    assert fs.n == 1
    assert np.allclose(fs.factor(0), [[1.0]], atol=1e-12)


def test_factorset_dots_assemble_consistency():
    rng = np.random.default_rng(0)
    g = build_graph(5, [(i, j, 1.0) for i in range(5) for j in range(i + 1, 5)])
    fs = isotropize(g)
    c = rng.standard_normal((4, 4))
    c = (c + c.T) / 2
    dots = fs.dots(c)
    for i in range(fs.m):
        assert dots[i] == pytest.approx(float(np.tensordot(fs.factor(i), c)), rel=1e-12)
    picked = [0, 3, 7]
    vals = [0.5, 1.5, 2.0]
    dense = sum(v * fs.factor(i) for i, v in zip(picked, vals))
    assert np.allclose(fs.assemble(picked, vals), dense, atol=1e-12)


def test_from_matrices_validation():
    # valid: a resolution of the identity in dimension 2
    mats = np.stack([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    fs = from_matrices(mats)
    assert fs.m == 2
    with pytest.raises(FactorValidationError):
        from_matrices(np.stack([np.diag([1.0, 0.0])]))  # does not sum to I
    bad = np.stack([np.array([[1.0, 0.5], [0.5, -0.2]]), np.diag([0.0, 1.2])])
    with pytest.raises(FactorValidationError):
        from_matrices(bad)  # first factor indefinite


def test_from_vectors_validation():
    with pytest.raises(FactorValidationError):
        from_vectors(np.array([[1.0, 0.0]]))  # sums to rank-1, not I_2


def test_export_sparsifier_requires_provenance_and_drops_zeros():
    # coefficient keys refer to canonical (sorted) edge order
    g = build_graph(3, [(0, 1, 2.0), (1, 2, 1.0), (0, 2, 1.0)])
    assert g.edges == ((0, 1, 2.0), (0, 2, 1.0), (1, 2, 1.0))

    class Res:
        edge_keyed = True
        coefficients = {0: 0.5, 1: 0.0, 2: 2.0}

    h = export_sparsifier(g, Res())
    assert h.edges == ((0, 1, 1.0), (1, 2, 2.0))

    class NoProv:
        edge_keyed = False
        coefficients = {}

    with pytest.raises(GraphValidationError):
        export_sparsifier(g, NoProv())


def test_isotropize_rejects_numerically_disconnected():
    # bridge weight far below the connectivity tolerance times max degree
    g = build_graph(4, [(0, 1, 1.0), (2, 3, 1.0), (1, 2, 1e-13)])
    with pytest.raises(GraphValidationError):
        isotropize(g)
