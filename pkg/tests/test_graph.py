import numpy as np
import pytest

from gossipgrad.graph import (
    AveragingMatrix,
    Graph,
    GraphError,
    averaging_matrix,
    build_complete,
    build_k_regular,
    eta_lower_bound,
    is_connected,
    load_edge_list,
    mean_matrix,
    save_edge_list,
    second_largest_singular,
)


def test_triangle_is_complete():
    g = build_k_regular(3, 2, seed=0)
    assert g.edges == frozenset({(0, 1), (1, 2), (0, 2)})


def test_four_cycle():
    g = build_k_regular(4, 2, seed=0)
    assert g.edges == frozenset({(0, 1), (1, 2), (2, 3), (0, 3)})


def test_regular_degrees_and_connectivity():
    g = build_k_regular(30, 4, seed=0)
    assert np.all(g.degrees() == 4)
    assert is_connected(g)


def test_odd_degree_uses_diameter_chord():
    g = build_k_regular(30, 15, seed=0)
    assert np.all(g.degrees() == 15)
    assert is_connected(g)


@pytest.mark.parametrize("n,k", [(5, 5), (5, 3), (4, 0), (7, 3)])
def test_invalid_regular_requests_rejected(n, k):
    with pytest.raises(GraphError):
        build_k_regular(n, k, seed=0)


def test_complete_graph():
    g = build_complete(5)
    assert len(g.edges) == 10
    assert np.all(g.degrees() == 4)
    with pytest.raises(GraphError):
        build_complete(1)


def test_is_connected_cases():
    assert is_connected(build_k_regular(3, 2))
    assert not is_connected(Graph(4, frozenset({(0, 1), (2, 3)})))
    assert is_connected(Graph(1, frozenset()))


def test_graph_symmetry_and_no_self_loops():
    g = build_k_regular(12, 4, seed=0)
    for i in range(g.n):
        assert i not in g.neighbors(i)
        for j in g.neighbors(i):
            assert i in g.neighbors(j)


def test_averaging_matrix_triangle():
    a = averaging_matrix(build_k_regular(3, 2))
    assert np.allclose(a.entries, np.full((3, 3), 1 / 3))


def test_averaging_matrix_four_cycle():
    a = averaging_matrix(build_k_regular(4, 2)).entries
    assert a[0, 0] == a[0, 1] == a[0, 3] == pytest.approx(1 / 3)
    assert a[0, 2] == 0.0


def test_averaging_matrix_single_node():
    a = averaging_matrix(Graph(1, frozenset()))
    assert a.entries.shape == (1, 1)
    assert a.entries[0, 0] == 1.0


def test_averaging_matrix_rows_sum_to_one():
    for n, k in [(8, 2), (9, 4), (12, 6)]:
        a = averaging_matrix(build_k_regular(n, k)).entries
        assert np.allclose(a.sum(axis=1), 1.0, atol=1e-12)
        assert np.allclose(a, a.T)  # symmetric for regular graphs


def test_malformed_averaging_matrix_rejected():
    with pytest.raises(GraphError):
        AveragingMatrix(np.array([[0.5, 0.4], [0.5, 0.5]]))


def test_mean_matrix():
    assert mean_matrix(1) == pytest.approx(np.ones((1, 1)))
    assert np.allclose(mean_matrix(2), 0.5)
    m = mean_matrix(4)
    assert np.allclose(m, 0.25)
    assert np.linalg.matrix_rank(m) == 1


def test_second_singular_golden_values():
    tri = averaging_matrix(build_k_regular(3, 2))
    assert second_largest_singular(tri) == pytest.approx(0.0, abs=1e-9)
    cyc = averaging_matrix(build_k_regular(4, 2))
    assert second_largest_singular(cyc) == pytest.approx(1 / 3, abs=1e-9)
    ident = AveragingMatrix(np.eye(2))  # edgeless graph
    assert second_largest_singular(ident) == pytest.approx(1.0, abs=1e-9)


def test_singular_values_in_unit_interval():
    for n in range(3, 11):
        for k in [2, n - 1] + ([4] if n > 4 else []):
            if (n * k) % 2:
                continue
            a = averaging_matrix(build_k_regular(n, k)).entries
            s = np.linalg.svd(a, compute_uv=False)
            assert s[0] == pytest.approx(1.0, abs=1e-9)
            assert np.all(s >= -1e-12) and np.all(s <= 1 + 1e-9)
            # top singular vector is the all-ones direction
            _, _, vt = np.linalg.svd(a)
            v = vt[0]
            assert np.allclose(np.abs(v), 1 / np.sqrt(n), atol=1e-9)


def test_eta_lower_bound_golden():
    assert eta_lower_bound(build_k_regular(3, 2)).eta_lower_bound == pytest.approx(1.0, abs=1e-9)
    assert eta_lower_bound(build_k_regular(4, 2)).eta_lower_bound == pytest.approx(2 / 3, abs=1e-9)
    assert eta_lower_bound(build_complete(5)).eta_lower_bound == pytest.approx(1.0, abs=1e-9)


def test_eta_lower_bound_irregular_undefined():
    g = Graph(4, frozenset({(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)}))
    rep = eta_lower_bound(g)
    assert rep.degree_k is None
    assert rep.eta_lower_bound is None


def test_eta_lower_bound_disconnected_rejected():
    with pytest.raises(GraphError):
        eta_lower_bound(Graph(4, frozenset({(0, 1), (2, 3)})))


def test_eta_bound_in_unit_interval():
    for n, k in [(6, 2), (8, 4), (10, 9), (12, 6)]:
        b = eta_lower_bound(build_k_regular(n, k)).eta_lower_bound
        assert 0.0 < b <= 1.0 + 1e-12


def test_eta_bound_monotone_in_degree():
    bounds = [
        eta_lower_bound(build_k_regular(12, k)).eta_lower_bound for k in (2, 4, 6, 10)
    ]
    assert all(b2 >= b1 - 1e-12 for b1, b2 in zip(bounds, bounds[1:]))


def test_edge_list_round_trip(tmp_path):
    g = build_k_regular(9, 4, seed=0)
    path = tmp_path / "g.txt"
    save_edge_list(g, path)
    g2 = load_edge_list(path)
    assert g2.n == g.n and g2.edges == g.edges
