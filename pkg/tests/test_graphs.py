"""Graph algebra: incidence construction, Laplacians, tree partition and the
spectral certificate, including the randomized positive-definiteness suites."""

import numpy as np
import pytest

from edgeform.graphs import (GraphError, Topology, TopologyClass, adjacency_laplacian,
                             build_incidence, build_laplacians, classify_topology,
                             is_connected, lemma1_certificate, tree_partition)

PATH = Topology(num_nodes=3, edges=((1, 2), (2, 3)))
CYCLE3 = Topology(num_nodes=3, edges=((1, 2), (2, 3), (3, 1)))


def random_tree(rng: np.random.Generator, directed: bool = True,
                max_nodes: int = 12) -> Topology:
    """Random out-arborescence (edges oriented away from the root) with
    shuffled node labels and edge order."""
    n = int(rng.integers(2, max_nodes + 1))
    labels = rng.permutation(n) + 1
    edges = [(int(labels[int(rng.integers(0, j))]), int(labels[j]))
             for j in range(1, n)]
    order = rng.permutation(len(edges))
    return Topology(num_nodes=n, edges=tuple(edges[k] for k in order), directed=directed)


def random_connected(rng: np.random.Generator) -> Topology:
    """Random tree plus extra chords, undirected-oriented."""
    tree = random_tree(rng, directed=False)
    n = tree.num_nodes
    existing = {frozenset(e) for e in tree.edges}
    edges = list(tree.edges)
    for _ in range(int(rng.integers(0, n))):
        i, j = int(rng.integers(1, n + 1)), int(rng.integers(1, n + 1))
        if i != j and frozenset((i, j)) not in existing:
            existing.add(frozenset((i, j)))
            edges.append((i, j))
    return Topology(num_nodes=n, edges=tuple(edges), directed=False)


def directed_cycle(n: int) -> Topology:
    return Topology(num_nodes=n, edges=tuple((i, i % n + 1) for i in range(1, n + 1)))


class TestTopologyValidation:
    def test_rejects_self_loop(self):
        with pytest.raises(GraphError):
            Topology(num_nodes=2, edges=((1, 1),))

    def test_rejects_out_of_range(self):
        with pytest.raises(GraphError):
            Topology(num_nodes=2, edges=((1, 3),))

    def test_rejects_duplicate_edge(self):
        with pytest.raises(GraphError):
            Topology(num_nodes=3, edges=((1, 2), (1, 2)))


class TestIncidence:
    def test_path_by_hand(self):
        inc = build_incidence(PATH)
        assert np.array_equal(inc.E, [[1, 0], [-1, 1], [0, -1]])
        assert np.array_equal(inc.E_in, [[0, 0], [-1, 0], [0, -1]])
        assert np.array_equal(inc.E_out, [[1, 0], [0, 1], [0, 0]])

    def test_single_edge(self):
        inc = build_incidence(Topology(num_nodes=2, edges=((1, 2),)))
        assert np.array_equal(inc.E, [[1], [-1]])
        assert np.array_equal(inc.E.sum(axis=0), [0])

    def test_five_node_cycle_shape(self):
        inc = build_incidence(directed_cycle(5))
        assert inc.E.shape == (5, 5)
        assert np.all((inc.E == 0).sum(axis=0) == 3)
        assert np.all(inc.E.max(axis=0) == 1) and np.all(inc.E.min(axis=0) == -1)

    def test_decomposition_and_column_sums_random(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            top = random_tree(rng)
            inc = build_incidence(top)
            assert np.array_equal(inc.E, inc.E_in + inc.E_out)
            assert np.all(inc.E.sum(axis=0) == 0)


class TestLaplacians:
    def test_path_by_hand(self):
        lap = build_laplacians(build_incidence(PATH), directed=True)
        assert np.array_equal(lap.L_e, [[1, 0], [-1, 1]])
        assert np.allclose(lap.L_e_sym, [[1, -0.5], [-0.5, 1]])
        assert np.allclose(np.linalg.eigvalsh(lap.L_e_sym), [0.5, 1.5])

    def test_undirected_single_edge(self):
        top = Topology(num_nodes=2, edges=((1, 2),), directed=False)
        lap = build_laplacians(build_incidence(top), directed=False)
        assert np.array_equal(lap.L_e, [[2]])

    def test_directed_cycle_identity_3(self):
        inc = build_incidence(CYCLE3)
        lhs = inc.E.T @ inc.E_in + inc.E_in.T @ inc.E
        assert np.array_equal(lhs, inc.E.T @ inc.E)

    def test_directed_cycle_identity_all_sizes(self):
        for n in range(3, 13):
            inc = build_incidence(directed_cycle(n))
            lhs = inc.E.T @ inc.E_in + inc.E_in.T @ inc.E
            assert np.array_equal(lhs, inc.E.T @ inc.E)

    def test_graph_laplacian_rows_sum_zero_and_adjacency(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            top = random_tree(rng)
            lap = build_laplacians(build_incidence(top), directed=True)
            assert np.array_equal(lap.L @ np.ones(top.num_nodes),
                                  np.zeros(top.num_nodes))
            assert np.array_equal(lap.L, adjacency_laplacian(top))

    def test_adjacency_identity_undirected(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            top = random_connected(rng)
            lap = build_laplacians(build_incidence(top), directed=False)
            assert np.array_equal(lap.L, adjacency_laplacian(top))


class TestClassification:
    def test_study_topologies(self):
        tree = Topology(num_nodes=5, edges=((2, 1), (2, 3), (3, 4), (4, 5)))
        assert classify_topology(tree) is TopologyClass.DIRECTED_SPANNING_TREE
        assert classify_topology(directed_cycle(5)) is TopologyClass.DIRECTED_CYCLE
        undirected = Topology(num_nodes=5, directed=False,
                              edges=((2, 1), (3, 2), (4, 3), (5, 4), (1, 5)))
        assert classify_topology(undirected) is TopologyClass.CONNECTED_UNDIRECTED

    def test_disconnected_unsupported(self):
        top = Topology(num_nodes=4, edges=((1, 2), (3, 4)))
        assert classify_topology(top) is TopologyClass.UNSUPPORTED
        assert not is_connected(top)

    def test_branching_out_degree_not_cycle(self):
        # correct edge count but node 1 has two successors
        top = Topology(num_nodes=3, edges=((1, 2), (1, 3), (2, 3)))
        assert classify_topology(top) is TopologyClass.UNSUPPORTED

    def test_two_disjoint_cycles_not_cycle(self):
        top = Topology(num_nodes=6, edges=((1, 2), (2, 3), (3, 1),
                                           (4, 5), (5, 6), (6, 4)))
        assert classify_topology(top) is TopologyClass.UNSUPPORTED


class TestTreePartition:
    def test_tree_gives_identity_R(self):
        part = tree_partition(PATH)
        assert np.array_equal(part.R, np.eye(2))
        assert part.E_c.shape == (3, 0)

    def test_directed_3cycle_by_hand(self):
        part = tree_partition(CYCLE3)
        gram = part.E_t.T @ part.E_t
        assert np.array_equal(gram, [[2, -1], [-1, 2]])
        assert np.allclose(np.linalg.eigvalsh(gram), [1, 3])

    def test_undirected_5cycle_reconstruction(self):
        top = Topology(num_nodes=5, directed=False,
                       edges=((2, 1), (3, 2), (4, 3), (5, 4), (1, 5)))
        inc = build_incidence(top)
        part = tree_partition(top, inc)
        E_perm = inc.E[:, list(part.edge_permutation)]
        assert np.allclose(E_perm, part.E_t @ part.R, atol=1e-10)

    def test_reconstruction_random_200(self):
        rng = np.random.default_rng(21)
        for _ in range(200):
            top = random_connected(rng)
            inc = build_incidence(top)
            part = tree_partition(top, inc)
            E_perm = inc.E[:, list(part.edge_permutation)]
            assert np.abs(E_perm - part.E_t @ part.R).max() <= 1e-10

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        top = random_connected(rng)
        p1 = tree_partition(top)
        p2 = tree_partition(top)
        assert p1.edge_permutation == p2.edge_permutation

    def test_disconnected_fails(self):
        with pytest.raises(GraphError):
            tree_partition(Topology(num_nodes=4, edges=((1, 2), (3, 4))))


class TestLemma1Certificate:
    def test_path_value(self):
        cert = lemma1_certificate(PATH)
        assert cert.matrix_name == "L_e_sym"
        assert cert.lam_min == pytest.approx(0.5, abs=1e-12)
        assert cert.passed

    def test_directed_3cycle_value(self):
        cert = lemma1_certificate(CYCLE3)
        assert cert.matrix_name == "Et^T Et"
        assert cert.lam_min == pytest.approx(1.0, abs=1e-12)
        assert cert.passed

    def test_single_edge(self):
        cert = lemma1_certificate(Topology(num_nodes=2, edges=((1, 2),)))
        assert cert.lam_min == pytest.approx(1.0, abs=1e-12)
        assert cert.passed

    def test_unsupported_raises(self):
        with pytest.raises(GraphError):
            lemma1_certificate(Topology(num_nodes=4, edges=((1, 2), (3, 4))))

    @pytest.mark.xfail(
        strict=True,
        reason="The positive-definiteness claim for the symmetrized edge "
               "Laplacian is false for general directed spanning trees: the "
               "arborescence 1->2->3->{4,5,6,7} has exact eigenvalue "
               "1 - sqrt(5)/2 < 0 (see test_symmetrized_pd_counterexample). "
               "Only shallow/small trees (N <= 5) are always PD.")
    def test_monte_carlo_trees_200(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            cert = lemma1_certificate(random_tree(rng))
            assert cert.topology_class is TopologyClass.DIRECTED_SPANNING_TREE
            assert cert.lam_min > 1e-9

    def test_monte_carlo_small_trees_200(self):
        # restricted to N <= 5, where PD does hold for every arborescence
        rng = np.random.default_rng(42)
        for _ in range(200):
            cert = lemma1_certificate(random_tree(rng, max_nodes=5))
            assert cert.lam_min > 1e-9

    def test_symmetrized_pd_counterexample(self):
        """Documents that the certificate correctly flags indefinite trees.

        For the arborescence 1->2->3 with leaves {4,5,6,7} under node 3, the
        symmetrized edge Laplacian has exact spectrum {1 (x4), 1 +- sqrt(5)/2}
        (verified symbolically), so lam_min = 1 - sqrt(5)/2 < 0.
        """
        top = Topology(num_nodes=7,
                       edges=((1, 2), (2, 3), (3, 4), (3, 5), (3, 6), (3, 7)))
        cert = lemma1_certificate(top)
        assert cert.lam_min == pytest.approx(1.0 - np.sqrt(5.0) / 2.0, abs=1e-12)
        assert not cert.passed

    def test_all_directed_cycles(self):
        for n in range(3, 13):
            cert = lemma1_certificate(directed_cycle(n))
            assert cert.topology_class is TopologyClass.DIRECTED_CYCLE
            assert cert.lam_min > 1e-9
