import math

import numpy as np
import pytest

from modules.errors import ConfigError, DomainError, GraphError
from modules.graph_model import (
    EdgeAppearance,
    Graph,
    IsingModel,
    build_chain,
    build_complete,
    build_grid2d,
    build_grid3d,
    build_random_tree,
    edge_values_to_matrix,
    generate_biases,
    generate_couplings,
    load_model,
    parse_graph_spec,
    random_model,
    save_model,
    uniform_edge_appearance,
)


class TestGraphBuilders:
    def test_grid2d_edges_and_ids(self):
        graph = build_grid2d(3, 2)
        assert graph.vertex_count == 6
        assert graph.edge_count == 7
        # vertex id = y*width + x: (2, 0) -> 2 sits above (2, 1) -> 5
        assert (2, 5) in graph.edge_index
        assert (2, 3) not in graph.edge_index

    def test_grid3d(self):
        graph = build_grid3d(2, 2, 2)
        assert graph.vertex_count == 8
        assert graph.edge_count == 12

    def test_complete_and_chain(self):
        assert build_complete(5).edge_count == 10
        assert build_complete(5).is_complete()
        chain = build_chain(4)
        assert chain.edges == ((0, 1), (1, 2), (2, 3))
        assert chain.is_tree()

    def test_random_tree_is_tree_and_seeded(self):
        first = build_random_tree(12, rng_seed=5)
        assert first.is_tree()
        assert build_random_tree(12, rng_seed=5).edges == first.edges

    def test_edge_index_positions(self):
        graph = build_chain(3)
        assert graph.edge_index == {(0, 1): 0, (1, 2): 1}

    @pytest.mark.parametrize('graph', [
        build_grid2d(1, 1), build_grid2d(5, 3), build_grid3d(3, 2, 2), build_complete(7), build_chain(6),
        build_random_tree(10, rng_seed=2),
    ])
    def test_every_builder_is_connected(self, graph):
        assert graph.is_connected()

    def test_reference_sizes(self):
        grid = build_grid2d(7, 7)
        assert (grid.vertex_count, grid.edge_count) == (49, 84)
        np.testing.assert_allclose(uniform_edge_appearance(grid).rho, 4.0 / 7.0, rtol=1e-15)
        cube = build_grid3d(4, 4, 4)
        assert (cube.vertex_count, cube.edge_count) == (64, 144)
        complete = build_complete(16)
        assert complete.edge_count == 120
        np.testing.assert_allclose(uniform_edge_appearance(complete).rho, 0.125, rtol=1e-15)

    def test_single_site_grid_has_no_edges(self):
        graph = build_grid2d(1, 1)
        assert (graph.vertex_count, graph.edge_count) == (1, 0)
        with pytest.raises(GraphError):
            uniform_edge_appearance(graph)

    def test_rejects_non_canonical_edges(self):
        with pytest.raises(GraphError):
            Graph(3, ((1, 0),))
        with pytest.raises(GraphError):
            Graph(3, ((0, 1), (0, 1)))
        with pytest.raises(GraphError):
            Graph.from_edges(3, [(1, 1)])

    def test_from_edges_canonicalizes(self):
        graph = Graph.from_edges(3, [(2, 0), (1, 0)])
        assert graph.edges == ((0, 1), (0, 2))


class TestGraphSpec:
    @pytest.mark.parametrize('spec,vertices,edges', [
        ('grid2d:4x4', 16, 24),
        ('grid3d:2x2x3', 12, 20),
        ('complete:6', 6, 15),
        ('chain:5', 5, 4),
        ('tree:9', 9, 8),
    ])
    def test_valid_specs(self, spec, vertices, edges):
        graph = parse_graph_spec(spec)
        assert graph.vertex_count == vertices
        assert graph.edge_count == edges

    @pytest.mark.parametrize('spec', ['grid2d:4', 'torus:3x3', 'complete:', 'chain:3x3'])
    def test_invalid_specs(self, spec):
        with pytest.raises(ConfigError):
            parse_graph_spec(spec)


class TestGenerators:
    def test_attractive_range(self):
        graph = build_complete(8)
        couplings = generate_couplings(graph, 'attractive', 0.7, rng_seed=1)
        assert couplings.shape == (28,)
        assert np.all((couplings >= 0.0) & (couplings <= 0.7))

    def test_mixed_range_and_determinism(self):
        graph = build_grid2d(4, 4)
        first = generate_couplings(graph, 'mixed', 1.2, rng_seed=3)
        assert np.all(np.abs(first) <= 1.2)
        assert np.any(first < 0.0)
        np.testing.assert_array_equal(first, generate_couplings(graph, 'mixed', 1.2, rng_seed=3))

    def test_unknown_regime(self):
        with pytest.raises(ConfigError):
            generate_couplings(build_chain(3), 'ferro', 1.0, rng_seed=0)

    def test_negative_omega(self):
        with pytest.raises(DomainError):
            generate_couplings(build_chain(3), 'mixed', -1.0, rng_seed=0)

    def test_biases_range(self):
        biases = generate_biases(build_complete(50), rng_seed=2)
        assert np.all(np.abs(biases) <= 0.05)

    def test_sample_means(self):
        graph = build_complete(100)
        attractive = generate_couplings(graph, 'attractive', 1.0, rng_seed=4)
        mixed = generate_couplings(graph, 'mixed', 1.0, rng_seed=5)
        biases = generate_biases(graph, rng_seed=6)
        # 4950 uniform draws: standard error ~ 0.0041 (attractive), 0.0082 (mixed)
        assert np.mean(attractive) == pytest.approx(0.5, abs=0.03)
        assert np.mean(mixed) == pytest.approx(0.0, abs=0.05)
        # 100 bias draws on [-0.05, 0.05]: standard error ~ 0.0029
        assert np.mean(biases) == pytest.approx(0.0, abs=0.015)

    def test_random_model_accepts_seed_sequence(self):
        graph = build_chain(4)
        seed = np.random.SeedSequence([1, 2, 3])
        first = random_model(graph, 'mixed', 1.0, seed)
        second = random_model(graph, 'mixed', 1.0, np.random.SeedSequence([1, 2, 3]))
        np.testing.assert_array_equal(first.couplings, second.couplings)
        np.testing.assert_array_equal(first.biases, second.biases)


class TestEdgeAppearance:
    def test_uniform_sums_to_spanning_tree_size(self):
        graph = build_grid2d(4, 4)
        rho = uniform_edge_appearance(graph)
        np.testing.assert_allclose(rho.rho, 15 / 24)
        assert math.isclose(math.fsum(rho.rho.tolist()), 15.0, abs_tol=1e-12)
        assert rho.is_valid_distribution()

    def test_tree_gets_ones(self):
        graph = build_random_tree(10, rng_seed=4)
        np.testing.assert_array_equal(uniform_edge_appearance(graph).rho, np.ones(9))

    def test_disconnected_graph_rejected(self):
        graph = Graph(4, ((0, 1), (2, 3)))
        with pytest.raises(GraphError):
            uniform_edge_appearance(graph)

    def test_range_checked(self):
        graph = build_chain(3)
        with pytest.raises(GraphError):
            EdgeAppearance(graph, [1.0, 1.5])
        with pytest.raises(GraphError):
            EdgeAppearance(graph, [0.0, 1.0])

    def test_bethe_ones_invalid_on_loops(self):
        rho = EdgeAppearance.ones(build_complete(4))
        assert not rho.is_valid_distribution()
        with pytest.raises(GraphError):
            rho.validate()

    def test_from_dict_validates(self):
        graph = build_complete(3)
        assert EdgeAppearance.from_dict(graph, {'rho': [0.5, 0.5, 1.0]}).is_valid_distribution()
        with pytest.raises(GraphError):
            EdgeAppearance.from_dict(graph, {'rho': [0.5, 0.5, 0.5]})
        with pytest.raises(ConfigError):
            EdgeAppearance.from_dict(graph, {'weights': []})


class TestIsingModel:
    def test_energy_of_pair(self):
        model = IsingModel(build_chain(2), [1.0], [0.5, -0.25])
        assert model.energy([1, 1]) == pytest.approx(-1.0 - 0.25)
        assert model.energy([1, -1]) == pytest.approx(1.0 - 0.75)
        np.testing.assert_allclose(model.energy(np.array([[1, 1], [1, -1]])), [-1.25, 0.25])

    def test_coupling_matrix_symmetric(self):
        model = random_model(build_grid2d(3, 3), 'mixed', 1.0, rng_seed=8)
        matrix = model.coupling_matrix()
        np.testing.assert_array_equal(matrix, matrix.T)
        assert np.all(np.diag(matrix) == 0.0)
        np.testing.assert_array_equal(matrix, edge_values_to_matrix(model.graph, model.couplings))

    def test_shape_and_finiteness_checks(self):
        graph = build_chain(3)
        with pytest.raises(GraphError):
            IsingModel(graph, [1.0], [0.0, 0.0, 0.0])
        with pytest.raises(DomainError):
            IsingModel(graph, [np.inf, 0.0], [0.0, 0.0, 0.0])

    def test_parameters_are_read_only(self):
        model = IsingModel.zero(build_chain(3))
        with pytest.raises(ValueError):
            model.couplings[0] = 1.0

    def test_json_round_trip(self, tmp_path):
        model = random_model(build_complete(4), 'mixed', 0.9, rng_seed=2)
        path = tmp_path / 'model.json'
        save_model(model, str(path))
        loaded = load_model(str(path))
        assert loaded.graph == model.graph
        np.testing.assert_array_equal(loaded.couplings, model.couplings)
        np.testing.assert_array_equal(loaded.biases, model.biases)

    def test_from_dict_reorders_edges(self):
        payload = {'vertices': 3, 'edges': [[2, 1], [0, 1]], 'J': [0.2, 0.7], 'h': [0.0, 0.0, 0.0]}
        model = IsingModel.from_dict(payload)
        assert model.graph.edges == ((0, 1), (1, 2))
        np.testing.assert_array_equal(model.couplings, [0.7, 0.2])

    def test_from_dict_rejects_mismatched_lengths(self):
        with pytest.raises(ConfigError):
            IsingModel.from_dict({'vertices': 3, 'edges': [[0, 1]], 'J': [0.1, 0.2]})
        with pytest.raises(ConfigError):
            IsingModel.from_dict({'edges': [[0, 1]], 'J': [0.1]})
