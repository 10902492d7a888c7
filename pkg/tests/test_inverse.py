import math

import numpy as np
import pytest

from modules.errors import GraphError, SingularCovarianceError
from modules.exact_oracle import exact_statistics
from modules.graph_model import (
    EdgeAppearance,
    IsingModel,
    build_chain,
    build_complete,
    random_model,
    uniform_edge_appearance,
)
from modules.inverse import (
    METHODS,
    InferredCouplings,
    inverse_covariance,
    invert_all,
    invert_bethe,
    invert_ip,
    invert_sm,
    invert_trw,
    recover_biases,
)
from modules.sampler import DataStatistics
from modules.trw_forward import linear_response_covariance


def pair_stats(c, m1=0.0, m2=0.0):
    return DataStatistics([m1, m2], [[1.0 - m1 ** 2, c], [c, 1.0 - m2 ** 2]])


def independent_stats(means):
    means = np.asarray(means, dtype=float)
    return DataStatistics(means, np.diag(1.0 - means ** 2))


class TestIndependentPair:
    def test_uncorrelated_pair_gives_zero(self):
        result = invert_ip(independent_stats([0.3, -0.2]))
        assert result.couplings[0] == pytest.approx(0.0, abs=1e-15)

    def test_symmetric_pair(self):
        result = invert_ip(pair_stats(math.tanh(0.7)))
        assert result.couplings[0] == pytest.approx(0.7, abs=1e-14)
        assert result.method == 'ip'

    def test_exact_pair_with_fields(self):
        stats = exact_statistics(IsingModel(build_chain(2), [0.3], [0.25, -0.15]))
        assert invert_ip(stats).couplings[0] == pytest.approx(0.3, abs=1e-10)

    def test_out_of_domain_edge_is_flagged(self):
        result = invert_ip(pair_stats(1.0))
        assert result.flagged_edges == [0]
        assert result.diagnostics['flagged_edges'] == [[0, 1]]
        assert result.to_dict()['J'] == [None]
        np.testing.assert_array_equal(result.to_model().couplings, [0.0])


class TestTreeReweighted:
    def test_symmetric_pair(self):
        stats = pair_stats(math.tanh(0.5))
        result = invert_trw(stats, EdgeAppearance.ones(build_chain(2)))
        assert result.couplings[0] == pytest.approx(0.5, abs=1e-12)

    def test_zero_inverse_entry_gives_zero_coupling(self):
        graph = build_complete(3)
        result = invert_trw(independent_stats([0.1, 0.4, -0.3]), uniform_edge_appearance(graph))
        np.testing.assert_array_equal(result.couplings, np.zeros(3))

    def test_tree_round_trip(self, tree_model, tree_stats):
        rho = EdgeAppearance.ones(tree_model.graph)
        result = invert_trw(tree_stats, rho)
        assert result.flagged_edges == []
        np.testing.assert_allclose(result.couplings, tree_model.couplings, atol=1e-8)

    def test_linear_response_round_trip(self):
        # TRW statistics of a loopy model are inverted exactly by the TRW formula
        model = random_model(build_complete(5), 'mixed', 0.4, rng_seed=17)
        rho = uniform_edge_appearance(model.graph)
        means, covariance = linear_response_covariance(model, rho, step=1e-4, tol=1e-13)
        result = invert_trw(DataStatistics(means, covariance), rho)
        np.testing.assert_allclose(result.couplings, model.couplings, atol=1e-5)

    def test_graph_mismatch(self):
        with pytest.raises(GraphError):
            invert_trw(pair_stats(0.1), uniform_edge_appearance(build_complete(3)))

    def test_off_graph_diagnostic(self, tree_model, tree_stats):
        result = invert_trw(tree_stats, EdgeAppearance.ones(tree_model.graph))
        assert result.diagnostics['off_graph_max'] < 1e-8
        assert 'condition_number' in result.diagnostics


class TestBetheAndSusceptibility:
    def test_bethe_is_trw_with_unit_rho(self):
        model = random_model(build_complete(6), 'mixed', 1.0, rng_seed=4)
        stats = exact_statistics(model)
        bethe = invert_bethe(stats)
        trw = invert_trw(stats, EdgeAppearance.ones(model.graph))
        assert bethe.method == 'bethe'
        np.testing.assert_array_equal(bethe.couplings, trw.couplings)

    def test_bethe_tree_round_trip(self, tree_model, tree_stats):
        result = invert_bethe(tree_stats, tree_model.graph)
        np.testing.assert_allclose(result.couplings, tree_model.couplings, atol=1e-8)

    def test_sm_independent_spins(self):
        result = invert_sm(independent_stats([0.2, -0.5, 0.1, 0.0]))
        np.testing.assert_allclose(result.couplings, 0.0, atol=1e-14)

    @pytest.mark.parametrize('method', METHODS)
    def test_exact_on_isolated_pair(self, method):
        stats = exact_statistics(IsingModel(build_chain(2), [-1.1], [0.35, 0.2]))
        result = invert_all(stats, EdgeAppearance.ones(build_chain(2)), methods=(method,))[method]
        assert result.couplings[0] == pytest.approx(-1.1, abs=1e-9)

    def test_singular_covariance(self):
        stats = pair_stats(1.0)
        with pytest.raises(SingularCovarianceError):
            invert_sm(stats)
        with pytest.raises(SingularCovarianceError):
            invert_trw(stats, EdgeAppearance.ones(build_chain(2)))


class TestWeakCoupling:
    def _disagreement(self, omega):
        model = random_model(build_complete(10), 'mixed', omega, rng_seed=23)
        stats = exact_statistics(model)
        inverse, _ = inverse_covariance(stats.covariance)
        edges = model.graph.edge_array
        mean_field = -inverse[edges[:, 0], edges[:, 1]]
        results = invert_all(stats)
        estimates = [results[method].couplings for method in METHODS] + [mean_field]
        return max(np.max(np.abs(a - b)) for a in estimates for b in estimates)

    def test_methods_agree_to_second_order(self):
        coarse = self._disagreement(0.01)
        fine = self._disagreement(0.001)
        assert coarse < 5e-3
        assert coarse / fine > 50.0


class TestResults:
    def test_vertex_relabelling(self):
        stats = exact_statistics(random_model(build_complete(5), 'mixed', 0.5, rng_seed=3, bias_scale=0.3))
        perm = np.array([3, 0, 4, 1, 2])
        means = np.empty(5)
        means[perm] = stats.means
        covariance = np.empty((5, 5))
        covariance[np.ix_(perm, perm)] = stats.covariance
        relabelled = invert_all(DataStatistics(means, covariance, 0))
        for method, result in invert_all(stats).items():
            moved = relabelled[method].matrix()[np.ix_(perm, perm)]
            np.testing.assert_allclose(moved, result.matrix(), atol=1e-10, err_msg=method)

    def test_invert_all_runs_every_method(self):
        stats = exact_statistics(random_model(build_complete(4), 'mixed', 0.5, rng_seed=1))
        results = invert_all(stats)
        assert list(results) == list(METHODS)
        assert all(isinstance(result, InferredCouplings) for result in results.values())
        assert all(result.graph.is_complete() for result in results.values())

    def test_recover_biases_on_tree(self, tree_model, tree_stats):
        rho = EdgeAppearance.ones(tree_model.graph)
        couplings = invert_bethe(tree_stats, tree_model.graph)
        np.testing.assert_allclose(recover_biases(tree_stats, couplings, rho), tree_model.biases, atol=1e-7)
