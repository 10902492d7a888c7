import csv
import json

import numpy as np
import pytest

from modules.benchmark import (
    COMPLETE_OMEGAS,
    CSV_COLUMNS,
    GRID_OMEGAS,
    SweepConfig,
    cell_seeds,
    delta_j,
    run_sweep,
    write_csv,
    write_summary,
)
from modules.errors import ConfigError, GraphError, MetricError
from modules.manifest import RunManifest


TRUTH = np.array([0.4, -1.0, 0.25, 0.8])


class TestDeltaJ:
    def test_perfect_estimate(self):
        assert delta_j(TRUTH.copy(), TRUTH) == 0.0

    def test_zero_estimate(self):
        assert delta_j(np.zeros(4), TRUTH) == pytest.approx(1.0, abs=1e-15)

    def test_doubled_estimate(self):
        assert delta_j(2.0 * TRUTH, TRUTH) == pytest.approx(1.0, abs=1e-15)

    def test_flagged_edges_score_as_zero(self):
        estimate = TRUTH.copy()
        estimate[1] = np.nan
        expected = np.sqrt(1.0 / np.sum(TRUTH ** 2))
        assert delta_j(estimate, TRUTH) == pytest.approx(expected, abs=1e-15)

    def test_all_zero_truth(self):
        with pytest.raises(MetricError):
            delta_j(np.ones(3), np.zeros(3))

    def test_edge_set_mismatch(self):
        with pytest.raises(GraphError):
            delta_j(np.zeros(3), TRUTH)


class TestSweepConfig:
    def test_default_grids_follow_graph_family(self):
        assert SweepConfig(graph='complete:16').omega_grid == COMPLETE_OMEGAS
        assert SweepConfig(graph='grid2d:7x7').omega_grid == GRID_OMEGAS
        assert GRID_OMEGAS[0] == 0.1 and GRID_OMEGAS[-1] == 1.2
        assert COMPLETE_OMEGAS == (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)

    def test_from_dict(self):
        config = SweepConfig.from_dict({'graph': 'chain:4', 'omega_grid': [0.5], 'methods': ['ip', 'trw']})
        assert config.omega_grid == (0.5,)
        assert config.methods == ('ip', 'trw')
        assert config.to_dict()['methods'] == ['ip', 'trw']

    @pytest.mark.parametrize('payload', [
        {'omega_grid': [0.5]},
        {'graph': 'chain:4', 'omegas': [0.5]},
        {'graph': 'chain:4', 'regime': 'ferro'},
        {'graph': 'chain:4', 'trials': 0},
        {'graph': 'chain:4', 'methods': ['tap']},
        {'graph': 'chain:4', 'omega_grid': [-0.1]},
        [],
    ])
    def test_rejects_invalid_payloads(self, payload):
        with pytest.raises(ConfigError):
            SweepConfig.from_dict(payload)

    def test_load(self, tmp_path):
        path = tmp_path / 'sweep.json'
        path.write_text(json.dumps({'graph': 'tree:6', 'trials': 2}))
        assert SweepConfig.load(str(path)).trials == 2


class TestRunSweep:
    def test_zero_omega_is_a_metric_failure(self):
        config = SweepConfig(graph='chain:4', omega_grid=(0.0,), trials=2, exact_stats=True)
        report = run_sweep(config)
        assert len(report.records) == 2 * len(config.methods)
        assert {r['error'] for r in report.records} == {'metric_error'}
        assert all(row['mean'] is None and row['failures'] == 2 for row in report.aggregates)

    def test_bethe_exact_on_trees(self):
        config = SweepConfig(graph='tree:8', regime='mixed', omega_grid=(0.5, 1.0), trials=3,
                             methods=('bethe', 'trw'), exact_stats=True, rng_seed=4)
        report = run_sweep(config)
        assert all(r['error'] is None and r['delta_j'] < 1e-8 for r in report.records)

    def test_thread_count_does_not_change_the_report(self):
        config = SweepConfig(graph='complete:5', omega_grid=(0.5, 1.0), trials=3, sweeps=400,
                             burn_in=50, rng_seed=9)
        serial = run_sweep(config, jobs=1)
        threaded = run_sweep(config, jobs=3)
        assert serial.records == threaded.records
        assert json.dumps(serial.to_dict(), sort_keys=True) == json.dumps(threaded.to_dict(), sort_keys=True)

    def test_aggregates(self):
        config = SweepConfig(graph='complete:4', omega_grid=(1.0,), trials=4, exact_stats=True, rng_seed=2)
        report = run_sweep(config)
        row = next(r for r in report.aggregates if r['method'] == 'ip')
        values = [r['delta_j'] for r in report.records if r['method'] == 'ip']
        assert row['trials'] == 4 and row['successes'] == 4
        assert row['mean'] == pytest.approx(np.mean(values))
        assert row['stderr'] == pytest.approx(np.std(values, ddof=1) / 2.0)

    def test_cell_seeds_are_independent_of_order(self):
        first = [s.generate_state(2).tolist() for s in cell_seeds(3, 1, 2)]
        again = [s.generate_state(2).tolist() for s in cell_seeds(3, 1, 2)]
        other = [s.generate_state(2).tolist() for s in cell_seeds(3, 2, 1)]
        assert first == again
        assert first != other


class TestWriters:
    @pytest.fixture
    def report(self):
        config = SweepConfig(graph='chain:3', omega_grid=(0.0, 0.5), trials=1, exact_stats=True,
                             methods=('bethe',))
        return run_sweep(config)

    def test_csv(self, report, tmp_path):
        path = tmp_path / 'sweep.csv'
        write_csv(report, str(path))
        with open(path, newline='') as f:
            rows = list(csv.reader(f))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert rows[1][:3] == ['bethe', '0.0', '0']
        assert rows[1][3] == ''
        assert float(rows[2][3]) < 1e-8

    def test_summary(self, report, tmp_path):
        path = tmp_path / 'summary.json'
        write_summary(report, str(path), manifest=RunManifest('bench', seeds={'rng_seed': 0}).finish())
        payload = json.loads(path.read_text())
        assert payload['failures'][0]['error'] == 'metric_error'
        assert payload['manifest']['subcommand'] == 'bench'
        assert payload['metadata']['vertices'] == 3
        assert payload['metadata']['boundary'] == 'open'
        assert len(payload['aggregates']) == 2
        assert 'wall_time' not in payload['manifest']
        assert payload['timing']['wall_time'] >= 0.0
