"""Reconstruction sweeps: generate a model, take its statistics, invert, score.

Every (omega, trial) cell derives its own seeds from
SeedSequence([seed, omega_index, trial]), so a report is identical whatever
the number of worker threads.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from . import __version__
from .errors import ConfigError, GraphError, IsingError, MetricError
from .exact_oracle import MAX_SPINS, exact_statistics
from .graph_model import REGIMES, parse_graph_spec, random_model, uniform_edge_appearance
from .inverse import METHODS, invert_all
from .manifest import read_json, write_json
from .parallel_base_processor import ParallelBaseProcessor
from .sampler import gibbs_sample, statistics


GRID_OMEGAS = tuple(round(0.1 * k, 10) for k in range(1, 13))
COMPLETE_OMEGAS = tuple(0.5 * k for k in range(1, 9))
CSV_COLUMNS = ('method', 'omega', 'trial', 'delta_j', 'failures')


@dataclass(frozen=True)
class SweepConfig:
    graph: str
    regime: str = 'attractive'
    omega_grid: Tuple[float, ...] = ()
    trials: int = 10
    methods: Tuple[str, ...] = METHODS
    rng_seed: int = 0
    exact_stats: bool = False
    sweeps: int = 100000
    burn_in: int = 1000
    thin: int = 1
    chains: int = 1

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigError(f"Unknown regime {self.regime!r}; expected one of {', '.join(REGIMES)}")
        if not self.omega_grid:
            family = self.graph.split(':', 1)[0].strip().lower()
            object.__setattr__(self, 'omega_grid', COMPLETE_OMEGAS if family == 'complete' else GRID_OMEGAS)
        object.__setattr__(self, 'omega_grid', tuple(float(w) for w in self.omega_grid))
        object.__setattr__(self, 'methods', tuple(self.methods))
        if any(not w >= 0.0 for w in self.omega_grid):
            raise ConfigError("omega values must be non-negative")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown or not self.methods:
            raise ConfigError(f"Methods must be a non-empty subset of {', '.join(METHODS)}")
        if self.sweeps < 1 or self.thin < 1 or self.burn_in < 0 or self.chains < 1:
            raise ConfigError("Sampler settings need sweeps >= 1, thin >= 1, burn_in >= 0, chains >= 1")

    @classmethod
    def from_dict(cls, payload):
        if not isinstance(payload, dict) or 'graph' not in payload:
            raise ConfigError("Sweep config must be a JSON object with at least a 'graph' entry")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ConfigError(f"Unknown sweep config keys: {', '.join(unknown)}")
        try:
            return cls(**payload)
        except TypeError as e:
            raise ConfigError(f"Malformed sweep config: {e}")

    @classmethod
    def load(cls, path):
        return cls.from_dict(read_json(path))

    def to_dict(self):
        return {name: (list(value) if isinstance(value, tuple) else value)
                for name, value in ((f, getattr(self, f)) for f in self.__dataclass_fields__)}


@dataclass
class ReconstructionReport:
    config: SweepConfig
    records: List[dict] = field(default_factory=list)
    aggregates: List[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            'config': self.config.to_dict(),
            'aggregates': self.aggregates,
            'failures': [r for r in self.records if r['error'] is not None],
            'metadata': self.metadata,
        }


def delta_j(estimate, truth):
    """sqrt(sum (J - J_true)^2 / sum J_true^2) over edges; flagged (NaN) edges count as J = 0"""
    truth_graph = getattr(truth, 'graph', None)
    truth_values = np.asarray(getattr(truth, 'couplings', truth), dtype=float)
    values = np.asarray(getattr(estimate, 'couplings', estimate), dtype=float)
    estimate_graph = getattr(estimate, 'graph', None)
    if values.shape != truth_values.shape or (
            truth_graph is not None and estimate_graph is not None and truth_graph.edges != estimate_graph.edges):
        raise GraphError("Estimate and truth must cover the same edge set")
    denominator = math.fsum((truth_values ** 2).tolist())
    if denominator == 0.0:
        raise MetricError("delta_J is undefined for an all-zero true coupling set")
    values = np.where(np.isfinite(values), values, 0.0)
    return math.sqrt(math.fsum(((values - truth_values) ** 2).tolist()) / denominator)


def cell_seeds(seed, omega_index, trial):
    """(model seed, sampling seed) for one sweep cell"""
    return np.random.SeedSequence([seed, omega_index, trial]).spawn(2)


def cell_statistics(config, model, sample_seed):
    if config.exact_stats:
        return exact_statistics(model, max_spins=MAX_SPINS)
    samples = gibbs_sample(model, config.sweeps, config.burn_in, config.thin, sample_seed, chains=config.chains)
    return statistics(samples)


class SweepProcessor(ParallelBaseProcessor):
    """One cell = one (omega_index, trial) pair; yields one record per method"""

    def __init__(self, config, max_workers=1, display=None, logger=None):
        super().__init__(max_workers=max_workers, display=display, logger=logger)
        self.config = config
        self.graph = parse_graph_spec(config.graph, rng_seed=config.rng_seed)
        self.rho = uniform_edge_appearance(self.graph)

    def _record(self, method, omega_index, trial, value=None, failures=0, error=None):
        return {
            'method': method,
            'omega': self.config.omega_grid[omega_index],
            'trial': trial,
            'delta_j': value,
            'failures': failures,
            'error': error,
        }

    def _process_cell(self, cell):
        omega_index, trial = cell
        omega = self.config.omega_grid[omega_index]
        model_seed, sample_seed = cell_seeds(self.config.rng_seed, omega_index, trial)
        model = random_model(self.graph, self.config.regime, omega, model_seed)
        stats = cell_statistics(self.config, model, sample_seed)

        records = []
        for method in self.config.methods:
            try:
                estimate = invert_all(stats, self.rho, methods=(method,))[method]
                flagged = len(estimate.flagged_edges)
                records.append(self._record(method, omega_index, trial, delta_j(estimate, model), flagged))
            except IsingError as e:
                self._safe_log('debug', f"{method} at omega={omega} trial={trial}: {e.message}")
                records.append(self._record(method, omega_index, trial, error=e.kind))
        return records

    def _failure_record(self, cell, error):
        omega_index, trial = cell
        return [self._record(method, omega_index, trial, error=error.kind) for method in self.config.methods]


def aggregate(records, config):
    """Mean and standard error of delta_J per (method, omega) over successful trials"""
    rows = []
    for omega in config.omega_grid:
        for method in config.methods:
            cell = [r for r in records if r['method'] == method and r['omega'] == omega]
            values = [r['delta_j'] for r in cell if r['error'] is None]
            mean = float(np.mean(values)) if values else None
            stderr = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else None
            rows.append({
                'method': method,
                'omega': omega,
                'trials': len(cell),
                'successes': len(values),
                'mean': mean,
                'stderr': stderr,
                'failures': len(cell) - len(values),
                'flagged_edges': sum(r['failures'] for r in cell),
            })
    return rows


def run_sweep(config, jobs=1, display=None, logger=None):
    processor = SweepProcessor(config, max_workers=jobs, display=display, logger=logger)
    if logger:
        logger.info(f"Sweep on {config.graph}: {len(config.omega_grid)} omega values x {config.trials} trials, "
                    f"{'exact' if config.exact_stats else 'sampled'} statistics")
    cells = [(k, trial) for k in range(len(config.omega_grid)) for trial in range(config.trials)]
    records = [record for cell_records in processor.execute(cells) for record in cell_records]
    return ReconstructionReport(
        config=config,
        records=records,
        aggregates=aggregate(records, config),
        metadata={
            'version': __version__,
            'rng_seed': config.rng_seed,
            'vertices': processor.graph.vertex_count,
            'edges': processor.graph.edge_count,
            'seed_scheme': 'SeedSequence([rng_seed, omega_index, trial]).spawn(2) -> (model, sampling)',
            'boundary': 'open',
        },
    )


def write_csv(report, path):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for record in report.records:
            value = '' if record['delta_j'] is None else repr(record['delta_j'])
            writer.writerow([record['method'], repr(record['omega']), record['trial'], value, record['failures']])


def write_summary(report, path, manifest=None):
    """Summary JSON; the run's wall time sits under 'timing', apart from the reproducible part"""
    payload = report.to_dict()
    if manifest is not None:
        recorded = manifest.to_dict()
        payload['timing'] = {'wall_time': recorded.pop('wall_time')}
        payload['manifest'] = recorded
    write_json(path, payload)
