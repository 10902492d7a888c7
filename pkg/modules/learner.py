"""Boltzmann learning: gradient ascent on the log-likelihood by moment matching.

Model moments come from exact enumeration (exact estimator) or from
persistent Gibbs chains advanced mc_steps sweeps per update (mcmc
estimator).
"""

import csv
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import ConfigError, DivergenceError, GraphError, SizeError
from .exact_oracle import MAX_SPINS, exact_moments
from .graph_model import IsingModel
from .sampler import GibbsChain


ESTIMATORS = ('exact', 'mcmc')
MEAN_CLIP = 1.0 - 1e-9


@dataclass(frozen=True)
class LearnConfig:
    learning_rate: float = 0.1
    n_updates: int = 10000
    mc_steps_per_gradient: int = 100
    estimator: str = 'mcmc'
    rng_seed: Optional[int] = None
    chains: int = 1
    tol: Optional[float] = None

    def __post_init__(self):
        if not self.learning_rate > 0.0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.n_updates < 1 or self.mc_steps_per_gradient < 1 or self.chains < 1:
            raise ConfigError("n_updates, mc_steps_per_gradient and chains must all be at least 1")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"Unknown estimator {self.estimator!r}; expected one of {', '.join(ESTIMATORS)}")
        if self.estimator == 'mcmc' and self.rng_seed is None:
            raise ConfigError("The mcmc estimator needs an explicit rng_seed")

    def to_dict(self):
        return {
            'learning_rate': self.learning_rate,
            'n_updates': self.n_updates,
            'mc_steps_per_gradient': self.mc_steps_per_gradient,
            'estimator': self.estimator,
            'rng_seed': self.rng_seed,
            'chains': self.chains,
            'tol': self.tol,
        }


@dataclass
class LearnTrace:
    model: IsingModel
    max_gradient: List[float] = field(default_factory=list)
    log_likelihood: List[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self):
        return len(self.max_gradient)


def _data_pair_moments(stats, graph):
    edges = graph.edge_array
    return stats.second_moments()[edges[:, 0], edges[:, 1]] if graph.edge_count else np.zeros(0)


def moment_residual(model, stats, max_spins=MAX_SPINS):
    """max(|m_hat - <s>|, |<ss>_D - <ss>|) with exact model moments"""
    moments = exact_moments(model, max_spins=max_spins)
    residual = np.abs(stats.means - moments.means).max()
    if model.graph.edge_count:
        residual = max(residual, np.abs(_data_pair_moments(stats, model.graph) - moments.pair_moments).max())
    return float(residual)


def gradient_ascent(stats, graph, config, logger=None):
    """h += alpha (m_hat - <s>), J += alpha (<ss>_D - <ss>) starting at J = 0, h = arctanh(m_hat)"""
    if stats.vertex_count != graph.vertex_count:
        raise GraphError(f"Statistics describe {stats.vertex_count} spins but the graph has {graph.vertex_count}")
    edges = graph.edge_array
    target_means = stats.means
    target_pairs = _data_pair_moments(stats, graph)

    biases = np.arctanh(np.clip(target_means, -MEAN_CLIP, MEAN_CLIP))
    couplings = np.zeros(graph.edge_count)
    model = IsingModel(graph, couplings, biases)
    trace = LearnTrace(model)

    chain = None
    if config.estimator == 'mcmc':
        chain = GibbsChain(model, config.chains, np.random.default_rng(config.rng_seed))
    elif graph.vertex_count > MAX_SPINS:
        raise SizeError(f"The exact estimator is capped at {MAX_SPINS} spins, graph has {graph.vertex_count}")

    alpha = config.learning_rate
    for iteration in range(1, config.n_updates + 1):
        if chain is None:
            moments = exact_moments(model)
            model_means, model_pairs = moments.means, moments.pair_moments
            trace.log_likelihood.append(
                float(target_pairs @ model.couplings + target_means @ model.biases - moments.log_partition))
        else:
            chain.set_model(model)
            model_means, second = chain.moments(config.mc_steps_per_gradient)
            model_pairs = second[edges[:, 0], edges[:, 1]] if graph.edge_count else np.zeros(0)

        grad_h = target_means - model_means
        grad_j = target_pairs - model_pairs
        max_gradient = float(max(np.abs(grad_h).max(), np.abs(grad_j).max() if grad_j.size else 0.0))
        trace.max_gradient.append(max_gradient)
        if logger:
            logger.debug_iteration('Gradient ascent', iteration, max_gradient)

        if config.tol is not None and max_gradient <= config.tol:
            trace.converged = True
            break

        biases = model.biases + alpha * grad_h
        couplings = model.couplings + alpha * grad_j
        if not (np.all(np.isfinite(biases)) and np.all(np.isfinite(couplings))):
            raise DivergenceError(f"Gradient ascent diverged at update {iteration}", iteration=iteration)
        model = IsingModel(graph, couplings, biases)

    trace.model = model
    if logger:
        logger.info(f"Gradient ascent finished after {trace.iterations} updates "
                    f"(last max gradient {trace.max_gradient[-1]:.3e})")
    return trace


def write_trace_csv(trace, path):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['iteration', 'max_gradient', 'log_likelihood'])
        for k, gradient in enumerate(trace.max_gradient):
            likelihood = repr(trace.log_likelihood[k]) if k < len(trace.log_likelihood) else ''
            writer.writerow([k + 1, repr(gradient), likelihood])
