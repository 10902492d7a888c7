"""Brute-force enumeration over all 2^|V| spin states.

Reduction order: states are visited in ascending integer index (bit i of the
index is spin i, 1 -> +1), in chunks of 2^chunk_bits states. Each chunk is
reduced with a shifted exponential and folded into running accumulators in
chunk order, so results are bit-reproducible for a fixed chunk size.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import SizeError
from .graph_model import Graph, IsingModel, build_complete
from .sampler import DataStatistics


MAX_SPINS = 24
CHUNK_BITS = 16


@dataclass(frozen=True, eq=False)
class ExactMoments:
    log_partition: float
    means: np.ndarray
    pair_moments: np.ndarray
    covariance: np.ndarray

    def to_statistics(self):
        """Exact moments viewed as data statistics (sample_count 0 = exact)"""
        return DataStatistics(self.means, self.covariance, 0)

    def to_dict(self):
        return {
            'log_partition': self.log_partition,
            'means': self.means.tolist(),
            'pair_moments': self.pair_moments.tolist(),
            'covariance': self.covariance.tolist(),
        }


def _check_size(model, max_spins):
    if model.vertex_count > max_spins:
        raise SizeError(
            f"Exact enumeration is capped at {max_spins} spins, model has {model.vertex_count}"
        )


def _state_chunks(n, chunk_bits):
    """Yield (2^k, n) float matrices of +/-1 states in ascending index order"""
    total = 1 << n
    size = 1 << min(chunk_bits, n)
    bits = np.arange(n, dtype=np.int64)
    for start in range(0, total, size):
        index = np.arange(start, min(start + size, total), dtype=np.int64)
        yield (((index[:, None] >> bits) & 1) * 2 - 1).astype(float)


def _log_weights(model, states):
    """-E(s) for a block of states"""
    return -model.energy(states)


def log_partition(model, max_spins=MAX_SPINS, chunk_bits=CHUNK_BITS):
    """ln Z by chunked log-sum-exp"""
    _check_size(model, max_spins)
    chunk_values = [logsumexp(_log_weights(model, states))
                    for states in _state_chunks(model.vertex_count, chunk_bits)]
    return float(logsumexp(chunk_values))


def exact_moments(model, max_spins=MAX_SPINS, chunk_bits=CHUNK_BITS):
    """Phi, <s_i>, per-edge <s_i s_j> and the all-pairs covariance from the Boltzmann distribution"""
    _check_size(model, max_spins)
    n = model.vertex_count
    shift = -np.inf
    total = 0.0
    first = np.zeros(n)
    second = np.zeros((n, n))

    for states in _state_chunks(n, chunk_bits):
        log_w = _log_weights(model, states)
        chunk_max = log_w.max()
        if chunk_max > shift:
            # Rescale the running sums to the new reference point
            scale = np.exp(shift - chunk_max) if np.isfinite(shift) else 0.0
            total *= scale
            first *= scale
            second *= scale
            shift = chunk_max
        weights = np.exp(log_w - shift)
        total += weights.sum()
        first += weights @ states
        second += states.T @ (weights[:, None] * states)

    means = first / total
    moments = second / total
    moments = 0.5 * (moments + moments.T)
    covariance = moments - np.outer(means, means)
    covariance = 0.5 * (covariance + covariance.T)
    np.fill_diagonal(covariance, 1.0 - means ** 2)

    edges = model.graph.edge_array
    pair_moments = moments[edges[:, 0], edges[:, 1]] if model.graph.edge_count else np.zeros(0)
    return ExactMoments(
        log_partition=float(shift + np.log(total)),
        means=means,
        pair_moments=pair_moments,
        covariance=covariance,
    )


def exact_statistics(model, max_spins=MAX_SPINS):
    """DataStatistics of the model itself (infinite-data limit)"""
    return exact_moments(model, max_spins=max_spins).to_statistics()


def log_likelihood(model, stats, max_spins=MAX_SPINS):
    """l(theta) = -<E>_D - Phi(theta) = sum J_ij <s_i s_j>_D + sum h_i m_i - Phi"""
    second = stats.second_moments()
    edges = model.graph.edge_array
    pair_term = float(second[edges[:, 0], edges[:, 1]] @ model.couplings) if model.graph.edge_count else 0.0
    return pair_term + float(stats.means @ model.biases) - log_partition(model, max_spins=max_spins)


def _complete_extension(model):
    """Same parameters on the complete graph (zero couplings off the original edges)"""
    n = model.vertex_count
    complete = build_complete(n) if n > 1 else Graph(1, ())
    couplings = model.coupling_matrix()
    values = couplings[complete.edge_array[:, 0], complete.edge_array[:, 1]] if complete.edge_count else []
    return IsingModel(complete, values, model.biases)


def finite_difference_moments(model, step=1e-5, max_spins=MAX_SPINS):
    """Moments as central differences of log_partition w.r.t. h_i and J_ij.

    The covariance is assembled from pair derivatives on the complete
    extension of the graph, so it covers every pair.
    """
    _check_size(model, max_spins)
    extended = _complete_extension(model)
    n = model.vertex_count

    def central(biases=None, couplings=None, index=0):
        if biases is not None:
            plus, minus = biases.copy(), biases.copy()
            plus[index] += step
            minus[index] -= step
            up = log_partition(extended.with_parameters(biases=plus), max_spins)
            down = log_partition(extended.with_parameters(biases=minus), max_spins)
        else:
            plus, minus = couplings.copy(), couplings.copy()
            plus[index] += step
            minus[index] -= step
            up = log_partition(extended.with_parameters(couplings=plus), max_spins)
            down = log_partition(extended.with_parameters(couplings=minus), max_spins)
        return (up - down) / (2.0 * step)

    biases = np.array(extended.biases)
    couplings = np.array(extended.couplings)
    means = np.array([central(biases=biases, index=i) for i in range(n)])
    all_pairs = np.array([central(couplings=couplings, index=k) for k in range(extended.graph.edge_count)])

    moments = np.eye(n)
    if extended.graph.edge_count:
        rows, cols = extended.graph.edge_array[:, 0], extended.graph.edge_array[:, 1]
        moments[rows, cols] = all_pairs
        moments[cols, rows] = all_pairs
    covariance = moments - np.outer(means, means)
    np.fill_diagonal(covariance, 1.0 - means ** 2)

    edges = model.graph.edge_array
    pair_moments = moments[edges[:, 0], edges[:, 1]] if model.graph.edge_count else np.zeros(0)
    return ExactMoments(
        log_partition=log_partition(model, max_spins),
        means=means,
        pair_moments=pair_moments,
        covariance=0.5 * (covariance + covariance.T),
    )
