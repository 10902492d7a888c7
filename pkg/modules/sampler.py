"""Gibbs (heat-bath) MCMC for Ising models and the empirical statistics
(means m_i and population covariance C_ij) every inverse method consumes.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DomainError
from .graph_model import SpinConfiguration


@dataclass(frozen=True, eq=False)
class SampleSet:
    """D recorded spin configurations stored as a (D, |V|) int8 matrix"""

    configurations: np.ndarray

    def __post_init__(self):
        configurations = np.array(self.configurations, dtype=np.int8)
        if configurations.ndim != 2:
            raise DomainError("Samples must form a (D, |V|) matrix")
        if configurations.shape[0] < 1:
            raise DomainError("Sample set is empty")
        if not np.all(np.abs(configurations) == 1):
            raise DomainError("Samples must contain only +1/-1 entries")
        configurations.setflags(write=False)
        object.__setattr__(self, 'configurations', configurations)

    @property
    def count(self):
        return self.configurations.shape[0]

    @property
    def vertex_count(self):
        return self.configurations.shape[1]

    def __iter__(self):
        for row in self.configurations:
            yield SpinConfiguration(row)


@dataclass(frozen=True, eq=False)
class DataStatistics:
    """Empirical means and covariance; sample_count 0 marks exact (D = infinity) statistics"""

    means: np.ndarray
    covariance: np.ndarray
    sample_count: int = 0

    def __post_init__(self):
        means = np.array(self.means, dtype=float)
        covariance = np.array(self.covariance, dtype=float)
        n = means.shape[0] if means.ndim == 1 else -1
        if n < 1 or covariance.shape != (n, n):
            raise ConfigError(f"Statistics need |V| means and a |V|x|V| covariance, got {means.shape} and {covariance.shape}")
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(covariance))):
            raise ConfigError("Statistics must be finite")
        if np.any(np.abs(means) > 1.0 + 1e-12):
            raise DomainError("Means of +/-1 spins must lie in [-1, 1]")
        if not np.array_equal(covariance, covariance.T):
            if not np.allclose(covariance, covariance.T, rtol=0.0, atol=1e-10):
                raise ConfigError("Covariance matrix is not symmetric")
            covariance = 0.5 * (covariance + covariance.T)
        means.setflags(write=False)
        covariance.setflags(write=False)
        object.__setattr__(self, 'means', means)
        object.__setattr__(self, 'covariance', covariance)
        object.__setattr__(self, 'sample_count', int(self.sample_count))

    @property
    def vertex_count(self):
        return self.means.shape[0]

    @property
    def is_exact(self):
        return self.sample_count == 0

    def second_moments(self):
        """<s_i s_j>_D = C_ij + m_i m_j"""
        return self.covariance + np.outer(self.means, self.means)

    def to_dict(self):
        return {
            'means': self.means.tolist(),
            'covariance': self.covariance.tolist(),
            'D': self.sample_count,
        }

    @classmethod
    def from_dict(cls, payload):
        try:
            return cls(payload['means'], payload['covariance'], payload.get('D', 0))
        except (KeyError, TypeError) as e:
            raise ConfigError(f"Malformed statistics JSON: {e}")


def statistics(samples):
    """m_i = <s_i>_D and C_ij = <s_i s_j>_D - m_i m_j (divide by D, not D-1).

    Sums of +/-1 entries are accumulated as integers, so the result does not
    depend on sample order.
    """
    if not isinstance(samples, SampleSet):
        samples = SampleSet(samples)
    spins = samples.configurations.astype(np.int64)
    count = samples.count
    means = spins.sum(axis=0) / count
    second = (spins.T @ spins) / count
    covariance = second - np.outer(means, means)
    covariance = 0.5 * (covariance + covariance.T)
    np.fill_diagonal(covariance, 1.0 - means ** 2)
    return DataStatistics(means, covariance, count)


def merge_statistics(first, second):
    """Combine statistics of two disjoint sample sets.

    Merge rule: second moments and means are pooled with weights D_a/(D_a+D_b),
    then C is rebuilt. Exact in real arithmetic, hence associative; floating
    point results depend on merge order only at round-off level.
    """
    if first.is_exact or second.is_exact:
        raise DomainError("Exact statistics cannot be merged with sampled ones")
    if first.vertex_count != second.vertex_count:
        raise DomainError("Cannot merge statistics of different sizes")
    total = first.sample_count + second.sample_count
    wa, wb = first.sample_count / total, second.sample_count / total
    means = wa * first.means + wb * second.means
    moments = wa * first.second_moments() + wb * second.second_moments()
    covariance = moments - np.outer(means, means)
    covariance = 0.5 * (covariance + covariance.T)
    np.fill_diagonal(covariance, 1.0 - means ** 2)
    return DataStatistics(means, covariance, total)


class GibbsChain:
    """Persistent heat-bath chains advanced in lock-step (vectorized over chains).

    One sweep visits sites 0..|V|-1 in order and redraws s_i from
    p(s_i=+1 | rest) = sigmoid(2 (h_i + sum_j J_ij s_j)).
    """

    def __init__(self, model, chains=1, rng=None):
        if chains < 1:
            raise DomainError("At least one chain is required")
        self.rng = rng if rng is not None else np.random.default_rng()
        self.chains = chains
        self.set_model(model)
        n = model.vertex_count
        self.state = np.where(self.rng.random((chains, n)) < 0.5, -1.0, 1.0)

    def set_model(self, model):
        """Swap parameters while keeping the chain state (persistent chains)"""
        self.model = model
        self._couplings = model.coupling_matrix()
        self._biases = np.array(model.biases, dtype=float)

    def sweep(self):
        uniforms = self.rng.random(self.state.shape)
        for i in range(self.state.shape[1]):
            field = self._biases[i] + self.state @ self._couplings[:, i]
            self.state[:, i] = np.where(uniforms[:, i] < expit(2.0 * field), 1.0, -1.0)
        return self.state

    def run(self, sweeps):
        for _ in range(sweeps):
            self.sweep()
        return self.state

    def moments(self, sweeps):
        """Run `sweeps` sweeps, returning mean <s_i> and <s_i s_j> over sweeps and chains"""
        n = self.state.shape[1]
        first = np.zeros(n)
        second = np.zeros((n, n))
        for _ in range(sweeps):
            state = self.sweep()
            first += state.sum(axis=0)
            second += state.T @ state
        count = sweeps * self.chains
        second /= count
        return first / count, 0.5 * (second + second.T)


def gibbs_sample(model, sweeps, burn_in, thin, rng_seed, chains=1, logger=None):
    """Single-site Gibbs sampling; every `thin`-th post-burn-in sweep is recorded per chain"""
    if sweeps < 1 or thin < 1 or burn_in < 0:
        raise DomainError("Need sweeps >= 1, thin >= 1 and burn_in >= 0")
    if sweeps < thin:
        raise DomainError("sweeps must be at least thin so that one configuration is recorded")
    chain = GibbsChain(model, chains, np.random.default_rng(rng_seed))
    chain.run(burn_in)
    if logger:
        logger.debug(f"Gibbs: {burn_in} burn-in sweeps done on {chains} chain(s) of {model.vertex_count} spins")

    records = []
    for t in range(1, sweeps + 1):
        state = chain.sweep()
        if t % thin == 0:
            records.append(state.astype(np.int8))
    samples = np.concatenate(records, axis=0)
    if logger:
        logger.debug(f"Gibbs: recorded {samples.shape[0]} configurations")
    return SampleSet(samples)


def batch_means_error(observations, batches=20):
    """Standard error of the mean along axis 0 estimated from `batches` contiguous batch means"""
    observations = np.asarray(observations, dtype=float)
    usable = (observations.shape[0] // batches) * batches
    if usable == 0:
        raise DomainError(f"Need at least {batches} observations for batch means")
    grouped = observations[:usable].reshape((batches, -1) + observations.shape[1:])
    batch_means = grouped.mean(axis=1)
    return batch_means.std(axis=0, ddof=1) / np.sqrt(batches)


def write_samples_csv(samples, path):
    """Write a +/-1 sample matrix as CSV with header s0..s{N-1}"""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow([f"s{i}" for i in range(samples.vertex_count)])
        writer.writerows(samples.configurations.tolist())


def read_samples_csv(path):
    with open(path, 'r', newline='') as f:
        reader = csv.reader(f)
        try:
            next(reader)
            rows = [[int(value) for value in row] for row in reader if row]
        except (StopIteration, ValueError) as e:
            raise ConfigError(f"Malformed sample CSV {path}: {e}")
    if not rows:
        raise ConfigError(f"Sample CSV {path} has no configurations")
    return SampleSet(np.array(rows, dtype=np.int8).reshape(len(rows), -1))
