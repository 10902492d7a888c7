"""Spike-train recordings to +/-1 spin series and data statistics.

Text format: a header ``# neurons N t_start t_end`` followed by one
``neuron_index spike_time`` pair per line (times in seconds). Blank lines
and further ``#`` comment lines are ignored.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DomainError, SpikeFormatError
from .graph_model import as_seed_sequence
from .sampler import SampleSet, gibbs_sample, statistics


DEFAULT_TAU = 0.001
# Absorbs round-off in (t - t_start) / tau so boundary spikes land in the later bin
BIN_EPSILON = 1e-9


@dataclass(frozen=True, eq=False)
class SpikeTrains:
    neuron_count: int
    times: Tuple[np.ndarray, ...]
    t_start: float
    t_end: float

    def __post_init__(self):
        if self.neuron_count < 1:
            raise DomainError("A recording needs at least one neuron")
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end) and self.t_end > self.t_start):
            raise DomainError(f"Invalid recording interval [{self.t_start}, {self.t_end}]")
        if len(self.times) != self.neuron_count:
            raise DomainError(f"Expected {self.neuron_count} spike lists, got {len(self.times)}")
        ordered = []
        for neuron, spikes in enumerate(self.times):
            spikes = np.sort(np.asarray(spikes, dtype=float))
            if spikes.size and (not np.all(np.isfinite(spikes))
                                or spikes[0] < self.t_start or spikes[-1] > self.t_end):
                raise DomainError(f"Spike times of neuron {neuron} leave the recording interval")
            spikes.setflags(write=False)
            ordered.append(spikes)
        object.__setattr__(self, 'times', tuple(ordered))

    @property
    def spike_count(self):
        return sum(spikes.size for spikes in self.times)


@dataclass(frozen=True, eq=False)
class SpinSeries:
    """T bins x N neurons of +1 (at least one spike) / -1 (silent)"""

    bin_width: float
    spins: np.ndarray

    def __post_init__(self):
        spins = np.array(self.spins, dtype=np.int8)
        if spins.ndim != 2 or not np.all(np.abs(spins) == 1):
            raise DomainError("Spin series must be a (T, N) matrix of +/-1")
        spins.setflags(write=False)
        object.__setattr__(self, 'spins', spins)

    @property
    def bin_count(self):
        return self.spins.shape[0]

    def to_samples(self):
        return SampleSet(self.spins)


def _open_text(source, mode):
    if hasattr(source, 'read') or hasattr(source, 'write'):
        return source, False
    return open(source, mode), True


def parse_spike_file(source):
    """Read SpikeTrains from a path or an open text stream"""
    stream, owned = _open_text(source, 'r')
    try:
        header = None
        times = None
        for line_number, raw in enumerate(stream, start=1):
            line = raw.strip()
            if not line:
                continue
            if header is None:
                parts = line.lstrip('#').split()
                if not line.startswith('#') or len(parts) != 4 or parts[0] != 'neurons':
                    raise SpikeFormatError("Expected header '# neurons N t_start t_end'", line_number=line_number)
                try:
                    header = (int(parts[1]), float(parts[2]), float(parts[3]))
                except ValueError:
                    raise SpikeFormatError("Malformed header values", line_number=line_number)
                if header[0] < 1 or not header[2] > header[1]:
                    raise SpikeFormatError("Header needs N >= 1 and t_end > t_start", line_number=line_number)
                times = [[] for _ in range(header[0])]
                continue
            if line.startswith('#'):
                continue

            parts = line.split()
            if len(parts) != 2:
                raise SpikeFormatError(f"Expected 'neuron_index spike_time', got {line!r}", line_number=line_number)
            try:
                neuron, spike_time = int(parts[0]), float(parts[1])
            except ValueError:
                raise SpikeFormatError(f"Unparseable spike line {line!r}", line_number=line_number)
            if not 0 <= neuron < header[0]:
                raise SpikeFormatError(f"Neuron index {neuron} out of range", line_number=line_number)
            if not (math.isfinite(spike_time) and header[1] <= spike_time <= header[2]):
                raise SpikeFormatError(f"Spike time {spike_time} outside [{header[1]}, {header[2]}]",
                                       line_number=line_number)
            times[neuron].append(spike_time)
    finally:
        if owned:
            stream.close()

    if header is None:
        raise SpikeFormatError("Spike file has no header", line_number=1)
    return SpikeTrains(header[0], tuple(np.array(t) for t in times), header[1], header[2])


def write_spike_file(trains, target):
    stream, owned = _open_text(target, 'w')
    try:
        stream.write(f"# neurons {trains.neuron_count} {trains.t_start!r} {trains.t_end!r}\n")
        for neuron, spikes in enumerate(trains.times):
            for spike_time in spikes:
                stream.write(f"{neuron} {float(spike_time)!r}\n")
    finally:
        if owned:
            stream.close()


def bin_spikes(trains, tau=DEFAULT_TAU):
    """Half-open bins [t_start + t tau, t_start + (t+1) tau); the trailing partial bin is dropped"""
    if not tau > 0.0:
        raise DomainError(f"Bin width must be positive, got {tau}")
    bin_count = int(math.floor((trains.t_end - trains.t_start) / tau + BIN_EPSILON))
    spins = -np.ones((bin_count, trains.neuron_count), dtype=np.int8)
    for neuron, spikes in enumerate(trains.times):
        if spikes.size == 0:
            continue
        bins = np.floor((spikes - trains.t_start) / tau + BIN_EPSILON).astype(np.int64)
        bins = bins[bins < bin_count]
        spins[bins, neuron] = 1
    return SpinSeries(tau, spins)


def spike_statistics(series):
    """Means and covariance of the binned series, each bin counted as one sample"""
    return statistics(series.to_samples())


def synthesize_spike_trains(model, n_bins, tau, rng_seed, burn_in=1000, thin=1):
    """Spike trains whose binned series is a Gibbs sample of `model`.

    Each +1 bin receives exactly one spike placed uniformly in the bin's
    interior, so bin_spikes(result, tau) recovers the sampled spins.
    """
    sample_seed, jitter_seed = as_seed_sequence(rng_seed).spawn(2)
    samples = gibbs_sample(model, n_bins * thin, burn_in, thin, sample_seed)
    spins = samples.configurations
    rng = np.random.default_rng(jitter_seed)
    offsets = rng.uniform(0.05, 0.95, size=spins.shape)
    times = []
    for neuron in range(model.vertex_count):
        active = np.flatnonzero(spins[:, neuron] == 1)
        times.append((active + offsets[active, neuron]) * tau)
    return SpikeTrains(model.vertex_count, tuple(times), 0.0, n_bins * tau)
