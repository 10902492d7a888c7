"""Graph topologies, Ising model parameters, coupling/bias generators and
edge appearance probabilities.

Edges are stored canonically (i < j, sorted, unique) so coupling vectors line
up with ``graph.edges`` everywhere and serialize deterministically.
"""

import itertools
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Tuple

import networkx as nx
import numpy as np

from .errors import ConfigError, DomainError, GraphError
from .manifest import read_json, write_json


REGIMES = ('attractive', 'mixed')
BIAS_HALF_WIDTH = 0.05
RHO_SUM_TOLERANCE = 1e-12


def _frozen_array(values, dtype=float):
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on vertices 0..vertex_count-1"""

    vertex_count: int
    edges: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        if self.vertex_count < 1:
            raise GraphError(f"vertex_count must be positive, got {self.vertex_count}")
        previous = None
        for i, j in self.edges:
            if not (0 <= i < j < self.vertex_count):
                raise GraphError(f"Edge ({i}, {j}) is not a canonical pair i<j below {self.vertex_count}")
            if previous is not None and (i, j) <= previous:
                raise GraphError("Edge list must be sorted and free of duplicates")
            previous = (i, j)

    @classmethod
    def from_edges(cls, vertex_count, edges):
        """Build a graph from any iterable of pairs, canonicalizing order"""
        canonical = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise GraphError(f"Self-loop on vertex {i}")
            canonical.add((min(i, j), max(i, j)))
        return cls(int(vertex_count), tuple(sorted(canonical)))

    @property
    def edge_count(self):
        return len(self.edges)

    @cached_property
    def edge_array(self):
        """Edges as an (|E|, 2) integer array"""
        if not self.edges:
            return np.zeros((0, 2), dtype=np.int64)
        array = np.array(self.edges, dtype=np.int64)
        array.setflags(write=False)
        return array

    @cached_property
    def edge_index(self):
        """Map (i, j) with i<j to the edge's position"""
        return {edge: k for k, edge in enumerate(self.edges)}

    def to_networkx(self):
        graph = nx.Graph()
        graph.add_nodes_from(range(self.vertex_count))
        graph.add_edges_from(self.edges)
        return graph

    def is_connected(self):
        return nx.is_connected(self.to_networkx())

    def is_tree(self):
        return self.edge_count == self.vertex_count - 1 and self.is_connected()

    def is_complete(self):
        return self.edge_count == self.vertex_count * (self.vertex_count - 1) // 2


@dataclass(frozen=True)
class SpinConfiguration:
    spins: np.ndarray

    def __post_init__(self):
        spins = _frozen_array(self.spins, dtype=np.int8)
        if spins.ndim != 1 or not np.all(np.abs(spins) == 1):
            raise DomainError("Spin configuration entries must be exactly +1 or -1")
        object.__setattr__(self, 'spins', spins)


@dataclass(frozen=True, eq=False)
class IsingModel:
    """Couplings J (aligned to graph.edges) and biases h: the full parameter theta"""

    graph: Graph
    couplings: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        couplings = _frozen_array(self.couplings)
        biases = _frozen_array(self.biases)
        if couplings.shape != (self.graph.edge_count,):
            raise GraphError(f"Expected {self.graph.edge_count} couplings, got shape {couplings.shape}")
        if biases.shape != (self.graph.vertex_count,):
            raise GraphError(f"Expected {self.graph.vertex_count} biases, got shape {biases.shape}")
        if not (np.all(np.isfinite(couplings)) and np.all(np.isfinite(biases))):
            raise DomainError("Model parameters must be finite")
        object.__setattr__(self, 'couplings', couplings)
        object.__setattr__(self, 'biases', biases)

    @classmethod
    def zero(cls, graph):
        return cls(graph, np.zeros(graph.edge_count), np.zeros(graph.vertex_count))

    @property
    def vertex_count(self):
        return self.graph.vertex_count

    def with_parameters(self, couplings=None, biases=None):
        return IsingModel(
            self.graph,
            self.couplings if couplings is None else couplings,
            self.biases if biases is None else biases,
        )

    def coupling_matrix(self):
        """Dense symmetric |V|x|V| coupling matrix with zero diagonal"""
        n = self.vertex_count
        matrix = np.zeros((n, n))
        if self.graph.edge_count:
            rows, cols = self.graph.edge_array[:, 0], self.graph.edge_array[:, 1]
            matrix[rows, cols] = self.couplings
            matrix[cols, rows] = self.couplings
        return matrix

    def energy(self, spins):
        """E(s) = -sum_<ij> J_ij s_i s_j - sum_i h_i s_i, for one or many configurations"""
        spins = np.asarray(spins, dtype=float)
        pair_terms = 0.0
        if self.graph.edge_count:
            rows, cols = self.graph.edge_array[:, 0], self.graph.edge_array[:, 1]
            pair_terms = (spins[..., rows] * spins[..., cols]) @ self.couplings
        return -(pair_terms + spins @ self.biases)

    def to_dict(self):
        return {
            'vertices': self.vertex_count,
            'edges': [list(edge) for edge in self.graph.edges],
            'J': self.couplings.tolist(),
            'h': self.biases.tolist(),
        }

    @classmethod
    def from_dict(cls, payload):
        """Parse the model JSON interchange format"""
        try:
            if len(payload['J']) != len(payload['edges']):
                raise ConfigError("Model JSON must have one J value per edge")
            graph = Graph.from_edges(payload['vertices'], payload['edges'])
            couplings = [0.0] * graph.edge_count
            for (i, j), value in zip(payload['edges'], payload['J']):
                couplings[graph.edge_index[(min(i, j), max(i, j))]] = value
            biases = payload.get('h') or [0.0] * graph.vertex_count
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, (GraphError, ConfigError)):
                raise
            raise ConfigError(f"Malformed model JSON: {e}")
        return cls(graph, couplings, biases)


@dataclass(frozen=True, eq=False)
class EdgeAppearance:
    """Edge appearance probabilities rho_ij aligned to graph.edges"""

    graph: Graph
    rho: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = _frozen_array(self.rho)
        if rho.shape != (self.graph.edge_count,):
            raise GraphError(f"Expected {self.graph.edge_count} rho values, got shape {rho.shape}")
        if not np.all((rho > 0.0) & (rho <= 1.0)):
            raise GraphError("Edge appearance probabilities must lie in (0, 1]")
        object.__setattr__(self, 'rho', rho)

    @classmethod
    def ones(cls, graph):
        """rho == 1 on every edge (the Bethe limit; a valid distribution only on trees)"""
        return cls(graph, np.ones(graph.edge_count))

    def sum_deviation(self):
        return abs(math.fsum(self.rho.tolist()) - (self.graph.vertex_count - 1))

    def is_valid_distribution(self, tol=RHO_SUM_TOLERANCE):
        return self.sum_deviation() <= tol

    def validate(self, tol=RHO_SUM_TOLERANCE):
        """Check the necessary condition sum rho = |V|-1 for a spanning-tree distribution"""
        deviation = self.sum_deviation()
        if deviation > tol:
            raise GraphError(
                f"Edge appearance probabilities sum to {math.fsum(self.rho.tolist())}, "
                f"expected |V|-1 = {self.graph.vertex_count - 1}"
            )
        return self

    def to_dict(self):
        return {'rho': self.rho.tolist()}

    @classmethod
    def from_dict(cls, graph, payload):
        try:
            values = payload['rho']
        except (KeyError, TypeError):
            raise ConfigError("rho JSON must contain a 'rho' list aligned to the graph edges")
        return cls(graph, values).validate()


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def _require_positive(**dims):
    for name, value in dims.items():
        if int(value) < 1:
            raise GraphError(f"{name} must be a positive integer, got {value}")


def build_grid2d(width, height):
    """Nearest-neighbour lattice with open boundaries; vertex id = y*width + x"""
    _require_positive(width=width, height=height)
    edges = []
    for y in range(height):
        for x in range(width):
            v = y * width + x
            if x + 1 < width:
                edges.append((v, v + 1))
            if y + 1 < height:
                edges.append((v, v + width))
    return Graph.from_edges(width * height, edges)


def build_grid3d(nx_, ny, nz):
    """Open-boundary cubic lattice; vertex id = (z*ny + y)*nx + x"""
    _require_positive(nx=nx_, ny=ny, nz=nz)
    edges = []
    for z in range(nz):
        for y in range(ny):
            for x in range(nx_):
                v = (z * ny + y) * nx_ + x
                if x + 1 < nx_:
                    edges.append((v, v + 1))
                if y + 1 < ny:
                    edges.append((v, v + nx_))
                if z + 1 < nz:
                    edges.append((v, v + nx_ * ny))
    return Graph.from_edges(nx_ * ny * nz, edges)


def build_complete(n):
    _require_positive(n=n)
    return Graph(n, tuple(itertools.combinations(range(n), 2)))


def build_chain(n):
    _require_positive(n=n)
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def build_random_tree(n, rng_seed):
    """Random recursive tree: vertex v attaches to a uniform earlier vertex"""
    _require_positive(n=n)
    rng = np.random.default_rng(rng_seed)
    edges = [(int(rng.integers(0, v)), v) for v in range(1, n)]
    return Graph.from_edges(n, edges)


_GRAPH_SPEC = re.compile(r'^(grid2d|grid3d|complete|chain|tree):(\d+(?:x\d+)*)$')


def parse_graph_spec(spec, rng_seed=0):
    """Parse 'grid2d:WxH', 'grid3d:XxYxZ', 'complete:N', 'chain:N' or 'tree:N'"""
    match = _GRAPH_SPEC.match(spec.strip().lower())
    if not match:
        raise ConfigError(f"Unrecognized graph spec {spec!r}")
    family, dims_text = match.groups()
    dims = [int(d) for d in dims_text.split('x')]
    expected = {'grid2d': 2, 'grid3d': 3}.get(family, 1)
    if len(dims) != expected:
        raise ConfigError(f"Graph family {family!r} takes {expected} dimension(s), got {dims_text!r}")
    if family == 'grid2d':
        return build_grid2d(*dims)
    if family == 'grid3d':
        return build_grid3d(*dims)
    if family == 'complete':
        return build_complete(dims[0])
    if family == 'chain':
        return build_chain(dims[0])
    return build_random_tree(dims[0], rng_seed)


# ---------------------------------------------------------------------------
# Parameter generators
# ---------------------------------------------------------------------------

def generate_couplings(graph, regime, omega, rng_seed):
    """Per-edge J ~ u[0, omega] (attractive) or u[-omega, omega] (mixed)"""
    if regime not in REGIMES:
        raise ConfigError(f"Unknown regime {regime!r}; expected one of {', '.join(REGIMES)}")
    if not omega >= 0.0:
        raise DomainError(f"omega must be non-negative, got {omega}")
    rng = np.random.default_rng(rng_seed)
    low = 0.0 if regime == 'attractive' else -omega
    return rng.uniform(low, omega, size=graph.edge_count)


def generate_biases(graph, rng_seed):
    """Per-vertex h ~ u[-0.05, 0.05]"""
    rng = np.random.default_rng(rng_seed)
    return rng.uniform(-BIAS_HALF_WIDTH, BIAS_HALF_WIDTH, size=graph.vertex_count)


def uniform_edge_appearance(graph):
    """rho_ij = (|V|-1)/|E| on every edge"""
    if graph.edge_count == 0:
        raise GraphError("Uniform edge appearance is undefined for a graph without edges")
    if not graph.is_connected():
        raise GraphError("Graph is disconnected: no spanning tree exists")
    if graph.is_tree():
        return EdgeAppearance.ones(graph)
    value = (graph.vertex_count - 1) / graph.edge_count
    return EdgeAppearance(graph, np.full(graph.edge_count, value)).validate(tol=1e-15 * graph.edge_count)


def edge_values_to_matrix(graph, values, fill=0.0):
    """Scatter per-edge values into a symmetric |V|x|V| matrix"""
    n = graph.vertex_count
    matrix = np.full((n, n), fill, dtype=float)
    np.fill_diagonal(matrix, 0.0)
    if graph.edge_count:
        rows, cols = graph.edge_array[:, 0], graph.edge_array[:, 1]
        matrix[rows, cols] = values
        matrix[cols, rows] = values
    return matrix


def as_seed_sequence(rng_seed):
    if isinstance(rng_seed, np.random.SeedSequence):
        return rng_seed
    return np.random.SeedSequence(rng_seed)


def random_model(graph, regime, omega, rng_seed, bias_scale=BIAS_HALF_WIDTH):
    """Convenience: couplings and biases from one seed (children via SeedSequence)"""
    coupling_seed, bias_seed = as_seed_sequence(rng_seed).spawn(2)
    couplings = generate_couplings(graph, regime, omega, coupling_seed)
    biases = generate_biases(graph, bias_seed) * (bias_scale / BIAS_HALF_WIDTH)
    return IsingModel(graph, couplings, biases)


# ---------------------------------------------------------------------------
# JSON files
# ---------------------------------------------------------------------------

def load_model(path):
    return IsingModel.from_dict(read_json(path))


def save_model(model, path):
    write_json(path, model.to_dict())


def load_edge_appearance(graph, path):
    """rho JSON ({"rho": [...]} aligned to graph.edges), validated as a spanning-tree marginal"""
    return EdgeAppearance.from_dict(graph, read_json(path))
