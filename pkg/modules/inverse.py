"""Closed-form inverse Ising formulas: IP, Bethe, SM and TRW.

Each formula maps data statistics (m, C), plus edge appearance
probabilities for TRW, to couplings on the edges of a graph. With no graph
given, inference runs on all pairs (the complete graph). Edges where a
formula leaves its domain are flagged and carry NaN instead of aborting.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DomainError, GraphError, SingularCovarianceError
from .graph_model import EdgeAppearance, IsingModel, build_complete, edge_values_to_matrix, uniform_edge_appearance
from .trw_forward import edge_messages


METHODS = ('ip', 'bethe', 'sm', 'trw')
CONDITION_WARNING = 1e12
WEAK_COUPLING_CUTOFF = 1e-12


@dataclass(frozen=True, eq=False)
class InverseWorkspace:
    """C^-1 shared by the matrix-based formulas, plus the TRW per-edge terms"""

    inv_covariance: np.ndarray
    scaled_inv: np.ndarray
    discriminant: np.ndarray
    condition_number: float


@dataclass(eq=False)
class InferredCouplings:
    graph: object
    couplings: np.ndarray
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def flagged_edges(self):
        return [int(k) for k in np.flatnonzero(~np.isfinite(self.couplings))]

    def matrix(self):
        """Symmetric |V|x|V| coupling matrix; flagged edges hold NaN"""
        return edge_values_to_matrix(self.graph, self.couplings)

    def to_model(self, biases=None, flagged_value=0.0):
        """IsingModel with flagged couplings replaced by flagged_value"""
        couplings = np.where(np.isfinite(self.couplings), self.couplings, flagged_value)
        if biases is None:
            biases = np.zeros(self.graph.vertex_count)
        return IsingModel(self.graph, couplings, biases)

    def to_dict(self):
        return {
            'method': self.method,
            'vertices': self.graph.vertex_count,
            'edges': [list(edge) for edge in self.graph.edges],
            'J': [float(v) if np.isfinite(v) else None for v in self.couplings],
            'flagged_edges': [list(self.graph.edges[k]) for k in self.flagged_edges],
            'diagnostics': self.diagnostics,
        }


def _resolve_graph(stats, graph):
    if graph is None:
        return build_complete(stats.vertex_count)
    if graph.vertex_count != stats.vertex_count:
        raise GraphError(f"Statistics describe {stats.vertex_count} spins but the graph has {graph.vertex_count}")
    return graph


def inverse_covariance(covariance, logger=None):
    """Symmetric C^-1 via Cholesky, falling back to LU; returns (inverse, condition number)"""
    covariance = np.asarray(covariance, dtype=float)
    condition = float(np.linalg.cond(covariance))
    if not np.isfinite(condition) or condition * np.finfo(float).eps >= 1.0:
        raise SingularCovarianceError(f"Covariance matrix is singular (condition number {condition:.3e})")
    identity = np.eye(covariance.shape[0])
    try:
        inverse = linalg.cho_solve(linalg.cho_factor(covariance), identity)
    except linalg.LinAlgError:
        if logger:
            logger.debug("Covariance is not positive definite; inverting with LU")
        inverse = linalg.lu_solve(linalg.lu_factor(covariance), identity)
    if not np.all(np.isfinite(inverse)):
        raise SingularCovarianceError("Covariance inverse is not finite")
    if logger and condition > CONDITION_WARNING:
        logger.warning(f"Covariance condition number {condition:.3e} exceeds {CONDITION_WARNING:.0e}")
    return 0.5 * (inverse + inverse.T), condition


def prepare_workspace(stats, rho, logger=None):
    inverse, condition = inverse_covariance(stats.covariance, logger)
    edges = rho.graph.edge_array
    means = stats.means
    scaled = inverse[edges[:, 0], edges[:, 1]] / rho.rho
    discriminant = 1.0 + 4.0 * (1.0 - means[edges[:, 0]] ** 2) * (1.0 - means[edges[:, 1]] ** 2) * scaled ** 2
    return InverseWorkspace(inverse, scaled, discriminant, condition)


def _base_diagnostics(graph, inverse=None, condition=None):
    diagnostics = {'warnings': []}
    if condition is not None:
        diagnostics['condition_number'] = condition
        if condition > CONDITION_WARNING:
            diagnostics['warnings'].append(f"covariance condition number {condition:.3e} exceeds {CONDITION_WARNING:.0e}")
    if inverse is not None and not graph.is_complete():
        # Mean-field coupling magnitude on the pairs the graph leaves out
        off_graph = np.abs(inverse).copy()
        np.fill_diagonal(off_graph, 0.0)
        if graph.edge_count:
            off_graph[graph.edge_array[:, 0], graph.edge_array[:, 1]] = 0.0
            off_graph[graph.edge_array[:, 1], graph.edge_array[:, 0]] = 0.0
        diagnostics['off_graph_max'] = float(off_graph.max())
    return diagnostics


def _finish(graph, couplings, method, diagnostics, logger):
    result = InferredCouplings(graph, couplings, method, diagnostics)
    flagged = result.flagged_edges
    diagnostics['flagged_edges'] = [list(graph.edges[k]) for k in flagged]
    if flagged and logger:
        logger.warning(f"{method.upper()}: {len(flagged)} edge(s) left the formula's domain")
    return result


def _ip_values(stats, graph):
    edges = graph.edge_array
    mi, mj = stats.means[edges[:, 0]], stats.means[edges[:, 1]]
    c = stats.covariance[edges[:, 0], edges[:, 1]]
    arguments = np.stack([
        (1.0 + mi) * (1.0 + mj) + c,
        (1.0 - mi) * (1.0 - mj) + c,
        (1.0 + mi) * (1.0 - mj) - c,
        (1.0 - mi) * (1.0 + mj) - c,
    ])
    valid = np.all(arguments > 0.0, axis=0)
    with np.errstate(divide='ignore', invalid='ignore'):
        logs = np.log(np.where(valid, arguments, 1.0))
    values = 0.25 * (logs[0] + logs[1] - logs[2] - logs[3])
    return np.where(valid, values, np.nan)


def invert_ip(stats, graph=None, logger=None):
    """Independent-pair couplings J = (1/4) ln[q(++) q(--) / (q(+-) q(-+))] from each pair's statistics"""
    graph = _resolve_graph(stats, graph)
    couplings = _ip_values(stats, graph)
    return _finish(graph, couplings, 'ip', _base_diagnostics(graph), logger)


def _trw_values(stats, rho, workspace):
    edges = rho.graph.edge_array
    x = workspace.scaled_inv
    mm = stats.means[edges[:, 0]] * stats.means[edges[:, 1]]
    root_d = np.sqrt(workspace.discriminant)
    inner = (root_d - 2.0 * mm * x) ** 2 - 4.0 * x ** 2

    with np.errstate(divide='ignore', invalid='ignore'):
        total = root_d + np.sqrt(np.where(inner >= 0.0, inner, 0.0))
        one_minus = 1.0 - mm ** 2
        # (sqrt(D) - sqrt(R)) / (2x) - m_i m_j, rewritten without the 1/x cancellation
        argument = x * (4.0 * mm * (mm * root_d + x * one_minus) / total + 2.0 * one_minus) / total
        values = -rho.rho * np.arctanh(np.where(np.abs(argument) < 1.0, argument, 0.0))

    valid = (inner >= 0.0) & (np.abs(argument) < 1.0) & np.isfinite(argument)
    values = np.where(valid, values, np.nan)
    return np.where(np.abs(x) < WEAK_COUPLING_CUTOFF, 0.0, values)


def invert_trw(stats, rho, logger=None):
    """TRW couplings J = -rho arctanh(A) from the stationarity conditions of F^TRW at (m, C)"""
    graph = _resolve_graph(stats, rho.graph)
    workspace = prepare_workspace(stats, rho, logger)
    couplings = _trw_values(stats, rho, workspace)
    diagnostics = _base_diagnostics(graph, workspace.inv_covariance, workspace.condition_number)
    return _finish(graph, couplings, 'trw', diagnostics, logger)


def invert_bethe(stats, graph=None, logger=None):
    """TRW with rho = 1 on every edge"""
    graph = _resolve_graph(stats, graph)
    result = invert_trw(stats, EdgeAppearance.ones(graph), logger)
    result.method = 'bethe'
    return result


def invert_sm(stats, graph=None, logger=None):
    """J = -(C^-1)_ij + J^IP_ij - C_ij / ((1 - m_i^2)(1 - m_j^2) - C_ij^2)"""
    graph = _resolve_graph(stats, graph)
    inverse, condition = inverse_covariance(stats.covariance, logger)
    edges = graph.edge_array
    mi, mj = stats.means[edges[:, 0]], stats.means[edges[:, 1]]
    c = stats.covariance[edges[:, 0], edges[:, 1]]
    denominator = (1.0 - mi ** 2) * (1.0 - mj ** 2) - c ** 2
    with np.errstate(divide='ignore', invalid='ignore'):
        couplings = -inverse[edges[:, 0], edges[:, 1]] + _ip_values(stats, graph) - c / denominator
    couplings = np.where(denominator != 0.0, couplings, np.nan)
    diagnostics = _base_diagnostics(graph, inverse, condition)
    return _finish(graph, couplings, 'sm', diagnostics, logger)


def invert_all(stats, rho=None, methods=METHODS, logger=None):
    """Run the requested methods on rho's graph (uniform rho on all pairs when omitted)"""
    if rho is None:
        rho = uniform_edge_appearance(build_complete(stats.vertex_count))
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise DomainError(f"Unknown inverse method(s): {', '.join(unknown)}")
    dispatch = {
        'ip': lambda: invert_ip(stats, rho.graph, logger),
        'bethe': lambda: invert_bethe(stats, rho.graph, logger),
        'sm': lambda: invert_sm(stats, rho.graph, logger),
        'trw': lambda: invert_trw(stats, rho, logger),
    }
    return {method: dispatch[method]() for method in methods}


def recover_biases(stats, couplings, rho):
    """h_i from the self-consistency equation evaluated at m = m_hat.

    Flagged couplings are treated as zero. Diagnostic only.
    """
    if np.any(np.abs(stats.means) >= 1.0):
        raise DomainError("Bias recovery needs every |m_i| < 1")
    model = couplings.to_model()
    pull = np.zeros(model.vertex_count)
    if model.graph.edge_count:
        messages = edge_messages(model, rho, stats.means)
        terms = rho.rho[:, None] * np.arctanh(messages.t_tilde[:, None] * messages.f_value)
        edges = model.graph.edge_array
        n = model.vertex_count
        pull = np.bincount(edges[:, 0], terms[:, 0], minlength=n) + np.bincount(edges[:, 1], terms[:, 1], minlength=n)
    return np.arctanh(stats.means) - pull
