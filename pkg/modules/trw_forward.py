"""Tree-reweighted (TRW) free energy and the upper bound Phi^TRW >= Phi.

Pseudomarginals are parameterized by vertex means m_i and edge covariances
c_ij, q_ij(s, s') = ((1 + m_i s)(1 + m_j s') + c_ij s s') / 4. The
stationary point is found from the self-consistency equation for m with
c eliminated edge by edge in closed form; a direct convex minimization of
the reduced free energy serves as fallback.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, root
from scipy.special import entr

from .errors import ConvergenceError, DomainError
from .graph_model import Graph


SOLVERS = ('auto', 'fixed_point', 'minimize')
MIN_DAMPING = 1e-6
FEASIBILITY_SLACK = 1e-12
# tanh(18) is still strictly below 1 in double precision
MAX_FIELD = 18.0

# Spin pairs (s, s') in the column order used for q_ij: ++, +-, -+, --
_PAIR_SIGNS = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])


def _pair_probabilities(mi, mj, c):
    """(|E|, 4) matrix of q_ij(s, s') in ++, +-, -+, -- order"""
    si, sj = _PAIR_SIGNS[:, 0], _PAIR_SIGNS[:, 1]
    mi, mj, c = (np.asarray(v, dtype=float)[..., None] for v in (mi, mj, c))
    return 0.25 * ((1.0 + mi * si) * (1.0 + mj * sj) + c * si * sj)


@dataclass(frozen=True, eq=False)
class Pseudomarginals:
    """Locally consistent marginals q_i, q_ij described by (m, c)"""

    graph: Graph
    means: np.ndarray
    edge_covariances: np.ndarray

    def __post_init__(self):
        means = np.array(self.means, dtype=float)
        covariances = np.array(self.edge_covariances, dtype=float)
        if means.shape != (self.graph.vertex_count,) or covariances.shape != (self.graph.edge_count,):
            raise DomainError("Pseudomarginal shapes do not match the graph")
        if np.any(np.abs(means) >= 1.0):
            raise DomainError("Pseudomarginal means must lie strictly inside (-1, 1)")
        object.__setattr__(self, 'means', means)
        object.__setattr__(self, 'edge_covariances', covariances)
        probabilities = self.pair_probabilities()
        if probabilities.size:
            bad = np.flatnonzero(np.any(probabilities < -FEASIBILITY_SLACK, axis=1))
            if bad.size:
                edge = int(bad[0])
                raise DomainError(
                    f"Pairwise pseudomarginal on edge {self.graph.edges[edge]} is negative",
                    edge=list(self.graph.edges[edge]),
                )

    def pair_probabilities(self):
        edges = self.graph.edge_array
        return _pair_probabilities(self.means[edges[:, 0]], self.means[edges[:, 1]], self.edge_covariances)

    def pair_moments(self):
        """<s_i s_j>_q = m_i m_j + c_ij per edge"""
        edges = self.graph.edge_array
        return self.means[edges[:, 0]] * self.means[edges[:, 1]] + self.edge_covariances


@dataclass(frozen=True)
class FreeEnergyBreakdown:
    energy: float
    entropy: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, 'total', self.energy - self.entropy)

    def to_dict(self):
        return {'energy': self.energy, 'entropy': self.entropy, 'total': self.total}


@dataclass(frozen=True, eq=False)
class EdgeMessage:
    """t_tilde per edge; f_value[:, 0] flows into edge end i, f_value[:, 1] into end j"""

    t_tilde: np.ndarray
    f_value: np.ndarray


@dataclass(frozen=True, eq=False)
class TRWSolution:
    pseudomarginals: Pseudomarginals
    free_energy: FreeEnergyBreakdown
    solver: str
    iterations: int

    @property
    def log_partition(self):
        return -self.free_energy.total


# ---------------------------------------------------------------------------
# Closed-form pieces
# ---------------------------------------------------------------------------

def f_aux(m1, m2, t):
    """Cavity magnetization f(m1, m2, t) in its rationalized form.

    f = 2 (m1 - m2 t) / (1 - t^2 + sqrt(disc)) with
    disc = (1 - t^2)^2 - 4 t (m1 - m2 t)(m2 - m1 t). Works elementwise.
    """
    m1, m2, t = (np.asarray(v, dtype=float) for v in (m1, m2, t))
    one_minus = 1.0 - t * t
    disc = one_minus ** 2 - 4.0 * t * (m1 - m2 * t) * (m2 - m1 * t)
    if np.any(disc < 0.0):
        raise DomainError("Negative discriminant in f: pseudomarginals are infeasible")
    value = 2.0 * (m1 - m2 * t) / (one_minus + np.sqrt(disc))
    return float(value) if value.ndim == 0 else value


def _edge_terms(model, rho):
    edges = model.graph.edge_array
    return edges[:, 0], edges[:, 1], np.asarray(rho.rho, dtype=float)


def edge_messages(model, rho, means):
    """t_tilde = tanh(J/rho) and the directed f values at the given means"""
    rows, cols, weights = _edge_terms(model, rho)
    t_tilde = np.tanh(model.couplings / weights)
    into_i = f_aux(means[cols], means[rows], t_tilde)
    into_j = f_aux(means[rows], means[cols], t_tilde)
    f_value = np.column_stack([np.atleast_1d(into_i), np.atleast_1d(into_j)]) if len(rows) else np.zeros((0, 2))
    if np.any(np.abs(t_tilde[:, None] * f_value) >= 1.0):
        raise DomainError("Edge message left the arctanh domain")
    return EdgeMessage(t_tilde, f_value)


def _self_consistency_field(model, rho, means):
    """h_i + sum_j rho_ij arctanh(t_ij f(m_j, m_i, t_ij))"""
    field_sum = np.array(model.biases, dtype=float)
    if model.graph.edge_count:
        rows, cols, weights = _edge_terms(model, rho)
        messages = edge_messages(model, rho, means)
        pull = weights[:, None] * np.arctanh(messages.t_tilde[:, None] * messages.f_value)
        n = model.vertex_count
        field_sum = field_sum + np.bincount(rows, pull[:, 0], minlength=n) + np.bincount(cols, pull[:, 1], minlength=n)
    return field_sum


def _self_consistency_rhs(model, rho, means):
    return np.tanh(_self_consistency_field(model, rho, means))


def self_consistency_residual(model, rho, means):
    """sup_i |m_i - RHS_i(m)|, the convergence measure of every solver"""
    means = np.asarray(means, dtype=float)
    return float(np.max(np.abs(means - _self_consistency_rhs(model, rho, means))))


def solve_self_consistency(model, rho, init=None, tol=1e-10, max_iter=10000, damping=0.5, logger=None):
    """Damped fixed-point iteration m <- (1 - lambda) m + lambda RHS(m).

    A step that increases the sup-norm residual is rejected and lambda is
    halved (down to MIN_DAMPING); accepted steps let lambda grow back
    toward its starting value. Returns (m, iterations).
    """
    if tol <= 0.0:
        raise DomainError(f"tol must be positive, got {tol}")
    if not 0.0 < damping <= 1.0:
        raise DomainError(f"damping must lie in (0, 1], got {damping}")
    means = np.zeros(model.vertex_count) if init is None else np.array(init, dtype=float)
    if np.any(np.abs(means) >= 1.0):
        raise DomainError("Initial means must lie strictly inside (-1, 1)")

    rhs = _self_consistency_rhs(model, rho, means)
    residual = float(np.max(np.abs(means - rhs)))
    step = damping
    for iteration in range(1, max_iter + 1):
        if residual <= tol:
            return means, iteration - 1
        candidate = (1.0 - step) * means + step * rhs
        try:
            candidate_rhs = _self_consistency_rhs(model, rho, candidate)
            candidate_residual = float(np.max(np.abs(candidate - candidate_rhs)))
        except DomainError:
            if step <= MIN_DAMPING:
                raise
            candidate_residual = np.inf

        if candidate_residual > residual and step > MIN_DAMPING:
            step = max(step / 2.0, MIN_DAMPING)
            if logger:
                logger.debug_iteration('TRW fixed point (rejected)', iteration, residual, step)
            continue

        means, rhs, residual = candidate, candidate_rhs, candidate_residual
        step = min(damping, step * 1.5)
        if logger:
            logger.debug_iteration('TRW fixed point', iteration, residual, step)

    if residual <= tol:
        return means, max_iter
    raise ConvergenceError(
        f"Self-consistency did not converge in {max_iter} iterations (residual {residual:.3e})",
        iterations=max_iter,
        residual=residual,
    )


def stationary_edge_covariance(m_i, m_j, J_ij, rho_ij):
    """c_ij solving J/rho = (1/4) ln[q(++) q(--) / (q(+-) q(-+))] for fixed means.

    The condition is the quadratic tau c^2 - 2 b c + tau P = 0 with
    tau = tanh(2J/rho), b = 1 - m_i m_j tau, P = (1 - m_i^2)(1 - m_j^2);
    the smaller root c = tau P / (b + sqrt(b^2 - tau^2 P)) is the one that
    tends to tanh(J/rho) at m = 0. Works elementwise.
    """
    m_i, m_j, J_ij, rho_ij = (np.asarray(v, dtype=float) for v in (m_i, m_j, J_ij, rho_ij))
    tau = np.tanh(2.0 * J_ij / rho_ij)
    b = 1.0 - m_i * m_j * tau
    product = (1.0 - m_i ** 2) * (1.0 - m_j ** 2)
    radicand = b * b - tau * tau * product
    if np.any(radicand < 0.0):
        raise DomainError("No feasible edge covariance: negative radicand")
    c = tau * product / (b + np.sqrt(radicand))
    q = _pair_probabilities(m_i, m_j, c)
    if np.any(q < -FEASIBILITY_SLACK):
        raise DomainError("Stationary edge covariance makes a pairwise pseudomarginal negative")
    return float(c) if c.ndim == 0 else c


# ---------------------------------------------------------------------------
# Free energy
# ---------------------------------------------------------------------------

def _vertex_entropy(means):
    return entr(0.5 * (1.0 + means)) + entr(0.5 * (1.0 - means))


def _vertex_weights(model, rho):
    """1 - sum_j rho_ij per vertex"""
    weights = np.ones(model.vertex_count)
    if model.graph.edge_count:
        rows, cols, values = _edge_terms(model, rho)
        n = model.vertex_count
        weights -= np.bincount(rows, values, minlength=n) + np.bincount(cols, values, minlength=n)
    return weights


def trw_free_energy(q, model, rho):
    """F^TRW = E(q) - H(q), with 0 ln 0 = 0 in every entropy term"""
    if q.graph != model.graph:
        raise DomainError("Pseudomarginals and model live on different graphs")
    energy = -float(model.couplings @ q.pair_moments()) - float(model.biases @ q.means)
    probabilities = np.clip(q.pair_probabilities(), 0.0, None)
    entropy = float(np.asarray(rho.rho) @ entr(probabilities).sum(axis=1)) if model.graph.edge_count else 0.0
    entropy += float(_vertex_weights(model, rho) @ _vertex_entropy(q.means))
    return FreeEnergyBreakdown(energy=energy, entropy=entropy)


def _pseudomarginals_at(model, rho, means):
    rows, cols, weights = _edge_terms(model, rho)
    covariances = stationary_edge_covariance(means[rows], means[cols], model.couplings, weights) \
        if model.graph.edge_count else np.zeros(0)
    return Pseudomarginals(model.graph, means, np.atleast_1d(covariances))


def _refine_means(model, rho, means):
    """Solve x = field(tanh x) from a nearby start; keeps `means` if that does not lower the residual"""
    def equations(x):
        return x - _self_consistency_field(model, rho, np.tanh(np.clip(x, -MAX_FIELD, MAX_FIELD)))

    try:
        result = root(equations, np.arctanh(means), method='hybr', options={'xtol': 1e-14})
        refined = np.tanh(np.clip(result.x, -MAX_FIELD, MAX_FIELD))
        if np.all(np.isfinite(refined)) and \
                self_consistency_residual(model, rho, refined) < self_consistency_residual(model, rho, means):
            return refined
    except DomainError:
        pass
    return means


def minimize_free_energy(model, rho, init=None, tol=1e-10, max_iter=10000, logger=None):
    """Minimize G(m) = min_c F^TRW(m, c) directly over x = arctanh(m).

    G is convex in m whenever rho comes from a spanning-tree distribution,
    so L-BFGS-B lands on the unique stationary point; a root-finding pass
    on the self-consistency equations then tightens m. Raises
    ConvergenceError when L-BFGS-B runs out of iterations or the final
    self-consistency residual exceeds tol.
    """
    rows, cols, weights = _edge_terms(model, rho)
    vertex_weights = _vertex_weights(model, rho)
    coupling_matrix = model.coupling_matrix()
    biases = np.asarray(model.biases, dtype=float)
    n = model.vertex_count

    def objective(x):
        means = np.tanh(x)
        q = _pseudomarginals_at(model, rho, means)
        value = trw_free_energy(q, model, rho).total
        grad = -biases - coupling_matrix @ means + vertex_weights * np.arctanh(means)
        if model.graph.edge_count:
            log_q = np.log(np.clip(q.pair_probabilities(), np.finfo(float).tiny, None))
            si, sj = _PAIR_SIGNS[:, 0], _PAIR_SIGNS[:, 1]
            d_i = 0.25 * (si * (1.0 + means[cols][:, None] * sj) * log_q).sum(axis=1)
            d_j = 0.25 * (sj * (1.0 + means[rows][:, None] * si) * log_q).sum(axis=1)
            grad += np.bincount(rows, weights * d_i, minlength=n) + np.bincount(cols, weights * d_j, minlength=n)
        return value, grad * (1.0 - means ** 2)

    start = np.zeros(n) if init is None else np.arctanh(np.clip(init, -np.tanh(MAX_FIELD), np.tanh(MAX_FIELD)))
    result = minimize(
        objective, start, jac=True, method='L-BFGS-B',
        bounds=[(-MAX_FIELD, MAX_FIELD)] * n,
        options={'maxiter': max_iter, 'ftol': tol * 1e-3, 'gtol': tol},
    )
    if logger:
        logger.debug(f"TRW minimize: {result.nit} iterations, {result.message}")
    iterations = int(result.nit)
    if not np.all(np.isfinite(result.x)):
        raise ConvergenceError("Free energy minimization produced non-finite means", iterations=iterations)
    if result.status == 1:
        raise ConvergenceError(f"Free energy minimization hit its iteration limit ({result.message})",
                               iterations=iterations)
    means = _refine_means(model, rho, np.tanh(result.x))
    residual = self_consistency_residual(model, rho, means)
    if logger:
        logger.debug(f"TRW minimize: self-consistency residual {residual:.3e} after refinement")
    if residual > tol:
        raise ConvergenceError(
            f"Free energy minimization stopped with residual {residual:.3e} above tol {tol:.1e} ({result.message})",
            iterations=iterations,
            residual=residual,
        )
    return means, iterations


# ---------------------------------------------------------------------------
# Bound and pseudo-moments
# ---------------------------------------------------------------------------

def solve_trw(model, rho, tol=1e-10, max_iter=10000, damping=0.5, solver='auto', init=None, logger=None):
    """Stationary pseudomarginals of F^TRW together with the free energy there"""
    if solver not in SOLVERS:
        raise DomainError(f"Unknown TRW solver {solver!r}; expected one of {', '.join(SOLVERS)}")
    used = solver
    if solver == 'minimize':
        means, iterations = minimize_free_energy(model, rho, init=init, tol=tol, max_iter=max_iter, logger=logger)
    else:
        try:
            means, iterations = solve_self_consistency(
                model, rho, init=init, tol=tol, max_iter=max_iter, damping=damping, logger=logger)
            used = 'fixed_point'
        except (ConvergenceError, DomainError) as e:
            if solver == 'fixed_point':
                raise
            if logger:
                logger.warning(f"TRW fixed point failed ({e.message}); falling back to direct minimization")
            means, iterations = minimize_free_energy(model, rho, init=init, tol=tol, logger=logger)
            used = 'minimize'

    q = _pseudomarginals_at(model, rho, means)
    return TRWSolution(q, trw_free_energy(q, model, rho), used, iterations)


def trw_log_partition(model, rho, tol=1e-10, **options):
    """Phi^TRW = -min_q F^TRW, an upper bound on the exact log-partition"""
    return solve_trw(model, rho, tol=tol, **options).log_partition


def trw_pseudo_moments(model, rho, tol=1e-10, **options):
    """(m*, per-edge m*_i m*_j + c*_ij): the derivatives of Phi^TRW in h and J"""
    q = solve_trw(model, rho, tol=tol, **options).pseudomarginals
    return q.means.copy(), q.pair_moments()


def linear_response_covariance(model, rho, step=1e-5, tol=1e-13, **options):
    """C_ij = dm*_i/dh_j by central differences, symmetrized.

    Returns (m*, C). Perturbed solves are warm-started from m*.
    """
    options.setdefault('solver', 'fixed_point')
    means = solve_trw(model, rho, tol=tol, **options).pseudomarginals.means
    n = model.vertex_count
    jacobian = np.zeros((n, n))
    for j in range(n):
        shifted = []
        for sign in (1.0, -1.0):
            biases = np.array(model.biases, dtype=float)
            biases[j] += sign * step
            perturbed = model.with_parameters(biases=biases)
            shifted.append(solve_trw(perturbed, rho, tol=tol, init=means, **options).pseudomarginals.means)
        jacobian[:, j] = (shifted[0] - shifted[1]) / (2.0 * step)
    return means.copy(), 0.5 * (jacobian + jacobian.T)
