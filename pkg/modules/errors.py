"""Exception hierarchy shared by every module and the CLI"""


class IsingError(Exception):
    """Base class for all domain failures reported by ising-utils"""

    kind = 'ising_error'

    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self):
        """Machine-readable form written to stderr by the CLI"""
        payload = {'error': self.kind, 'message': self.message}
        for key, value in self.details.items():
            if value is not None:
                payload[key] = value
        return payload


class DomainError(IsingError, ValueError):
    """A value left the domain of a formula (log, arctanh, pseudomarginal)"""

    kind = 'domain_error'

    def __init__(self, message, edge=None, **details):
        super().__init__(message, edge=edge, **details)
        self.edge = edge


class ConvergenceError(IsingError, RuntimeError):
    kind = 'convergence_error'

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message, iterations=iterations, residual=residual)
        self.iterations = iterations
        self.residual = residual


class SizeError(IsingError, ValueError):
    """Exact enumeration requested above the spin cap"""

    kind = 'size_error'


class SingularCovarianceError(IsingError, ArithmeticError):
    kind = 'singular_covariance'


class DivergenceError(IsingError, RuntimeError):
    """Gradient ascent produced a non-finite parameter"""

    kind = 'divergence_error'

    def __init__(self, message, iteration=None):
        super().__init__(message, iteration=iteration)
        self.iteration = iteration


class MetricError(IsingError, ValueError):
    kind = 'metric_error'


class GraphError(IsingError, ValueError):
    """Invalid topology or edge appearance probabilities"""

    kind = 'graph_error'


class SpikeFormatError(IsingError, ValueError):
    kind = 'spike_format_error'

    def __init__(self, message, line_number=None):
        super().__init__(message, line_number=line_number)
        self.line_number = line_number


class ConfigError(IsingError, ValueError):
    """Unreadable or inconsistent input file (sweep config, statistics, model)"""

    kind = 'config_error'
