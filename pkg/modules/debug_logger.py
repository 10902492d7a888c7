import sys


LEVELS = {'debug': 10, 'info': 20, 'warning': 30, 'quiet': 100}


class DebugLogger:
    """Centralized logging utility; writes to stderr so stdout stays machine-readable"""

    def __init__(self, config_manager=None, level=None, stream=None):
        self.config_manager = config_manager
        if level is None:
            level = config_manager.get_log_level() if config_manager else 'info'
        self.level = LEVELS.get(level, LEVELS['info'])
        self.stream = stream

    def _emit(self, prefix, message):
        stream = self.stream or sys.stderr
        print(f"{prefix}: {message}", file=stream)
        stream.flush()

    def is_debug_enabled(self):
        return self.level <= LEVELS['debug']

    def debug(self, message):
        """Print debug message if debug mode is enabled"""
        if self.level <= LEVELS['debug']:
            self._emit('DEBUG', message)

    def info(self, message):
        if self.level <= LEVELS['info']:
            self._emit('INFO', message)

    def warning(self, message):
        if self.level <= LEVELS['warning']:
            self._emit('WARNING', message)

    def debug_iteration(self, label, iteration, residual, damping=None):
        """Debug a solver iteration (only every 100th, to keep output readable)"""
        if self.is_debug_enabled() and iteration % 100 == 0:
            if damping is not None:
                self.debug(f"{label}: iteration {iteration}, residual {residual:.3e}, damping {damping:.3g}")
            else:
                self.debug(f"{label}: iteration {iteration}, residual {residual:.3e}")
