import json
import shutil
import sys


def get_terminal_width():
    """Get terminal width with fallback to 80 characters"""
    try:
        return shutil.get_terminal_size().columns
    except (OSError, ValueError):
        return 80


def get_separator_width(max_width=80):
    """Get width for separator lines (80 chars max)"""
    return min(get_terminal_width(), max_width)


class TerminalDisplay:
    """Human-facing progress and tables; everything goes to stderr so stdout carries only JSON"""

    def __init__(self, stream=None):
        self.stream = stream

    def _print(self, text=''):
        stream = self.stream or sys.stderr
        print(text, file=stream)
        stream.flush()

    def display_error_json(self, error):
        """One machine-readable JSON object describing the failure"""
        if hasattr(error, 'to_dict'):
            payload = error.to_dict()
        else:
            payload = {'error': type(error).__name__, 'message': str(error)}
        self._print(json.dumps(payload, sort_keys=True))

    def display_progress(self, done, total, label='cells'):
        self._print(f"⏳ {done}/{total} {label} done")

    def display_summary_table(self, rows):
        """Aggregated sweep results: method, omega, mean delta_J +/- standard error, failures"""
        width = get_separator_width()
        self._print('=' * width)
        self._print(f"{'method':<8} {'omega':>8} {'mean dJ':>12} {'stderr':>12} {'fail':>6}")
        self._print('-' * width)
        for row in rows:
            mean = '-' if row['mean'] is None else f"{row['mean']:.5f}"
            stderr = '-' if row['stderr'] is None else f"{row['stderr']:.5f}"
            self._print(f"{row['method']:<8} {row['omega']:>8g} {mean:>12} {stderr:>12} {row['failures']:>6}")
        self._print('=' * width)
