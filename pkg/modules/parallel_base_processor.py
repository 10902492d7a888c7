import concurrent.futures
import threading

from .errors import IsingError


class ParallelBaseProcessor:
    """Runs independent work cells on a thread pool with thread-safe progress output.

    Results come back in submission order whatever the scheduling, so a
    cell's outcome depends only on the cell itself.
    """

    def __init__(self, max_workers=1, display=None, logger=None):
        if max_workers < 1:
            raise ValueError(f"max_workers must be at least 1, got {max_workers}")
        self.max_workers = max_workers
        self.display = display
        self.logger = logger
        self._display_lock = threading.Lock()

    def execute(self, cells):
        """Process every cell; failures become records instead of aborting the run"""
        cells = list(cells)
        if not cells:
            return []
        results = [None] * len(cells)
        workers = min(len(cells), self.max_workers)

        if workers == 1:
            for index, cell in enumerate(cells):
                results[index] = self._process_cell_safe(cell)
                self._report_progress(index + 1, len(cells))
            return results

        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            future_to_index = {
                executor.submit(self._process_cell_safe, cell): index
                for index, cell in enumerate(cells)
            }
            done = 0
            for future in concurrent.futures.as_completed(future_to_index):
                results[future_to_index[future]] = future.result()
                done += 1
                self._report_progress(done, len(cells))
        return results

    def _process_cell_safe(self, cell):
        """Wrapper turning domain errors into failure records"""
        try:
            return self._process_cell(cell)
        except IsingError as e:
            self._safe_log('warning', f"Cell {cell!r} failed: {e.message}")
            return self._failure_record(cell, e)

    def _report_progress(self, done, total):
        if self.display is not None:
            with self._display_lock:
                self.display.display_progress(done, total)

    def _safe_log(self, level, message):
        if self.logger is not None:
            with self._display_lock:
                getattr(self.logger, level)(message)

    def _process_cell(self, cell):
        """Subclass-specific cell processing logic (override in subclasses)"""
        raise NotImplementedError("Subclasses must implement _process_cell method")

    def _failure_record(self, cell, error):
        """Subclass-specific failure record (override in subclasses)"""
        raise NotImplementedError("Subclasses must implement _failure_record method")
