"""Seed-sweep fan-out for Monte Carlo experiments."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Dict, Iterable, List, Optional

logger = logging.getLogger(__name__)

THREADS_ENV = "ROUGHMILD_THREADS"

Row = Dict[str, object]
ProgressCallback = Callable[[int, str], None]


def worker_count(requested: Optional[int] = None) -> int:
    """Thread count: ``requested`` or the CPU count, capped by ``ROUGHMILD_THREADS``."""
    count = requested or os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV, "").strip()
    if cap:
        try:
            count = min(count, max(1, int(cap)))
        except ValueError:
            logger.warning("ignoring %s=%r (not an integer)", THREADS_ENV, cap)
    return max(1, count)


class SeedSweepWorker:
    """Run ``task(seed)`` for every seed and gather the rows it returns.

    Each task returns a list of row dicts carrying a ``seed`` entry. Rows
    come back sorted by seed regardless of completion order.
    """

    def __init__(self, task: Callable[[int], List[Row]], seeds: Iterable[int],
                 max_workers: Optional[int] = None,
                 progress: Optional[ProgressCallback] = None):
        self._task = task
        self._seeds = list(seeds)
        self._workers = worker_count(max_workers)
        self._progress = progress

    def _emit(self, percent: int, message: str):
        if self._progress is not None:
            self._progress(percent, message)

    def run(self) -> List[Row]:
        total = len(self._seeds)
        if total == 0:
            return []
        by_seed: Dict[int, List[Row]] = {}
        self._emit(0, f"Running {total} seeds on {self._workers} worker(s)…")
        if self._workers == 1:
            for done, seed in enumerate(self._seeds, start=1):
                by_seed[seed] = self._task(seed)
                self._emit(int(100 * done / total), f"seed {seed}")
        else:
            with ThreadPoolExecutor(max_workers=self._workers) as pool:
                futures = {pool.submit(self._task, seed): seed for seed in self._seeds}
                for done, future in enumerate(as_completed(futures), start=1):
                    seed = futures[future]
                    by_seed[seed] = future.result()
                    self._emit(int(100 * done / total), f"seed {seed}")
        rows: List[Row] = []
        for seed in sorted(by_seed):
            rows.extend(by_seed[seed])
        logger.debug("seed sweep gathered %d rows from %d seeds", len(rows), total)
        return rows
