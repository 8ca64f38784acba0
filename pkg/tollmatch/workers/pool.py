"""Run independent jobs sequentially or on a spawn-context process pool.

Results always come back in input order, so merged output depends only on
the jobs, never on the worker count.
"""

import logging
import multiprocessing as mp
from typing import Callable, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def run_indexed(fn: Callable[[T], R], jobs: Sequence[T], workers: int = 1) -> List[R]:
    """Apply fn to every job; fn must be a module-level function when workers > 1."""
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if workers == 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    logger.info(f"Running {len(jobs)} jobs on {workers} worker processes")
    with mp.get_context("spawn").Pool(processes=workers) as pool:
        return pool.map(fn, jobs)
