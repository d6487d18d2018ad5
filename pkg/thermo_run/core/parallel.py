"""Parallel execution utilities for the thermo_run framework.

Independent evaluations (spectrum grid points, blocks of the inner t-grid of the
carpet solver, starts of the multi-start oracle search) are distributed with
joblib. Results always come back in input order, so every reduction performed by
the callers is independent of the schedule.

Parallel Backends:
----------------
- threading: joblib thread pool (default). Numpy releases the GIL inside
  matrix products, and no pickling is needed.
- loky: joblib process pool, for long pure-Python workloads.

Usage Examples:
-------------
# Sequential when one worker is requested
results = run_parallel(solve_point, alphas, n_workers=1)

# Reserve 2 CPU cores for system processes
results = run_parallel(solve_point, alphas, reserved_cpus=2)
"""

import logging
import multiprocessing

from joblib import Parallel, delayed

from thermo_run.config.default_config import PARALLEL_CONFIG
from thermo_run.core.exceptions import ConfigError

logger = logging.getLogger('dev')

BACKENDS = ('threading', 'loky')


def get_worker_count(n_workers=None, reserved_cpus=None):
    """Resolve the number of workers.

    Args:
        n_workers (int or str, optional): Requested count; ``None``, ``0`` or
            ``'auto'`` mean all CPUs minus the reserved ones. Strings such as
            the THERMO_RUN_THREADS value are accepted.
        reserved_cpus (int, optional): CPUs to keep free. Defaults to PARALLEL_CONFIG.

    Returns:
        int: At least 1.

    Raises:
        ConfigError: If a string count is neither ``'auto'`` nor an integer.
    """
    if reserved_cpus is None:
        reserved_cpus = PARALLEL_CONFIG['reserved_cpus']
    if isinstance(n_workers, str):
        text = n_workers.strip().lower()
        if text in ('', 'auto'):
            n_workers = None
        else:
            try:
                n_workers = int(text)
            except ValueError:
                raise ConfigError(f"Worker count must be an integer or 'auto', got '{n_workers}'") from None
    if n_workers in (None, 0):
        n_workers = multiprocessing.cpu_count() - int(reserved_cpus)
    return max(1, int(n_workers))


def run_parallel(func, items, backend=None, n_workers=None, reserved_cpus=None):
    """Run function in parallel over items.

    Args:
        func (callable): Function to run
        items (list): Items to process
        backend (str, optional): 'threading' or 'loky'. Defaults to PARALLEL_CONFIG.
        n_workers (int, optional): Number of workers. Defaults to all CPUs.
        reserved_cpus (int, optional): Number of CPUs to reserve.

    Returns:
        list: Results in the order of ``items``.
    """
    items = list(items)
    backend = backend or PARALLEL_CONFIG['backend']
    if backend not in BACKENDS:
        raise ValueError(f"Unknown parallel backend '{backend}', expected one of {BACKENDS}")
    n_workers = min(get_worker_count(n_workers, reserved_cpus), max(1, len(items)))

    if n_workers == 1:
        logger.debug(f"Running {len(items)} tasks sequentially")
        return [func(item) for item in items]

    logger.debug(f"Running {len(items)} tasks on {n_workers} workers using {backend}")
    return Parallel(n_jobs=n_workers, backend=backend)(
        delayed(func)(item) for item in items
    )
