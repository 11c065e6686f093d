"""
Monte-Carlo plumbing shared by the estimators.

Paths are processed in blocks of contiguous path indices. Blocks may be
evaluated concurrently, but results are always merged in block order, so
every reduction sees the same summation order whatever the thread count.

"""

from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
import logging

import numpy as np

from .config import get_int, worker_count


logger = logging.getLogger(__name__)


Estimate = namedtuple('Estimate', ['estimate', 'stderr'])


def estimate(samples):
    """
    Sample mean and its standard error.

    >>> estimate([1.0, 1.0, 1.0])
    Estimate(estimate=1.0, stderr=0.0)

    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError('no samples')
    mean = float(np.mean(samples))
    if samples.size == 1:
        return Estimate(mean, 0.0)
    return Estimate(mean, float(np.std(samples, ddof=1) / np.sqrt(samples.size)))


def pooled_stderr(first, second):
    """Standard error of the difference of two estimates."""
    return float(np.hypot(first.stderr, second.stderr))


def path_blocks(n_paths, block_size=None):
    """Split ``range(n_paths)`` into contiguous (start, stop) blocks."""
    if n_paths <= 0:
        raise ValueError('number of paths must be positive')
    block_size = block_size or get_int('block-size')
    return [(start, min(start + block_size, n_paths))
            for start in range(0, n_paths, block_size)]


def map_blocks(func, n_paths, block_size=None):
    """
    Evaluate ``func(start, stop)`` on every path block.

    The results are returned as a list in block order.

    """
    blocks = path_blocks(n_paths, block_size)
    workers = min(worker_count(), len(blocks))
    logger.debug('%d paths in %d blocks on %d workers', n_paths, len(blocks), workers)
    if workers <= 1:
        return [func(start, stop) for start, stop in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda block: func(*block), blocks))


def concat_blocks(func, n_paths, block_size=None):
    """Evaluate per-path samples block by block and concatenate them."""
    return np.concatenate(map_blocks(func, n_paths, block_size))


def first_true(mask):
    """
    Index of the first true entry in each row of a boolean matrix, or the
    row length where a row has none.

    >>> first_true(np.array([[False, True, True], [False, False, False]]))
    array([1, 3])

    """
    mask = np.atleast_2d(mask)
    hit = mask.any(axis=1)
    return np.where(hit, np.argmax(mask, axis=1), mask.shape[1])
