"""Fixed-order reductions.

Every scalar reduction in the toolkit goes through here so that a result
depends only on the input values and their order, never on how many
threads numpy or joblib happen to use.
"""
import numpy as np

CHUNK_SIZE = 4096


def chunked_sum(values, chunk_size: int = CHUNK_SIZE) -> float:
    """Sums a flat array chunk by chunk, combining chunk sums sequentially.

    Args:
        values (array-like): values to sum; flattened in C order.
        chunk_size (int): number of elements per chunk.

    Returns:
        The sum as a Python float (0.0 for an empty input).
    """
    flat = np.ascontiguousarray(values, dtype=np.float64).ravel()
    total = 0.0
    for start in range(0, flat.size, chunk_size):
        total += float(np.sum(flat[start:start + chunk_size]))
    return total


def chunked_mean(values, chunk_size: int = CHUNK_SIZE) -> float:
    """Arithmetic mean built on `chunked_sum`. Empty input gives NaN."""
    flat = np.asarray(values, dtype=np.float64).ravel()
    if flat.size == 0:
        return float('nan')
    return chunked_sum(flat, chunk_size) / flat.size


def chunked_matmul_t(left: np.ndarray, right: np.ndarray, chunk_size: int = CHUNK_SIZE) -> np.ndarray:
    """Computes ``left.T @ right`` over row chunks with a sequential combine.

    Used for parameter gradients, where a BLAS call could reorder the
    row reduction depending on its thread count.
    """
    out = np.zeros((left.shape[1], right.shape[1]), dtype=np.float64)
    for start in range(0, left.shape[0], chunk_size):
        stop = start + chunk_size
        out += np.einsum('nf,nc->fc', left[start:stop], right[start:stop])
    return out


def chunked_column_sum(values: np.ndarray, chunk_size: int = CHUNK_SIZE) -> np.ndarray:
    """Column sums of a 2-D array with the same chunked order."""
    out = np.zeros(values.shape[1], dtype=np.float64)
    for start in range(0, values.shape[0], chunk_size):
        out += np.sum(values[start:start + chunk_size], axis=0)
    return out
