"""Post-processing: restoring continuous depth from classification maps."""
import enum
import logging

import numpy as np

from carkit.exceptions import BadConfig, ShapeMismatch
from carkit.maps import DepthMap, ProbMap, ProbSemantics
from carkit.tables import DepthTable
from carkit.validation import validate_containment


_LOGGER = logging.getLogger(__name__)

ORDINAL_THRESHOLD = 0.5


class DecodeMethod(str, enum.Enum):
    SOFT_WEIGHTED = 'soft'
    ARGMAX = 'argmax'
    ORDINAL = 'ordinal'
    ADAPTIVE = 'adaptive'


def _check_width(table: DepthTable, probs: ProbMap):
    if probs.k != table.k:
        raise ShapeMismatch(f'{probs.k} classes for a {table.k}-bin table')


def _center_depth(table: DepthTable, index) -> np.ndarray:
    return np.exp(np.log(table.a) + table.q * (np.asarray(index, dtype=np.float64) + 0.5))


def decode_soft_weighted(table: DepthTable, probs: ProbMap, mask=None) -> DepthMap:
    """Soft weighted sum in log space: ``exp(sum_p values[p] * y_p)``.

    Raises:
        SemanticsMismatch unless the table is log-space and probs are softmax.
    """
    table.require_log()
    probs.require(ProbSemantics.SOFTMAX)
    _check_width(table, probs)
    return DepthMap(np.exp(np.einsum('nk,k->n', probs.data, table.values)), mask)


def decode_argmax(table: DepthTable, probs: ProbMap, mask=None) -> DepthMap:
    """Center of the most probable bin; ties go to the lowest index."""
    table.require_log()
    _check_width(table, probs)
    return DepthMap(_center_depth(table, np.argmax(probs.data, axis=1)), mask)


def ordinal_count(probs: ProbMap, k: int, literal: bool = False) -> np.ndarray:
    """Number of classes at or above the 0.5 threshold, per pixel.

    Clamped to ``K-1`` unless `literal` is set.
    """
    count = np.count_nonzero(probs.data >= ORDINAL_THRESHOLD, axis=1)
    if literal:
        return count
    overflow = int(np.count_nonzero(count > k - 1))
    if overflow:
        _LOGGER.debug('Clamped %d ordinal count(s) to K-1=%d', overflow, k - 1)
    return np.minimum(count, k - 1)


def decode_ordinal(table: DepthTable, probs: ProbMap, mask=None, literal: bool = False) -> DepthMap:
    """Ordinal sum: ``exp(log a + q * (count + 0.5))``.

    Args:
        table (DepthTable): LOG_CENTERS table.
        probs (ProbMap): per-class sigmoid probabilities.
        mask (np.ndarray, optional): validity of the output.
        literal (bool): do not clamp the count, so an all-ones row decodes
            one bin past the last center.

    Raises:
        SemanticsMismatch unless probs are per-class sigmoids.
    """
    table.require_log()
    probs.require(ProbSemantics.PER_CLASS_SIGMOID)
    _check_width(table, probs)
    count = ordinal_count(probs, table.k, literal=literal)
    if literal and np.any(count > table.k - 1):
        _LOGGER.warning('Literal ordinal decode ran past the last table center')
    return DepthMap(_center_depth(table, count), mask)


def decode_adaptive(table: DepthTable, probs: ProbMap, mask=None) -> DepthMap:
    """Linear-space weighted sum ``sum_p values[p] * y_p`` over an adaptive table."""
    table.require_adaptive()
    probs.require(ProbSemantics.SOFTMAX)
    _check_width(table, probs)
    return DepthMap(np.einsum('nk,k->n', probs.data, table.values), mask)


@validate_containment(BadConfig, method=tuple(DecodeMethod))
def decode(method: DecodeMethod, table: DepthTable, probs: ProbMap, mask=None, literal: bool = False) -> DepthMap:
    """Decodes with the named post-processing rule."""
    method = DecodeMethod(method)
    if method is DecodeMethod.SOFT_WEIGHTED:
        return decode_soft_weighted(table, probs, mask)
    if method is DecodeMethod.ARGMAX:
        return decode_argmax(table, probs, mask)
    if method is DecodeMethod.ORDINAL:
        return decode_ordinal(table, probs, mask, literal=literal)
    return decode_adaptive(table, probs, mask)
