"""Per-pixel uncertainty scores for classification-based depth.

Besides the classification scores (entropy, one minus the top class
probability) this module implements the expectation of distance between
the table depths and the decoded depth, which accounts for the metric
structure of the depth table, and its variant for ordinal heads.
"""
import logging
from typing import Optional, Sequence

import numpy as np

from carkit.decode import ORDINAL_THRESHOLD
from carkit.exceptions import BadConfig, MaskMismatch, ShapeMismatch, TooFewMembers
from carkit.maps import DepthMap, ProbMap, ProbSemantics, UncertaintyMap, UncertaintyMethod
from carkit.tables import DepthTable, round_half_away
from carkit.validation import validate_containment


_LOGGER = logging.getLogger(__name__)


def _check_decoded(probs: ProbMap, decoded: DepthMap):
    if decoded.n != probs.n:
        raise ShapeMismatch(f'Decoded map has {decoded.n} pixels, probabilities have {probs.n}')


def shannon_entropy(probs: ProbMap) -> UncertaintyMap:
    """Entropy ``-sum_p y_p log y_p`` in nats, with ``0 log 0 = 0``."""
    probs.require(ProbSemantics.SOFTMAX)
    data = probs.data
    terms = np.where(data > 0, data * np.log(np.where(data > 0, data, 1.0)), 0.0)
    return UncertaintyMap(np.maximum(-np.sum(terms, axis=1), 0.0), UncertaintyMethod.SENTR)


def one_minus_mcp(probs: ProbMap) -> UncertaintyMap:
    """One minus the maximum class probability."""
    probs.require(ProbSemantics.SOFTMAX)
    return UncertaintyMap(1.0 - np.max(probs.data, axis=1), UncertaintyMethod.ONE_MINUS_MCP)


def _expected_distance(depths: np.ndarray, probs: ProbMap, decoded: DepthMap) -> np.ndarray:
    distance = (depths[np.newaxis, :] - decoded.values[:, np.newaxis]) ** 2
    return np.sum(probs.data * distance, axis=1)


def e_dist(table: DepthTable, probs: ProbMap, decoded: DepthMap) -> UncertaintyMap:
    """Expected squared distance between table depths and the decoded depth.

    ``sum_p y_p (exp(values[p]) - d)^2`` in square meters. The decoded map
    may come from any decoder applied to the same probabilities.
    """
    table.require_log()
    probs.require(ProbSemantics.SOFTMAX)
    _check_decoded(probs, decoded)
    values = _expected_distance(table.depths, probs, decoded)
    return UncertaintyMap(values, UncertaintyMethod.EDIST, decoded.mask)


def e_dist_adaptive(table: DepthTable, probs: ProbMap, decoded: DepthMap) -> UncertaintyMap:
    """Expected squared distance on an adaptive table (values already in meters)."""
    table.require_adaptive()
    probs.require(ProbSemantics.SOFTMAX)
    _check_decoded(probs, decoded)
    values = _expected_distance(table.values, probs, decoded)
    return UncertaintyMap(values, UncertaintyMethod.EDIST_ADAPTIVE, decoded.mask)


def e_dist_ordinal(table: DepthTable, probs: ProbMap, decoded: DepthMap, strict: bool = True) -> UncertaintyMap:
    """Expected distance for ordinal heads.

    The decoded depth is turned back into its ordinal count ``c`` and into
    prefix labels ``y'`` (``p < c`` when `strict`, ``p <= c`` otherwise).
    Only classes that pass the 0.5 threshold contribute:
    ``sum_p exp(values[p]) (y'_p - y_p)^2 [y_p >= 0.5]``.
    """
    table.require_log()
    probs.require(ProbSemantics.PER_CLASS_SIGMOID)
    _check_decoded(probs, decoded)

    values = np.zeros(probs.n, dtype=np.float64)
    rows = decoded.mask
    if np.any(rows):
        depth = decoded.values[rows]
        count = round_half_away(np.log(depth / table.a) / table.q - 0.5)
        classes = np.arange(table.k)[np.newaxis, :]
        relabel = (classes < count[:, np.newaxis]) if strict else (classes <= count[:, np.newaxis])
        predicted = probs.data[rows]
        passing = predicted >= ORDINAL_THRESHOLD
        terms = table.depths[np.newaxis, :] * (relabel - predicted) ** 2 * passing
        values[rows] = np.sum(terms, axis=1)
    return UncertaintyMap(values, UncertaintyMethod.EDIST_ORDINAL, decoded.mask)


def ensemble_variance(depth_maps: Sequence[DepthMap]) -> UncertaintyMap:
    """Population variance of M >= 2 depth predictions, per pixel.

    Raises:
        TooFewMembers if fewer than two maps are given; ShapeMismatch or
        MaskMismatch if the maps do not cover the same pixels.
    """
    depth_maps = list(depth_maps)
    if len(depth_maps) < 2:
        raise TooFewMembers(f'An ensemble needs at least 2 members, got {len(depth_maps)}')
    first = depth_maps[0]
    for member in depth_maps[1:]:
        if member.n != first.n:
            raise ShapeMismatch('Ensemble members differ in pixel count')
        if not np.array_equal(member.mask, first.mask):
            raise MaskMismatch('Ensemble members differ in validity mask')
    stack = np.stack([member.values for member in depth_maps])
    return UncertaintyMap(np.var(stack, axis=0), UncertaintyMethod.ENSEMBLE_VARIANCE, first.mask)


@validate_containment(BadConfig, method=tuple(UncertaintyMethod))
def uncertainty_map(method: UncertaintyMethod, table: Optional[DepthTable] = None, probs: Optional[ProbMap] = None,
                    decoded: Optional[DepthMap] = None, members: Sequence[DepthMap] = (),
                    strict: bool = True) -> UncertaintyMap:
    """Computes the named uncertainty score from whichever inputs it needs."""
    method = UncertaintyMethod(method)
    if method is UncertaintyMethod.ENSEMBLE_VARIANCE:
        return ensemble_variance(members)
    if probs is None:
        raise BadConfig(f'{method.value} needs probabilities')
    if method is UncertaintyMethod.SENTR:
        return shannon_entropy(probs)
    if method is UncertaintyMethod.ONE_MINUS_MCP:
        return one_minus_mcp(probs)
    if table is None or decoded is None:
        raise BadConfig(f'{method.value} needs a depth table and a decoded depth map')
    if method is UncertaintyMethod.EDIST:
        return e_dist(table, probs, decoded)
    if method is UncertaintyMethod.EDIST_ADAPTIVE:
        return e_dist_adaptive(table, probs, decoded)
    return e_dist_ordinal(table, probs, decoded, strict=strict)
