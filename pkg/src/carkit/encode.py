"""Encoders turning ground-truth depth into classification targets.

All encoders work row by row: pixel j's target depends only on depth j.
Masked-out pixels get all-zero rows so they drop out of every loss.
"""
import logging
from typing import Optional

import numpy as np

from carkit.exceptions import BadConfig
from carkit.maps import GroundTruthDepth, LabelKind, LabelMap
from carkit.tables import DepthTable, IndexMode, class_index
from carkit.validation import X, validate_containment, validate_expression


_LOGGER = logging.getLogger(__name__)

# Smoothing coefficients used by the strategies that introduced each scheme.
DEFAULT_GAMMA = {
    LabelKind.SMOOTH1: 15.0,
    LabelKind.SMOOTH2: 1.0,
    LabelKind.SMOOTH3: 65.0,
}


def _valid_indices(gt: GroundTruthDepth, table: DepthTable, index_mode) -> np.ndarray:
    table.require_log()
    return class_index(table, gt.values[gt.mask], mode=index_mode)


def _scatter(gt: GroundTruthDepth, k: int, rows: np.ndarray) -> np.ndarray:
    out = np.zeros((gt.n, k), dtype=np.float64)
    out[gt.mask] = rows
    return out


@validate_containment(BadConfig, index_mode=tuple(IndexMode))
def encode_onehot(gt: GroundTruthDepth, table: DepthTable, index_mode: IndexMode = IndexMode.ROUND) -> LabelMap:
    """One-hot targets: a single 1 at ``class_index(d)``.

    Args:
        gt (GroundTruthDepth): depths to encode.
        table (DepthTable): LOG_CENTERS table.
        index_mode (IndexMode): ROUND as written for the strategy, or FLOOR
            for interval membership.

    Raises:
        SemanticsMismatch for an adaptive table; NonPositiveDepth is
        propagated from `class_index`.
    """
    index = _valid_indices(gt, table, index_mode)
    rows = np.zeros((index.size, table.k), dtype=np.float64)
    rows[np.arange(index.size), index] = 1.0
    return LabelMap(_scatter(gt, table.k, rows), LabelKind.ONE_HOT)


@validate_containment(BadConfig, index_mode=tuple(IndexMode))
def encode_ordinal(gt: GroundTruthDepth, table: DepthTable, strict: bool = False,
                   index_mode: IndexMode = IndexMode.ROUND) -> LabelMap:
    """Ordinal targets: ones on a prefix of the classes.

    The default sets ``y_p = 1`` for ``p <= k``. With ``strict=True`` the
    prefix is ``p < k``, which pairs consistently with the ordinal-sum
    decoder.
    """
    index = _valid_indices(gt, table, index_mode)
    classes = np.arange(table.k)[np.newaxis, :]
    bound = index[:, np.newaxis]
    rows = (classes < bound) if strict else (classes <= bound)
    return LabelMap(_scatter(gt, table.k, rows.astype(np.float64)), LabelKind.ORDINAL)


@validate_expression(BadConfig, gamma=X > 0)
def smooth_targets(log_depth: np.ndarray, reference: np.ndarray, gamma: float,
                   normalize: bool = False) -> np.ndarray:
    """Gaussian kernel ``exp(-gamma * (log_depth - reference)^2)``.

    Args:
        log_depth (np.ndarray): N log-depths.
        reference (np.ndarray): K reference points in log space.
        gamma (float): sharpness, larger is sharper.
        normalize (bool): divide each row by its sum.

    Returns:
        An N x K array.
    """
    log_depth = np.asarray(log_depth, dtype=np.float64).ravel()
    distance = (log_depth[:, np.newaxis] - np.asarray(reference, dtype=np.float64)[np.newaxis, :]) ** 2
    if not normalize:
        return np.exp(-gamma * distance)
    # shift by the row minimum so a sharp kernel cannot underflow to 0/0
    rows = np.exp(-gamma * (distance - distance.min(axis=1, keepdims=True)))
    return rows / np.sum(rows, axis=1, keepdims=True)


def encode_smooth1(gt: GroundTruthDepth, table: DepthTable, gamma: float = DEFAULT_GAMMA[LabelKind.SMOOTH1]) -> LabelMap:
    """Unnormalized smooth targets around each table center."""
    table.require_log()
    rows = smooth_targets(np.log(gt.values[gt.mask]), table.values, gamma)
    return LabelMap(_scatter(gt, table.k, rows), LabelKind.SMOOTH1, gamma)


def encode_smooth2(gt: GroundTruthDepth, table: DepthTable, gamma: float = DEFAULT_GAMMA[LabelKind.SMOOTH2]) -> LabelMap:
    """Smooth targets normalized to a distribution per pixel."""
    table.require_log()
    rows = smooth_targets(np.log(gt.values[gt.mask]), table.values, gamma, normalize=True)
    return LabelMap(_scatter(gt, table.k, rows), LabelKind.SMOOTH2, gamma)


@validate_expression(BadConfig, gamma=X > 0)
@validate_containment(BadConfig, index_mode=tuple(IndexMode))
def encode_smooth3(gt: GroundTruthDepth, table: DepthTable, gamma: float = DEFAULT_GAMMA[LabelKind.SMOOTH3],
                   index_mode: IndexMode = IndexMode.ROUND) -> LabelMap:
    """Index-space smooth targets ``exp(-gamma * (k - p)^2)``.

    Equivalent to `encode_smooth1` with coefficient ``gamma / q^2`` on the
    lower bin edges whenever the depth sits on an edge.
    """
    index = _valid_indices(gt, table, index_mode)
    classes = np.arange(table.k, dtype=np.float64)[np.newaxis, :]
    rows = np.exp(-gamma * (index[:, np.newaxis] - classes) ** 2)
    return LabelMap(_scatter(gt, table.k, rows), LabelKind.SMOOTH3, gamma)


@validate_containment(BadConfig, scheme=tuple(LabelKind))
def encode_labels(gt: GroundTruthDepth, table: DepthTable, scheme: LabelKind, gamma: Optional[float] = None,
                  strict: bool = False, index_mode: IndexMode = IndexMode.ROUND) -> LabelMap:
    """Encodes with any scheme, using the scheme's default gamma when none is given."""
    scheme = LabelKind(scheme)
    if scheme is LabelKind.ONE_HOT:
        return encode_onehot(gt, table, index_mode=index_mode)
    if scheme is LabelKind.ORDINAL:
        return encode_ordinal(gt, table, strict=strict, index_mode=index_mode)

    gamma = DEFAULT_GAMMA[scheme] if gamma is None else gamma
    _LOGGER.debug('Encoding %d pixels as %s with gamma=%g', gt.n_valid, scheme.value, gamma)
    if scheme is LabelKind.SMOOTH1:
        return encode_smooth1(gt, table, gamma)
    if scheme is LabelKind.SMOOTH2:
        return encode_smooth2(gt, table, gamma)
    return encode_smooth3(gt, table, gamma, index_mode=index_mode)
