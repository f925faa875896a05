"""Depth accuracy metrics and sparsification-based uncertainty evaluation."""
import enum
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from carkit._reduction import chunked_mean
from carkit.exceptions import BadConfig, EmptyMask, NonFinite, ShapeMismatch
from carkit.maps import DepthMap, GroundTruthDepth, UncertaintyMap, check_same_pixels
from carkit.tables import round_half_away
from carkit.validation import validate_containment, validate_range


_LOGGER = logging.getLogger(__name__)

DELTA_BASE = 1.25
DEFAULT_STEP = 0.01
CSV_HEADER = ('rmse', 'abs_rel', 'sq_rel', 'rmse_log', 'log10', 'delta1', 'delta2', 'delta3', 'n_valid')


class MetricKind(str, enum.Enum):
    RMSE = 'rmse'
    ABS_REL = 'abs_rel'


@dataclass(frozen=True)
class DepthMetrics:
    rmse: float
    abs_rel: float
    sq_rel: float
    rmse_log: float
    log10: float
    delta1: float
    delta2: float
    delta3: float
    n_valid: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_csv_row(self, fmt: str = 'r') -> str:
        """One CSV row in `CSV_HEADER` order.

        Args:
            fmt (str): format spec for the float columns; ``'r'`` writes the
                shortest repr that round-trips.
        """
        cells = []
        for name in CSV_HEADER:
            value = getattr(self, name)
            if name == 'n_valid':
                cells.append(str(value))
            elif fmt == 'r':
                cells.append(repr(float(value)))
            else:
                cells.append(format(value, fmt))
        return ','.join(cells)


@dataclass(frozen=True, eq=False)
class SparsificationCurve:
    """Metric of the remaining pixels after removing a fraction of them.

    Attributes:
        fractions (np.ndarray): strictly increasing, starting at 0, below 1.
        metric_values (np.ndarray): metric at each fraction.
        metric_kind (MetricKind): RMSE or AbsRel.
    """
    fractions: np.ndarray
    metric_values: np.ndarray
    metric_kind: MetricKind

    def rows(self):
        """``(fraction, value)`` pairs, for CSV output."""
        return list(zip(self.fractions.tolist(), self.metric_values.tolist()))


def _valid_pair(pred: DepthMap, gt: GroundTruthDepth):
    check_same_pixels(pred, gt)
    if gt.n_valid == 0:
        raise EmptyMask('No valid pixels to evaluate')
    pred.require_positive()
    return pred.values[gt.mask], gt.values[gt.mask]


def depth_metrics(pred: DepthMap, gt: GroundTruthDepth) -> DepthMetrics:
    """Standard depth metrics over the valid pixels.

    Inlier ratios use ``max(pred/gt, gt/pred) < 1.25^k`` with a strict
    inequality.

    Raises:
        EmptyMask if no pixel is valid; MaskMismatch if the masks differ.
    """
    predicted, truth = _valid_pair(pred, gt)
    diff = predicted - truth
    ratio = np.maximum(predicted / truth, truth / predicted)
    log_diff = np.log(predicted) - np.log(truth)
    return DepthMetrics(
        rmse=math.sqrt(chunked_mean(diff ** 2)),
        abs_rel=chunked_mean(np.abs(diff) / truth),
        sq_rel=chunked_mean(diff ** 2 / truth),
        rmse_log=math.sqrt(chunked_mean(log_diff ** 2)),
        log10=chunked_mean(np.abs(np.log10(predicted) - np.log10(truth))),
        delta1=chunked_mean(ratio < DELTA_BASE),
        delta2=chunked_mean(ratio < DELTA_BASE ** 2),
        delta3=chunked_mean(ratio < DELTA_BASE ** 3),
        n_valid=int(truth.size),
    )


@validate_containment(BadConfig, metric_kind=tuple(MetricKind))
def oracle_ranking(pred: DepthMap, gt: GroundTruthDepth, metric_kind: MetricKind) -> np.ndarray:
    """Per-pixel error driving the oracle curve, over valid pixels in pixel order.

    Absolute error for RMSE, relative error for AbsRel.
    """
    predicted, truth = _valid_pair(pred, gt)
    error = np.abs(predicted - truth)
    if MetricKind(metric_kind) is MetricKind.ABS_REL:
        error = error / truth
    return error


def _grid_size(step: float) -> int:
    count = 0
    while count * step < 1.0 - 1e-12:
        count += 1
    return count


def removal_counts(n: int, step: float) -> np.ndarray:
    """Pixels removed at each fraction ``i * step``: ``round(i * step * n)``,
    half away from zero, capped at ``n - 1``.

    The product is taken on the integer grid index and snapped to 9
    decimals, so a count that is exactly half-way (0.29 * 50 = 14.5) is
    not pushed below the half by the float error of ``0.29``.
    """
    index = np.arange(_grid_size(step), dtype=np.float64)
    exact = np.round(index * n * step, 9)
    return np.minimum(round_half_away(exact).astype(np.int64), n - 1)


def _curve_metric(remaining: np.ndarray, kind: MetricKind) -> float:
    if kind is MetricKind.RMSE:
        return math.sqrt(chunked_mean(remaining ** 2))
    return chunked_mean(remaining)


@validate_containment(BadConfig, metric_kind=tuple(MetricKind))
@validate_range(BadConfig, step=(1e-12, 0.5))
def sparsification_curve(errors, ranking, metric_kind: MetricKind, step: float = DEFAULT_STEP) -> SparsificationCurve:
    """Metric of the pixels left after removing the most uncertain ones.

    At each fraction ``f`` in ``0, step, 2 step, ... < 1`` the
    ``round(f N)`` pixels with the largest ranking value are removed (ties
    broken by lower pixel index first) and the metric is computed on the
    rest. At least one pixel always remains.

    Args:
        errors (np.ndarray): per-pixel errors (absolute for RMSE, relative for AbsRel).
        ranking (np.ndarray): per-pixel uncertainty; larger is removed first.
        metric_kind (MetricKind): which metric the errors feed.
        step (float): fraction removed per sample, in ``(0, 0.5]``.

    Raises:
        EmptyMask if there are no pixels; ShapeMismatch if lengths differ.
    """
    errors = np.asarray(errors, dtype=np.float64).ravel()
    ranking = np.asarray(ranking, dtype=np.float64).ravel()
    if errors.size != ranking.size:
        raise ShapeMismatch(f'{errors.size} errors but {ranking.size} ranking values')
    if errors.size == 0:
        raise EmptyMask('Cannot sparsify an empty set of pixels')
    if not (np.all(np.isfinite(errors)) and np.all(np.isfinite(ranking))):
        raise NonFinite('Errors and ranking must be finite')

    kind = MetricKind(metric_kind)
    n = errors.size
    order = np.lexsort((np.arange(n), -ranking))
    ordered = errors[order]
    fractions = np.arange(_grid_size(step), dtype=np.float64) * step
    removed = removal_counts(n, step)
    values = np.array([_curve_metric(ordered[r:], kind) for r in removed])
    _LOGGER.debug('Sparsified %d pixels over %d fractions', n, fractions.size)
    return SparsificationCurve(fractions, values, kind)


def _ause_inputs(pred, gt, uncert, metric_kind):
    errors = oracle_ranking(pred, gt, metric_kind)
    if uncert.n != gt.n:
        raise ShapeMismatch(f'Uncertainty has {uncert.n} pixels, ground truth has {gt.n}')
    return errors, uncert.values[gt.mask]


def sparsification_error_curve(pred: DepthMap, gt: GroundTruthDepth, uncert: UncertaintyMap,
                               metric_kind: MetricKind, step: float = DEFAULT_STEP) -> SparsificationCurve:
    """Uncertainty-ranked curve minus the oracle curve."""
    errors, ranking = _ause_inputs(pred, gt, uncert, metric_kind)
    ranked = sparsification_curve(errors, ranking, metric_kind, step)
    oracle = sparsification_curve(errors, errors, metric_kind, step)
    return SparsificationCurve(ranked.fractions, ranked.metric_values - oracle.metric_values, ranked.metric_kind)


def ause(pred: DepthMap, gt: GroundTruthDepth, uncert: UncertaintyMap, metric_kind: MetricKind,
         step: float = DEFAULT_STEP) -> float:
    """Area under the sparsification error curve.

    The unnormalized mean of ``curve(uncert) - curve(oracle)`` over the
    sampled fractions, i.e. the step-weighted rectangle sum.

    Raises:
        EmptyMask if no pixel is valid.
    """
    curve = sparsification_error_curve(pred, gt, uncert, metric_kind, step)
    return chunked_mean(curve.metric_values)
