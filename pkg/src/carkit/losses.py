"""Classification losses with analytic gradients.

Every loss returns a `LossResult`: the mean loss over valid pixels and the
gradient of that mean with respect to the raw network outputs (logits,
predicted depth for the scale-invariant loss, or probabilities for
`smooth_l1_from_probs`). Rows of masked-out pixels have zero gradient.
"""
import enum
import logging
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from carkit._reduction import chunked_sum
from carkit.exceptions import (
    BadConfig,
    NonFinite,
    NonPositiveDepth,
    OddChannels,
    ShapeMismatch,
    TargetOutOfRange,
)
from carkit.maps import DepthMap, GroundTruthDepth, LabelMap, ProbMap, ProbSemantics, as_mask
from carkit.tables import DepthTable
from carkit.validation import X, validate_containment, validate_expression


_LOGGER = logging.getLogger(__name__)

PROB_EPS = 1e-12
_LOG_PROB_FLOOR = np.log(PROB_EPS)

# Scale-invariant defaults follow common adaptive-bins training setups.
DEFAULT_SI_OMEGA = 10.0
DEFAULT_SI_LAMBDA = 0.85


class LossKind(str, enum.Enum):
    CE = 'ce'
    WCE = 'wce'
    MBCE = 'mbce'
    ORDINAL = 'ordinal'
    SMOOTH_L1 = 'smoothl1'
    SI = 'si'


@dataclass(frozen=True, eq=False)
class LossResult:
    """Mean loss over valid pixels and its gradient.

    Attributes:
        value (float): nonnegative mean loss.
        grad (np.ndarray): derivative of `value` with respect to the input
            the loss was evaluated on; zero on masked-out rows.
    """
    value: float
    grad: np.ndarray


def _check_logits(logits) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ShapeMismatch(f'Logits must be N x C, got shape {logits.shape}')
    if not np.all(np.isfinite(logits)):
        raise NonFinite('Logits contain NaN or infinity')
    return logits


def _target_array(target: Union[LabelMap, np.ndarray], shape) -> np.ndarray:
    data = target.data if isinstance(target, LabelMap) else np.asarray(target, dtype=np.float64)
    if data.shape != tuple(shape):
        raise ShapeMismatch(f'Target shape {data.shape} does not match {tuple(shape)}')
    return data


def _reduce(per_pixel: np.ndarray, mask: np.ndarray, n_valid: int) -> float:
    if n_valid == 0:
        return 0.0
    return chunked_sum(per_pixel[mask]) / n_valid


def _masked_grad(grad: np.ndarray, mask: np.ndarray, n_valid: int) -> np.ndarray:
    grad = np.where(mask.reshape((-1,) + (1,) * (grad.ndim - 1)), grad, 0.0)
    return grad / max(n_valid, 1)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax with max subtraction."""
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))


def softmax_array(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction, as a plain array."""
    shifted = np.exp(logits - np.max(logits, axis=1, keepdims=True))
    return shifted / np.sum(shifted, axis=1, keepdims=True)


def softmax(logits) -> ProbMap:
    """Softmax probabilities of an N x K logit map.

    Raises:
        NonFinite if any logit is NaN or infinite.
    """
    return ProbMap(softmax_array(_check_logits(logits)), ProbSemantics.SOFTMAX)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    z = np.exp(x[~positive])
    out[~positive] = z / (1.0 + z)
    return out


def _bce_with_logits(logits: np.ndarray, target: np.ndarray) -> np.ndarray:
    # -[y log s(l) + (1 - y) log(1 - s(l))] without forming s(l)
    return np.maximum(logits, 0.0) - target * logits + np.log1p(np.exp(-np.abs(logits)))


def _cross_entropy(logits, target, mask) -> LossResult:
    logits = _check_logits(logits)
    target = _target_array(target, logits.shape)
    mask = as_mask(mask, logits.shape[0])
    n_valid = int(np.count_nonzero(mask))

    log_probs = np.maximum(log_softmax(logits), _LOG_PROB_FLOOR)
    per_pixel = -np.sum(target * log_probs, axis=1)
    probs = softmax_array(logits)
    grad = np.sum(target, axis=1, keepdims=True) * probs - target
    return LossResult(_reduce(per_pixel, mask, n_valid), _masked_grad(grad, mask, n_valid))


def ce_loss(logits, target: Union[LabelMap, np.ndarray], mask=None) -> LossResult:
    """Cross entropy against one-hot targets.

    Args:
        logits (np.ndarray): N x K logits.
        target (LabelMap or np.ndarray): N x K one-hot targets.
        mask (np.ndarray, optional): valid pixels; all pixels when omitted.

    Raises:
        ShapeMismatch if the target shape differs from the logits.
    """
    return _cross_entropy(logits, target, mask)


def weighted_ce_loss(logits, target: Union[LabelMap, np.ndarray], mask=None) -> LossResult:
    """Cross entropy against soft targets ``-sum_p y_p log softmax_p``.

    The gradient per pixel is ``(sum_p y_p) * softmax - y``, which reduces
    to `ce_loss` exactly when the target is one-hot.
    """
    target_data = _target_array(target, np.shape(logits))
    if np.any(target_data < 0):
        raise TargetOutOfRange('Weighted cross-entropy targets must be nonnegative')
    return _cross_entropy(logits, target_data, mask)


def multi_bce_loss(logits, target: Union[LabelMap, np.ndarray], mask=None) -> LossResult:
    """Sum over classes of per-class binary cross entropy on sigmoid outputs.

    Raises:
        TargetOutOfRange if a target entry lies outside [0, 1].
    """
    logits = _check_logits(logits)
    target = _target_array(target, logits.shape)
    if np.any((target < 0) | (target > 1)):
        raise TargetOutOfRange('Binary cross-entropy targets must lie in [0, 1]')
    mask = as_mask(mask, logits.shape[0])
    n_valid = int(np.count_nonzero(mask))

    per_pixel = np.sum(_bce_with_logits(logits, target), axis=1)
    grad = _sigmoid(logits) - target
    return LossResult(_reduce(per_pixel, mask, n_valid), _masked_grad(grad, mask, n_valid))


def _paired_difference(logits: np.ndarray) -> np.ndarray:
    if logits.shape[1] % 2:
        raise OddChannels(f'Ordinal head needs an even channel count, got {logits.shape[1]}')
    return logits[:, 1::2] - logits[:, 0::2]


def ordinal_probs(logits) -> ProbMap:
    """Per-class probabilities of the ordinal head.

    Class p uses the softmax over the logit pair ``(2p, 2p+1)``, which is
    ``sigmoid(l[2p+1] - l[2p])``.
    """
    return ProbMap(_sigmoid(_paired_difference(_check_logits(logits))), ProbSemantics.PER_CLASS_SIGMOID)


def ordinal_loss(logits, target: Union[LabelMap, np.ndarray], mask=None) -> LossResult:
    """Ordinal regression loss over 2K logits.

    Raises:
        OddChannels if the channel count is odd; ShapeMismatch if it is not
        twice the target width.
    """
    logits = _check_logits(logits)
    difference = _paired_difference(logits)
    target = _target_array(target, difference.shape)
    mask = as_mask(mask, logits.shape[0])
    n_valid = int(np.count_nonzero(mask))

    per_pixel = np.sum(_bce_with_logits(difference, target), axis=1)
    pair_grad = _sigmoid(difference) - target
    grad = np.empty_like(logits)
    grad[:, 1::2] = pair_grad
    grad[:, 0::2] = -pair_grad
    return LossResult(_reduce(per_pixel, mask, n_valid), _masked_grad(grad, mask, n_valid))


def _smooth_l1_terms(probs: np.ndarray, target_index, literal: bool):
    target_index = np.asarray(target_index).ravel()
    if target_index.size != probs.shape[0]:
        raise ShapeMismatch(f'{target_index.size} target indices for {probs.shape[0]} pixels')
    positions = np.arange(1, probs.shape[1] + 1, dtype=np.float64)
    expected = probs @ positions
    target = target_index.astype(np.float64) + (0.0 if literal else 1.0)
    residual = expected - target
    small = np.abs(residual) < 1
    loss = np.where(small, 0.5 * residual ** 2, np.abs(residual) - 0.5)
    slope = np.where(small, residual, np.sign(residual))
    return positions, expected, loss, slope


def smooth_l1_from_probs(probs: Union[ProbMap, np.ndarray], target_index, mask=None,
                         literal: bool = False) -> LossResult:
    """Smooth-L1 on explicit probabilities, differentiated with respect to them.

    The expected index ``sum_p y_p (p + 1)`` is compared with ``k + 1`` by
    default, or with ``k`` as literally written when ``literal=True``.
    `smooth_l1_loss` is the same loss taken through a softmax of logits.
    """
    data = probs.data if isinstance(probs, ProbMap) else np.asarray(probs, dtype=np.float64)
    mask = as_mask(mask, data.shape[0])
    n_valid = int(np.count_nonzero(mask))
    positions, _, loss, slope = _smooth_l1_terms(data, target_index, literal)
    grad = slope[:, np.newaxis] * positions[np.newaxis, :]
    return LossResult(_reduce(loss, mask, n_valid), _masked_grad(grad, mask, n_valid))


def smooth_l1_loss(logits, target_index, mask=None, literal: bool = False) -> LossResult:
    """Smooth-L1 on the expected class index, differentiated through softmax.

    Args:
        logits (np.ndarray): N x K logits.
        target_index (np.ndarray): N class indices from `class_index`.
        mask (np.ndarray, optional): valid pixels.
        literal (bool): compare against ``k`` instead of ``k + 1``.

    Raises:
        TargetOutOfRange if a valid target index is outside [0, K-1].
    """
    logits = _check_logits(logits)
    mask = as_mask(mask, logits.shape[0])
    n_valid = int(np.count_nonzero(mask))
    index = np.asarray(target_index).ravel()
    if index.size == mask.size and np.any((index[mask] < 0) | (index[mask] >= logits.shape[1])):
        raise TargetOutOfRange('Target class index out of range')

    probs = softmax_array(logits)
    positions, expected, loss, slope = _smooth_l1_terms(probs, index, literal)
    grad = slope[:, np.newaxis] * probs * (positions[np.newaxis, :] - expected[:, np.newaxis])
    return LossResult(_reduce(loss, mask, n_valid), _masked_grad(grad, mask, n_valid))


@validate_expression(BadConfig, omega=X >= 0)
def scale_invariant_loss(pred: DepthMap, gt: GroundTruthDepth, omega: float = DEFAULT_SI_OMEGA,
                         lam: float = DEFAULT_SI_LAMBDA) -> LossResult:
    """Scale-invariant log loss ``omega * sqrt(mean(h^2) - lam * mean(h)^2)``.

    ``h = log pred - log gt`` over the ground-truth mask. The gradient is
    with respect to the predicted depths; it is zero where the square-root
    argument vanishes.

    Raises:
        NonPositiveDepth if a valid prediction is not positive.
    """
    if pred.n != gt.n:
        raise ShapeMismatch(f'Prediction has {pred.n} pixels, ground truth has {gt.n}')
    mask = gt.mask
    n_valid = gt.n_valid
    predicted = pred.values
    if not np.all(predicted[mask] > 0):
        raise NonPositiveDepth('Scale-invariant loss needs positive predicted depths')
    grad = np.zeros(pred.n, dtype=np.float64)
    if n_valid == 0:
        return LossResult(0.0, grad)

    h = np.log(predicted[mask]) - np.log(gt.values[mask])
    sum_h = chunked_sum(h)
    inner = max(chunked_sum(h ** 2) / n_valid - lam * (sum_h / n_valid) ** 2, 0.0)
    root = np.sqrt(inner)
    if root > 0:
        grad_h = omega / (2.0 * root) * (2.0 * h / n_valid - 2.0 * lam * sum_h / n_valid ** 2)
        grad[mask] = grad_h / predicted[mask]
    return LossResult(float(omega * root), grad)


def si_from_logits(logits, table: DepthTable, gt: GroundTruthDepth, omega: float = DEFAULT_SI_OMEGA,
                   lam: float = DEFAULT_SI_LAMBDA) -> LossResult:
    """Scale-invariant loss of the adaptive decode, with gradient in logits.

    The prediction is ``sum_p softmax_p * values[p]`` on an adaptive table.
    """
    table.require_adaptive()
    logits = _check_logits(logits)
    if logits.shape[1] != table.k:
        raise ShapeMismatch(f'{logits.shape[1]} logits for a {table.k}-bin table')
    probs = softmax_array(logits)
    depth = np.einsum('nk,k->n', probs, table.values)
    inner = scale_invariant_loss(DepthMap(depth), gt, omega, lam)
    grad = inner.grad[:, np.newaxis] * probs * (table.values[np.newaxis, :] - depth[:, np.newaxis])
    return LossResult(inner.value, grad)


@validate_expression(BadConfig, epsilon=X > 0)
def finite_diff_check(loss_op: Callable[[np.ndarray], LossResult], point, epsilon: float = 1e-6) -> float:
    """Compares an analytic gradient with central differences.

    Args:
        loss_op (callable): maps an array to a `LossResult` whose gradient
            has the array's shape.
        point (np.ndarray): where to check, in float64.
        epsilon (float): step of the central difference.

    Returns:
        ``max |analytic - numeric| / max(1, |numeric|)`` over all entries.
    """
    point = np.array(point, dtype=np.float64)
    analytic = np.asarray(loss_op(point).grad, dtype=np.float64)
    if analytic.shape != point.shape:
        raise ShapeMismatch(f'Gradient shape {analytic.shape} differs from point shape {point.shape}')

    worst = 0.0
    for index in np.ndindex(point.shape):
        original = point[index]
        point[index] = original + epsilon
        upper = loss_op(point).value
        point[index] = original - epsilon
        lower = loss_op(point).value
        point[index] = original
        numeric = (upper - lower) / (2.0 * epsilon)
        worst = max(worst, abs(analytic[index] - numeric) / max(1.0, abs(numeric)))
    return worst


GRADCHECK_TOLERANCE = {
    LossKind.CE: 1e-5,
    LossKind.WCE: 1e-5,
    LossKind.MBCE: 1e-5,
    LossKind.ORDINAL: 1e-5,
    LossKind.SMOOTH_L1: 1e-5,
    LossKind.SI: 1e-4,
}


def _random_case(kind: LossKind, rng: np.random.Generator, n: int, k: int):
    """Builds ``(loss_op, point)`` for one random gradient check."""
    logits = rng.normal(0.0, 2.0, size=(n, k))
    if kind is LossKind.CE:
        target = np.eye(k)[rng.integers(0, k, size=n)]
        return (lambda x: ce_loss(x, target)), logits
    if kind is LossKind.WCE:
        target = rng.random((n, k))
        target /= target.sum(axis=1, keepdims=True)
        return (lambda x: weighted_ce_loss(x, target)), logits
    if kind is LossKind.MBCE:
        target = rng.random((n, k))
        return (lambda x: multi_bce_loss(x, target)), logits
    if kind is LossKind.ORDINAL:
        target = (np.arange(k)[np.newaxis, :] <= rng.integers(0, k, size=n)[:, np.newaxis]).astype(float)
        return (lambda x: ordinal_loss(x, target)), rng.normal(0.0, 2.0, size=(n, 2 * k))
    if kind is LossKind.SMOOTH_L1:
        index = rng.integers(0, k, size=n)
        return (lambda x: smooth_l1_loss(x, index)), logits
    gt = GroundTruthDepth(rng.uniform(1.0, 10.0, size=n))
    return (lambda x: scale_invariant_loss(DepthMap(x), gt)), rng.uniform(1.0, 10.0, size=n)


@validate_containment(BadConfig, kind=tuple(LossKind))
def random_gradcheck(kind: LossKind, n_points: int = 100, seed: int = 0, n: int = 10, k: int = 8) -> float:
    """Worst `finite_diff_check` error of a loss over random points.

    Args:
        kind (LossKind): loss to check.
        n_points (int): number of random points.
        seed (int): seed of the point generator.
        n (int): pixels per point.
        k (int): classes per pixel.

    Returns:
        The maximum relative error found.
    """
    kind = LossKind(kind)
    rng = np.random.Generator(np.random.Philox(seed))
    worst = 0.0
    for _ in range(n_points):
        loss_op, point = _random_case(kind, rng, n, k)
        worst = max(worst, finite_diff_check(loss_op, point))
    _LOGGER.debug('Gradient check %s: max relative error %.3g over %d points', kind.value, worst, n_points)
    return worst
