"""Per-pixel containers shared by the pipeline stages.

Every map is flat: one row (or entry) per pixel, ``N`` pixels in total,
with a boolean validity mask where the stage needs one. Image layout is
only reintroduced by the PGM dump in `carkit.io`.
"""
import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from carkit.exceptions import (
    MaskMismatch,
    NonFinite,
    NonPositiveDepth,
    SemanticsMismatch,
    ShapeMismatch,
)

SUM_TOLERANCE = 1e-9


class LabelKind(str, enum.Enum):
    ONE_HOT = 'onehot'
    ORDINAL = 'ordinal'
    SMOOTH1 = 'smooth1'
    SMOOTH2 = 'smooth2'
    SMOOTH3 = 'smooth3'


class ProbSemantics(str, enum.Enum):
    SOFTMAX = 'softmax'
    PER_CLASS_SIGMOID = 'sigmoid'


class UncertaintyMethod(str, enum.Enum):
    SENTR = 'sentr'
    ONE_MINUS_MCP = '1-mcp'
    EDIST = 'edist'
    EDIST_ADAPTIVE = 'edist-adaptive'
    EDIST_ORDINAL = 'edist-ordinal'
    ENSEMBLE_VARIANCE = 'ensemble'


def as_mask(mask, n: int) -> np.ndarray:
    """Normalizes an optional mask to a read-only boolean array of length n.

    Raises:
        ShapeMismatch if the mask has the wrong length.
    """
    if mask is None:
        out = np.ones(n, dtype=bool)
    else:
        out = np.array(mask, dtype=bool).ravel()
        if out.size != n:
            raise ShapeMismatch(f'Mask has {out.size} entries for {n} pixels')
    out.setflags(write=False)
    return out


def _frozen(array, dtype=np.float64) -> np.ndarray:
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class GroundTruthDepth:
    """Ground-truth depths in meters with a validity mask.

    Masked-out values are ignored and may hold anything (0, NaN).

    Raises:
        NonPositiveDepth if a masked-in value is not a positive finite number.
    """
    values: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        values = _frozen(self.values).ravel()
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'mask', as_mask(self.mask, values.size))
        valid = values[self.mask]
        if not np.all(np.isfinite(valid) & (valid > 0)):
            raise NonPositiveDepth('Valid ground-truth depths must be finite and positive')

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.mask))


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Predicted depths in meters with a validity mask.

    Raises:
        NonFinite if a masked-in value is NaN or infinite.
    """
    values: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        values = _frozen(self.values).ravel()
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'mask', as_mask(self.mask, values.size))
        if not np.all(np.isfinite(values[self.mask])):
            raise NonFinite('Valid predicted depths must be finite')

    @property
    def n(self) -> int:
        return int(self.values.size)

    def require_positive(self):
        """Raises NonPositiveDepth if a masked-in value is not positive."""
        if not np.all(self.values[self.mask] > 0):
            raise NonPositiveDepth('Valid predicted depths must be positive')


def check_same_pixels(pred: DepthMap, gt: GroundTruthDepth):
    """Checks that a prediction and its ground truth cover the same pixels.

    Raises:
        ShapeMismatch if the pixel counts differ; MaskMismatch if the masks do.
    """
    if pred.n != gt.n:
        raise ShapeMismatch(f'Prediction has {pred.n} pixels, ground truth has {gt.n}')
    if not np.array_equal(pred.mask, gt.mask):
        raise MaskMismatch('Prediction and ground-truth masks differ')


@dataclass(frozen=True, eq=False)
class ProbMap:
    """Per-pixel length-K prediction vectors.

    Attributes:
        data (np.ndarray): N x K nonnegative values.
        semantics (ProbSemantics): SOFTMAX rows sum to 1, PER_CLASS_SIGMOID
            entries are independent probabilities in [0, 1].
    """
    data: np.ndarray
    semantics: ProbSemantics = ProbSemantics.SOFTMAX

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 2:
            raise ShapeMismatch(f'Probability map must be N x K, got shape {data.shape}')
        if not np.all(np.isfinite(data)):
            raise NonFinite('Probability map contains NaN or infinity')
        semantics = ProbSemantics(self.semantics)
        if np.any(data < 0) or (semantics is ProbSemantics.PER_CLASS_SIGMOID and np.any(data > 1)):
            raise SemanticsMismatch(f'Probability map entries out of range for {semantics.value} semantics')
        if semantics is ProbSemantics.SOFTMAX and data.size:
            if np.max(np.abs(np.sum(data, axis=1) - 1.0)) > SUM_TOLERANCE:
                raise SemanticsMismatch('Softmax probability rows must sum to 1')
        object.__setattr__(self, 'data', data)
        object.__setattr__(self, 'semantics', semantics)

    @property
    def n(self) -> int:
        return int(self.data.shape[0])

    @property
    def k(self) -> int:
        return int(self.data.shape[1])

    def require(self, semantics: ProbSemantics):
        """Raises SemanticsMismatch unless the map has the given semantics."""
        if self.semantics is not ProbSemantics(semantics):
            raise SemanticsMismatch(
                f'Expected {ProbSemantics(semantics).value} probabilities, got {self.semantics.value}'
            )


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Per-pixel classification targets produced by an encoder.

    Masked-out pixels carry all-zero rows.
    """
    data: np.ndarray
    kind: LabelKind
    gamma: Optional[float] = None

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 2:
            raise ShapeMismatch(f'Label map must be N x K, got shape {data.shape}')
        object.__setattr__(self, 'data', data)
        object.__setattr__(self, 'kind', LabelKind(self.kind))

    @property
    def n(self) -> int:
        return int(self.data.shape[0])

    @property
    def k(self) -> int:
        return int(self.data.shape[1])


@dataclass(frozen=True, eq=False)
class UncertaintyMap:
    """Per-pixel nonnegative uncertainty scores and the method behind them.

    `method` is None for scores loaded from a file without provenance.
    """
    values: np.ndarray
    method: Optional[UncertaintyMethod] = None
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        values = _frozen(self.values).ravel()
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'mask', as_mask(self.mask, values.size))
        if self.method is not None:
            object.__setattr__(self, 'method', UncertaintyMethod(self.method))

    @property
    def n(self) -> int:
        return int(self.values.size)
