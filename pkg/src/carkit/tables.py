"""Depth tables: the discretization behind every classification strategy.

Two kinds of table exist. A handcrafted table stores the centers of K
equal-width intervals of ``[log a, log b]`` (log-depth values). An
adaptive table stores K depths in meters obtained from a normalized width
vector by cumulative summation.

Examples:

```
>>> table = make_uniform_log_table(DepthRange(1.0, math.e), 2)
>>> table.values
array([0.25, 0.75])
>>> class_index(table, math.exp(0.6))
1
```
"""
import enum
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from carkit.exceptions import (
    BadConfig,
    BadRange,
    DegenerateWidths,
    NonPositiveDepth,
    NonPositiveMin,
    SemanticsMismatch,
    ZeroBins,
)
from carkit.validation import X, validate_containment, validate_expression, validate_range


_LOGGER = logging.getLogger(__name__)

DEFAULT_WIDTH_EPS = 1e-3
# Outdoor driving range used when a caller gives none.
DEFAULT_MIN_DEPTH = 1e-3
DEFAULT_MAX_DEPTH = 80.0


class TableSpace(str, enum.Enum):
    """Value space of a depth table."""
    LOG_CENTERS = 'log_centers'
    LINEAR_ADAPTIVE = 'linear_adaptive'


class IndexMode(str, enum.Enum):
    """How a depth is turned into a class index.

    ROUND rounds ``log(d/a)/q`` to the nearest integer, which lands on the
    nearest bin edge. FLOOR takes the interval that contains the depth.
    """
    ROUND = 'round'
    FLOOR = 'floor'


def round_half_away(x):
    """Rounds half away from zero, elementwise.

    Args:
        x (float or np.ndarray): values to round.

    Returns:
        Rounded values as floats, same shape as the input.
    """
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass(frozen=True)
class DepthRange:
    """Minimum and maximum depth in meters.

    Raises:
        BadRange if the bounds are not finite or ``a >= b``.
    """
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise BadRange(f'Depth range must be finite, got [{self.a}, {self.b}]')
        if self.a >= self.b:
            raise BadRange(f'Depth range must satisfy a < b, got [{self.a}, {self.b}]')
        if self.a < 0:
            raise BadRange(f'Depth range cannot start below zero, got a={self.a}')


@dataclass(frozen=True, eq=False)
class WidthVector:
    """Normalized bin widths of an adaptive table."""
    widths: np.ndarray

    def __post_init__(self):
        widths = np.array(self.widths, dtype=np.float64)
        if widths.ndim != 1 or widths.size == 0:
            raise ZeroBins('Width vector must be a non-empty 1-D array')
        if not np.all(np.isfinite(widths)) or np.any(widths < 0):
            raise DegenerateWidths('Widths must be finite and nonnegative')
        if abs(float(np.sum(widths)) - 1.0) > 1e-9:
            raise DegenerateWidths(f'Widths must sum to 1, got {float(np.sum(widths))!r}')
        widths.setflags(write=False)
        object.__setattr__(self, 'widths', widths)

    @property
    def k(self) -> int:
        return int(self.widths.size)


@dataclass(frozen=True, eq=False)
class DepthTable:
    """K ordered quantized depth values and the range they discretize.

    Tables are immutable after construction and safe to share.

    Attributes:
        space (TableSpace): log-space centers or linear adaptive depths.
        values (np.ndarray): length-K strictly increasing values. Log-depth
            for LOG_CENTERS, meters for LINEAR_ADAPTIVE.
        depth_range (DepthRange): the range the table covers.
        q (float or None): bin width in log space (LOG_CENTERS only).
    """
    space: TableSpace
    values: np.ndarray
    depth_range: DepthRange
    q: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'space', TableSpace(self.space))
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ZeroBins('A depth table needs at least one value')
        if not np.all(np.isfinite(values)):
            raise BadConfig('Depth table values must be finite')
        if values.size > 1 and not np.all(np.diff(values) > 0):
            raise DegenerateWidths('Depth table values must be strictly increasing')
        if self.space is TableSpace.LOG_CENTERS and self.q is None:
            raise BadConfig('A log-space table needs its bin width q')
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def k(self) -> int:
        return int(self.values.size)

    @property
    def a(self) -> float:
        return self.depth_range.a

    @property
    def b(self) -> float:
        return self.depth_range.b

    @property
    def is_log(self) -> bool:
        return self.space is TableSpace.LOG_CENTERS

    @property
    def edges(self) -> np.ndarray:
        """The K+1 log-space interval edges ``log a + k*q``."""
        self.require_log()
        return math.log(self.a) + np.arange(self.k + 1, dtype=np.float64) * self.q

    @property
    def depths(self) -> np.ndarray:
        """Table values in meters."""
        if self.is_log:
            return np.exp(self.values)
        return self.values.copy()

    def require_log(self):
        """Raises SemanticsMismatch unless this is a log-space table."""
        if not self.is_log:
            raise SemanticsMismatch('Operation needs a handcrafted log-space table')

    def require_adaptive(self):
        """Raises SemanticsMismatch unless this is an adaptive table."""
        if self.is_log:
            raise SemanticsMismatch('Operation needs an adaptive linear table')

    def to_dict(self) -> dict:
        """JSON-ready document ``{space, a, b, k, q?, values}``.

        Floats are emitted by Python's shortest round-trip repr, so a
        JSON round trip is bit-exact.
        """
        doc = {
            'space': self.space.value,
            'a': float(self.a),
            'b': float(self.b),
            'k': self.k,
        }
        if self.is_log:
            doc['q'] = float(self.q)
        doc['values'] = [float(x) for x in self.values]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> 'DepthTable':
        """Rebuilds a table from `to_dict` output.

        Raises:
            BadConfig if fields are missing or inconsistent.
        """
        try:
            space = TableSpace(doc['space'])
            depth_range = DepthRange(float(doc['a']), float(doc['b']))
            values = [float(x) for x in doc['values']]
            k = int(doc['k'])
            q = float(doc['q']) if space is TableSpace.LOG_CENTERS else None
        except (KeyError, TypeError, ValueError) as e:
            raise BadConfig(f'Malformed depth table document: {e}') from None
        if len(values) != k:
            raise BadConfig(f'Depth table declares k={k} but lists {len(values)} values')
        return cls(space, np.array(values), depth_range, q)


@validate_expression(NonPositiveMin, depth_range=X.a > 0)
@validate_expression(ZeroBins, k=X >= 1)
def make_uniform_log_table(depth_range: DepthRange, k: int) -> DepthTable:
    """Builds the handcrafted table of K log-space interval centers.

    ``q = (log b - log a) / K`` and ``values[p] = log a + (p + 0.5) q``.

    Args:
        depth_range (DepthRange): depth range with ``a > 0``.
        k (int): number of bins.

    Returns:
        A LOG_CENTERS table.

    Raises:
        NonPositiveMin if ``a <= 0``; ZeroBins if ``k < 1``.
    """
    log_a = math.log(depth_range.a)
    q = (math.log(depth_range.b) - log_a) / k
    values = log_a + (np.arange(k, dtype=np.float64) + 0.5) * q
    _LOGGER.debug('Built log table: a=%g b=%g k=%d q=%g', depth_range.a, depth_range.b, k, q)
    return DepthTable(TableSpace.LOG_CENTERS, values, depth_range, q)


@validate_range(BadConfig, eps=(0, None))
def normalize_widths(raw: Union[Sequence[float], np.ndarray], eps: float = DEFAULT_WIDTH_EPS) -> WidthVector:
    """Turns raw width scores into a normalized width vector.

    ``widths[p] = (max(raw[p], 0) + eps) / sum_s (max(raw[s], 0) + eps)``.
    The additive floor keeps every bin non-empty.

    Args:
        raw (array-like): length-K raw widths.
        eps (float): additive floor, ``eps * K <= 1``.

    Raises:
        DegenerateWidths if every raw width is nonpositive and ``eps == 0``.
        BadConfig if ``eps * K > 1`` or raw contains non-finite values.
    """
    raw = np.asarray(raw, dtype=np.float64).ravel()
    if raw.size == 0:
        raise ZeroBins('Cannot normalize an empty width vector')
    if not np.all(np.isfinite(raw)):
        raise BadConfig('Raw widths must be finite')
    if eps * raw.size > 1:
        raise BadConfig(f'Width floor too large: eps * K = {eps * raw.size} > 1')
    floored = np.maximum(raw, 0.0) + eps
    total = float(np.sum(floored))
    if total <= 0:
        raise DegenerateWidths('All raw widths are nonpositive and no floor is set')
    widths = floored / total
    # renormalize so the float sum is as close to 1 as it gets
    widths = widths / float(np.sum(widths))
    return WidthVector(widths)


def make_adaptive_table(depth_range: DepthRange, widths: WidthVector) -> DepthTable:
    """Builds an adaptive table by cumulative summation of widths.

    ``values[p] = a + (b - a) * sum_{s <= p} widths[s]``; no half-width
    offset is applied.

    Raises:
        DegenerateWidths if a zero width makes two values coincide.
    """
    a, b = depth_range.a, depth_range.b
    values = a + (b - a) * np.cumsum(widths.widths)
    values[-1] = b
    return DepthTable(TableSpace.LINEAR_ADAPTIVE, values, depth_range)


@validate_containment(BadConfig, mode=tuple(IndexMode))
def class_index(table: DepthTable, d, mode: IndexMode = IndexMode.ROUND):
    """Class index of a depth in a log-space table.

    Depths are clamped to ``[a, b]``, then ``log(d/a)/q`` is rounded half
    away from zero (ROUND) or floored (FLOOR) and clamped to ``[0, K-1]``.

    Args:
        table (DepthTable): LOG_CENTERS table.
        d (float or np.ndarray): depths in meters.
        mode (IndexMode): rounding convention.

    Returns:
        An int for scalar input, otherwise an int64 array of the input's shape.

    Raises:
        NonPositiveDepth if any depth is not a positive number.
    """
    table.require_log()
    depth = np.asarray(d, dtype=np.float64)
    if not np.all(depth > 0):
        raise NonPositiveDepth('Depths must be positive to be indexed')
    clamped = np.clip(depth, table.a, table.b)
    n_clamped = int(np.count_nonzero(clamped != depth))
    if n_clamped:
        _LOGGER.debug('Clamped %d depth(s) into [%g, %g]', n_clamped, table.a, table.b)
    position = np.log(clamped / table.a) / table.q
    if IndexMode(mode) is IndexMode.ROUND:
        index = round_half_away(position)
    else:
        index = np.floor(position)
    index = np.clip(index, 0, table.k - 1).astype(np.int64)
    if index.ndim == 0:
        return int(index)
    return index
