"""Validated configuration of the synthetic benchmark.

All models are frozen pydantic models that reject unknown fields, so a
configuration embedded in a report can be loaded back unchanged.
"""
import enum
from typing import Any, Dict, List, Optional, Type, TypeVar

import pydantic
from pydantic import BaseModel, ConfigDict, Field, model_validator

from carkit.decode import DecodeMethod
from carkit.exceptions import BadConfig
from carkit.losses import DEFAULT_SI_LAMBDA, DEFAULT_SI_OMEGA, LossKind
from carkit.maps import LabelKind
from carkit.metrics import DEFAULT_STEP
from carkit.tables import IndexMode


class StrategyName(str, enum.Enum):
    LI_ONEHOT_CE = 'li-onehot-ce'
    CAO_SMO3_WCE = 'cao-smo3-wce'
    SORN_SMO2_WCE = 'sorn-smo2-wce'
    YANG_SMO1_MBCE = 'yang-smo1-mbce'
    DORN_ORDINAL = 'dorn-ordinal'
    DS_SIDE_SMOOTHL1 = 'ds-side-smoothl1'
    ADABINS_SI = 'adabins-si'


# strategy -> (label scheme, loss, decoder); adaptive bins carry no label scheme
PAIRINGS = {
    StrategyName.LI_ONEHOT_CE: (LabelKind.ONE_HOT, LossKind.CE, DecodeMethod.SOFT_WEIGHTED),
    StrategyName.CAO_SMO3_WCE: (LabelKind.SMOOTH3, LossKind.WCE, DecodeMethod.SOFT_WEIGHTED),
    StrategyName.SORN_SMO2_WCE: (LabelKind.SMOOTH2, LossKind.WCE, DecodeMethod.ARGMAX),
    StrategyName.YANG_SMO1_MBCE: (LabelKind.SMOOTH1, LossKind.MBCE, DecodeMethod.SOFT_WEIGHTED),
    StrategyName.DORN_ORDINAL: (LabelKind.ORDINAL, LossKind.ORDINAL, DecodeMethod.ORDINAL),
    StrategyName.DS_SIDE_SMOOTHL1: (LabelKind.ONE_HOT, LossKind.SMOOTH_L1, DecodeMethod.SOFT_WEIGHTED),
    StrategyName.ADABINS_SI: (None, LossKind.SI, DecodeMethod.ADAPTIVE),
}


class SceneConfig(BaseModel):
    """Synthetic scene generator settings.

    Attributes:
        width, height: image size in pixels.
        a, b: depth range in meters.
        n_planes: number of vertical stripes, each a planar log-depth ramp.
        noise: log-space noise sigma reached at depth ``b``.
        noise_floor: log-space noise sigma at depth 0.
        invalid_fraction: share of pixels masked out of the ground truth.
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    width: int = Field(64, ge=2)
    height: int = Field(64, ge=2)
    a: float = Field(1.0, gt=0)
    b: float = Field(80.0, gt=0)
    n_planes: int = Field(4, ge=1)
    noise: float = Field(0.15, ge=0)
    noise_floor: float = Field(0.01, ge=0)
    invalid_fraction: float = Field(0.0, ge=0, lt=1)


class StrategyConfig(BaseModel):
    """One classification strategy: its encoder, loss, decoder and mode flags.

    The ``(scheme, loss, decoder)`` triple must be the registered pairing
    for `name`.
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    name: StrategyName
    scheme: Optional[LabelKind] = None
    gamma: Optional[float] = Field(None, gt=0)
    loss: LossKind
    decoder: DecodeMethod
    k: int = Field(16, ge=1)
    a: float = Field(1.0, gt=0)
    b: float = Field(80.0, gt=0)
    index_mode: IndexMode = IndexMode.ROUND
    ordinal_strict: bool = True
    ordinal_literal: bool = False
    smooth_l1_literal: bool = False
    si_omega: float = Field(DEFAULT_SI_OMEGA, ge=0)
    si_lambda: float = Field(DEFAULT_SI_LAMBDA, ge=0, le=1)
    lr_scale: float = Field(1.0, gt=0)

    @model_validator(mode='after')
    def _check_pairing(self):
        if not self.a < self.b:
            raise ValueError(f'depth range needs a < b, got a={self.a}, b={self.b}')
        expected = PAIRINGS[self.name]
        if (self.scheme, self.loss, self.decoder) != expected:
            names = ', '.join(x.value if x is not None else 'none' for x in expected)
            raise ValueError(f'{self.name.value} pairs with ({names})')
        return self

    @property
    def n_channels(self) -> int:
        """Logits per pixel: two per class for the ordinal head."""
        return 2 * self.k if self.loss is LossKind.ORDINAL else self.k


class BenchmarkConfig(BaseModel):
    """Grid of strategies and seeds plus the shared training settings.

    Attributes:
        overrides: per-strategy field overrides applied on top of the
            registered defaults (e.g. ``{"dorn-ordinal": {"ordinal_strict": false}}``).
        n_jobs: benchmark cells run in parallel; results do not depend on it.
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    scene: SceneConfig = Field(default_factory=SceneConfig)
    strategies: List[StrategyName] = Field(default_factory=lambda: list(StrategyName), min_length=1)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)
    k: int = Field(16, ge=1)
    epochs: int = Field(300, ge=0)
    lr: float = Field(0.5, ge=0)
    step: float = Field(DEFAULT_STEP, gt=0, le=0.5)
    overrides: Dict[StrategyName, Dict[str, Any]] = Field(default_factory=dict)
    n_jobs: int = 1

    def report_dict(self) -> dict:
        """The configuration as embedded in a report, without `n_jobs`."""
        return self.model_dump(mode='json', exclude={'n_jobs'})


_Model = TypeVar('_Model', bound=BaseModel)


def parse_config(model: Type[_Model], doc: Dict[str, Any]) -> _Model:
    """Validates a plain document into a config model.

    Raises:
        BadConfig with pydantic's description of every failing field.
    """
    try:
        return model.model_validate(doc)
    except pydantic.ValidationError as e:
        raise BadConfig(f'Invalid {model.__name__}: {e}') from None
