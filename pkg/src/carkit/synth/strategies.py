"""Registered classification strategies and their end-to-end plumbing.

Each strategy ties together a depth table, a target encoder, a loss, a
decoder and the uncertainty scores that apply to its output head.
"""
import logging
from typing import Dict, Optional, Tuple

import numpy as np

from carkit.decode import DecodeMethod, decode
from carkit.encode import DEFAULT_GAMMA, encode_labels
from carkit.exceptions import BadConfig
from carkit.losses import (
    LossKind,
    LossResult,
    ce_loss,
    multi_bce_loss,
    ordinal_loss,
    ordinal_probs,
    si_from_logits,
    smooth_l1_loss,
    softmax,
    weighted_ce_loss,
)
from carkit.maps import DepthMap, GroundTruthDepth, ProbMap, UncertaintyMap, UncertaintyMethod
from carkit.synth.config import PAIRINGS, StrategyConfig, StrategyName, parse_config
from carkit.tables import (
    DepthRange,
    DepthTable,
    class_index,
    make_adaptive_table,
    make_uniform_log_table,
    normalize_widths,
)
from carkit.uncertainty import uncertainty_map


_LOGGER = logging.getLogger(__name__)

SOFTMAX_METHODS = (UncertaintyMethod.SENTR, UncertaintyMethod.ONE_MINUS_MCP, UncertaintyMethod.EDIST)
ADAPTIVE_METHODS = (UncertaintyMethod.SENTR, UncertaintyMethod.ONE_MINUS_MCP, UncertaintyMethod.EDIST_ADAPTIVE)
ORDINAL_METHODS = (UncertaintyMethod.EDIST_ORDINAL,)

# registered defaults beyond the pairing itself
_DEFAULTS = {
    StrategyName.CAO_SMO3_WCE: {'gamma': DEFAULT_GAMMA[PAIRINGS[StrategyName.CAO_SMO3_WCE][0]]},
    StrategyName.SORN_SMO2_WCE: {'gamma': DEFAULT_GAMMA[PAIRINGS[StrategyName.SORN_SMO2_WCE][0]]},
    StrategyName.YANG_SMO1_MBCE: {'gamma': DEFAULT_GAMMA[PAIRINGS[StrategyName.YANG_SMO1_MBCE][0]]},
    StrategyName.ADABINS_SI: {'lr_scale': 0.2},
}


def strategy_config(name: StrategyName, k: int = 16, a: float = 1.0, b: float = 80.0,
                    **overrides) -> StrategyConfig:
    """Builds the registered configuration of a strategy.

    Args:
        name (StrategyName): registered strategy.
        k (int): number of bins.
        a, b (float): depth range.
        **overrides: any other `StrategyConfig` field.

    Raises:
        BadConfig for unknown names, unknown fields or a broken pairing.
    """
    try:
        name = StrategyName(name)
    except ValueError:
        allowed = ', '.join(x.value for x in StrategyName)
        raise BadConfig(f'Unknown strategy {name!r}, expected one of: {allowed}') from None
    scheme, loss, decoder = PAIRINGS[name]
    doc = {'name': name, 'scheme': scheme, 'loss': loss, 'decoder': decoder, 'k': k, 'a': a, 'b': b}
    doc.update(_DEFAULTS.get(name, {}))
    doc.update(overrides)
    return parse_config(StrategyConfig, doc)


class Strategy:
    """Runtime view of a `StrategyConfig`."""

    def __init__(self, config: StrategyConfig):
        self.config = config
        self.table = self._build_table(config)

    @staticmethod
    def _build_table(config: StrategyConfig) -> DepthTable:
        depth_range = DepthRange(config.a, config.b)
        if config.decoder is DecodeMethod.ADAPTIVE:
            # fixed uniform widths stand in for a learned width generator
            return make_adaptive_table(depth_range, normalize_widths(np.ones(config.k), eps=0.0))
        return make_uniform_log_table(depth_range, config.k)

    @property
    def name(self) -> StrategyName:
        return self.config.name

    @property
    def n_channels(self) -> int:
        return self.config.n_channels

    @property
    def uncertainty_methods(self) -> Tuple[UncertaintyMethod, ...]:
        if self.config.loss is LossKind.ORDINAL:
            return ORDINAL_METHODS
        if self.config.loss is LossKind.SI:
            return ADAPTIVE_METHODS
        return SOFTMAX_METHODS

    def targets(self, gt: GroundTruthDepth):
        """Training targets for `loss`: a label map, class indices or the depths themselves."""
        config = self.config
        if config.loss is LossKind.SI:
            return gt
        if config.loss is LossKind.SMOOTH_L1:
            index = np.zeros(gt.n, dtype=np.int64)
            index[gt.mask] = class_index(self.table, gt.values[gt.mask], mode=config.index_mode)
            return index
        return encode_labels(gt, self.table, config.scheme, gamma=config.gamma,
                             strict=config.ordinal_strict, index_mode=config.index_mode)

    def loss(self, logits: np.ndarray, targets, gt: GroundTruthDepth) -> LossResult:
        config = self.config
        if config.loss is LossKind.CE:
            return ce_loss(logits, targets, gt.mask)
        if config.loss is LossKind.WCE:
            return weighted_ce_loss(logits, targets, gt.mask)
        if config.loss is LossKind.MBCE:
            return multi_bce_loss(logits, targets, gt.mask)
        if config.loss is LossKind.ORDINAL:
            return ordinal_loss(logits, targets, gt.mask)
        if config.loss is LossKind.SMOOTH_L1:
            return smooth_l1_loss(logits, targets, gt.mask, literal=config.smooth_l1_literal)
        return si_from_logits(logits, self.table, gt, omega=config.si_omega, lam=config.si_lambda)

    def probabilities(self, logits: np.ndarray) -> ProbMap:
        """Head output: paired sigmoids for the ordinal head, softmax otherwise."""
        if self.config.loss is LossKind.ORDINAL:
            return ordinal_probs(logits)
        return softmax(logits)

    def decode(self, probs: ProbMap, mask=None) -> DepthMap:
        return decode(self.config.decoder, self.table, probs, mask, literal=self.config.ordinal_literal)

    def uncertainties(self, probs: ProbMap, decoded: DepthMap,
                      methods: Optional[Tuple[UncertaintyMethod, ...]] = None) -> Dict[UncertaintyMethod, UncertaintyMap]:
        """Every applicable uncertainty map, keyed by method."""
        methods = self.uncertainty_methods if methods is None else methods
        return {
            method: uncertainty_map(method, table=self.table, probs=probs, decoded=decoded,
                                    strict=self.config.ordinal_strict)
            for method in methods
        }
