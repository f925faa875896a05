"""Full-batch gradient descent of a linear classification head."""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from carkit._reduction import chunked_column_sum, chunked_matmul_t
from carkit.exceptions import BadConfig, DivergedLoss
from carkit.synth.config import StrategyConfig
from carkit.synth.scene import SynthScene, scene_rng
from carkit.synth.strategies import Strategy
from carkit.validation import validate_range


_LOGGER = logging.getLogger(__name__)

INIT_SCALE = 0.01
_INIT_STREAM = 1


@dataclass(eq=False)
class Predictor:
    """Per-pixel logits ``features @ weights + bias``.

    Attributes:
        weights (np.ndarray): F x C matrix.
        bias (np.ndarray): length-C vector.
    """
    weights: np.ndarray
    bias: np.ndarray

    @classmethod
    def initial(cls, n_features: int, n_channels: int, seed: int) -> 'Predictor':
        """Small random weights and a zero bias, drawn from the seed's init stream."""
        rng = scene_rng(seed, _INIT_STREAM)
        return cls(INIT_SCALE * rng.standard_normal((n_features, n_channels)), np.zeros(n_channels))

    def logits(self, features: np.ndarray) -> np.ndarray:
        return np.einsum('nf,fc->nc', features, self.weights) + self.bias[np.newaxis, :]

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias)))


@dataclass(eq=False)
class TrainingResult:
    """A trained predictor and the loss before each epoch plus the final loss."""
    predictor: Predictor
    strategy: Strategy
    loss_trace: List[float] = field(default_factory=list)

    def trace_rows(self) -> List[Tuple[int, float]]:
        return list(enumerate(self.loss_trace))


@validate_range(BadConfig, lr=(0, None), epochs=(0, None))
def train(scene: SynthScene, strategy: StrategyConfig, lr: float, epochs: int, seed: int) -> TrainingResult:
    """Fits a linear head to a scene under one strategy.

    Gradients come from the strategy's loss and are pulled back to the
    parameters with fixed-order reductions, so training is bit-for-bit
    reproducible.

    Args:
        scene (SynthScene): training scene.
        strategy (StrategyConfig): encoder, loss and decoder to use.
        lr (float): learning rate, scaled by the strategy's ``lr_scale``.
            Zero leaves the predictor at its initialization.
        epochs (int): number of full-batch updates.
        seed (int): seed of the parameter initialization.

    Returns:
        A `TrainingResult` whose trace holds ``epochs + 1`` loss values.

    Raises:
        DivergedLoss if the loss or the parameters stop being finite.
    """
    runtime = Strategy(strategy)
    predictor = Predictor.initial(scene.features.shape[1], runtime.n_channels, seed)
    targets = runtime.targets(scene.gt)
    step = lr * strategy.lr_scale
    trace = []

    for epoch in range(epochs + 1):
        result = runtime.loss(predictor.logits(scene.features), targets, scene.gt)
        if not math.isfinite(result.value):
            raise DivergedLoss(f'{strategy.name.value}: loss became {result.value} at epoch {epoch}')
        trace.append(result.value)
        if epoch == epochs:
            break
        if step:
            predictor.weights = predictor.weights - step * chunked_matmul_t(scene.features, result.grad)
            predictor.bias = predictor.bias - step * chunked_column_sum(result.grad)
        if not predictor.is_finite():
            raise DivergedLoss(f'{strategy.name.value}: parameters stopped being finite at epoch {epoch}')

    _LOGGER.debug('Trained %s for %d epochs: loss %.6g -> %.6g',
                  strategy.name.value, epochs, trace[0], trace[-1])
    return TrainingResult(predictor, runtime, trace)
