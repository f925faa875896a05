"""Synthetic depth scenes standing in for images.

A scene is a stack of vertical stripes, each a planar ramp in log-depth,
observed through heteroscedastic Gaussian noise whose sigma grows linearly
with depth. The predictor sees a fixed feature basis: the normalized pixel
coordinates, their degree-2 products and the noisy observed log-depth.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from carkit.exceptions import BadConfig
from carkit.maps import GroundTruthDepth
from carkit.synth.config import SceneConfig
from carkit.validation import X, validate_expression


_LOGGER = logging.getLogger(__name__)

FEATURE_NAMES = ('x', 'y', 'x2', 'xy', 'y2', 'z', 'z2')


def scene_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, stream)``.

    Philox streams are identical on every platform numpy supports.
    """
    return np.random.Generator(np.random.Philox([int(seed), int(stream)]))


@dataclass(frozen=True, eq=False)
class SynthScene:
    """One generated scene, flattened in row-major pixel order.

    Attributes:
        width, height (int): image size.
        gt (GroundTruthDepth): true depths, within ``[a, b]``.
        features (np.ndarray): N x F predictor inputs, see `FEATURE_NAMES`.
        noise_sigma (np.ndarray): per-pixel log-space noise sigma.
        observed_log_depth (np.ndarray): noisy log-depth before normalization.
    """
    width: int
    height: int
    gt: GroundTruthDepth
    features: np.ndarray
    noise_sigma: np.ndarray
    observed_log_depth: np.ndarray

    @property
    def n(self) -> int:
        return self.width * self.height


def _coordinates(width: int, height: int):
    xs = np.linspace(-1.0, 1.0, width)
    ys = np.linspace(-1.0, 1.0, height)
    x, y = np.meshgrid(xs, ys)
    return x.ravel(), y.ravel()


def _planar_log_depth(rng: np.random.Generator, x: np.ndarray, y: np.ndarray, config: SceneConfig) -> np.ndarray:
    log_a, log_b = math.log(config.a), math.log(config.b)
    span = log_b - log_a
    cuts = np.sort(rng.uniform(-1.0, 1.0, size=config.n_planes - 1))
    stripe = np.searchsorted(cuts, x, side='right')
    offsets = rng.uniform(log_a + 0.1 * span, log_b - 0.1 * span, size=config.n_planes)
    slopes = rng.uniform(-0.4 * span, 0.4 * span, size=(config.n_planes, 2))
    log_depth = offsets[stripe] + slopes[stripe, 0] * x + slopes[stripe, 1] * y
    return np.clip(log_depth, log_a, log_b)


@validate_expression(BadConfig, config=X.a < X.b)
def gen_scene(seed: int, config: SceneConfig) -> SynthScene:
    """Generates a scene deterministically from ``(seed, config)``.

    Raises:
        BadConfig if the depth range is empty.
    """
    rng = scene_rng(seed)
    x, y = _coordinates(config.width, config.height)
    log_depth = _planar_log_depth(rng, x, y, config)
    depth = np.clip(np.exp(log_depth), config.a, config.b)

    sigma = config.noise_floor + config.noise * depth / config.b
    observed = log_depth + sigma * rng.standard_normal(depth.size)
    valid = rng.random(depth.size) >= config.invalid_fraction

    log_a, log_b = math.log(config.a), math.log(config.b)
    z = 2.0 * (observed - log_a) / (log_b - log_a) - 1.0
    features = np.stack([x, y, x * x, x * y, y * y, z, z * z], axis=1)

    _LOGGER.debug('Generated %dx%d scene for seed %d (%d valid pixels)',
                  config.width, config.height, seed, int(np.count_nonzero(valid)))
    return SynthScene(
        width=config.width,
        height=config.height,
        gt=GroundTruthDepth(depth, valid),
        features=features,
        noise_sigma=sigma,
        observed_log_depth=observed,
    )
