from .config import (
    BenchmarkConfig,
    SceneConfig,
    StrategyConfig,
    StrategyName,
    parse_config,
)
from .scene import SynthScene, gen_scene
from .strategies import Strategy, strategy_config
from .training import Predictor, TrainingResult, train
from .benchmark import BenchmarkReport, run_benchmark
