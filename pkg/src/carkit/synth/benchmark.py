"""Strategy-by-seed benchmark grid over synthetic scenes.

Each cell trains one strategy on one seed's scene, decodes, scores depth
accuracy and ranks every applicable uncertainty map by AUSE. Cells are
independent and may run in parallel; the report is assembled in a fixed
order and serialized with sorted keys, so it does not depend on the
number of workers.
"""
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed, effective_n_jobs

from carkit._reduction import chunked_mean
from carkit.exceptions import BadConfig, CarkitError
from carkit.io import dumps_json, write_csv
from carkit.metrics import MetricKind, ause, depth_metrics
from carkit.synth.config import BenchmarkConfig, StrategyConfig, StrategyName
from carkit.synth.scene import gen_scene
from carkit.synth.strategies import strategy_config
from carkit.synth.training import train


_LOGGER = logging.getLogger(__name__)

TRACE_DIR = 'traces'
AUSE_KINDS = (MetricKind.RMSE, MetricKind.ABS_REL)


@dataclass(eq=False)
class BenchmarkReport:
    """Per-cell results plus per-strategy mean and population std over seeds."""
    config: BenchmarkConfig
    strategies: Dict[str, StrategyConfig]
    cells: List[dict] = field(default_factory=list)
    summary: Dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            'config': self.config.report_dict(),
            'strategies': {name: cfg.model_dump(mode='json') for name, cfg in self.strategies.items()},
            'cells': self.cells,
            'summary': self.summary,
        }

    def to_json(self) -> str:
        return dumps_json(self.to_dict())

    def ause_mean(self, strategy: str, method: str, kind: str = 'rmse') -> float:
        return self.summary[strategy]['ause'][method][kind]['mean']


def resolve_strategies(config: BenchmarkConfig) -> Dict[str, StrategyConfig]:
    """Registered strategy configs on the benchmark's table, with overrides applied."""
    resolved = {}
    for name in config.strategies:
        name = StrategyName(name)
        resolved[name.value] = strategy_config(name, k=config.k, a=config.scene.a, b=config.scene.b,
                                               **config.overrides.get(name, {}))
    return resolved


def _trace_name(strategy: StrategyConfig, seed: int) -> str:
    return f'{TRACE_DIR}/{strategy.name.value}_seed{seed}.csv'


def run_cell(config: BenchmarkConfig, strategy: StrategyConfig, seed: int, out_dir: Optional[str] = None) -> dict:
    """Trains and evaluates one (strategy, seed) cell.

    Library errors are recorded in the cell's ``error`` field instead of
    being raised.
    """
    cell = {'strategy': strategy.name.value, 'seed': int(seed)}
    try:
        scene = gen_scene(seed, config.scene)
        result = train(scene, strategy, config.lr, config.epochs, seed)
        runtime = result.strategy
        probs = runtime.probabilities(result.predictor.logits(scene.features))
        decoded = runtime.decode(probs, scene.gt.mask)
        cell['metrics'] = depth_metrics(decoded, scene.gt).to_dict()
        cell['ause'] = {
            method.value: {kind.value: ause(decoded, scene.gt, uncert, kind, config.step) for kind in AUSE_KINDS}
            for method, uncert in runtime.uncertainties(probs, decoded).items()
        }
        cell['final_loss'] = result.loss_trace[-1]
    except CarkitError as e:
        _LOGGER.warning('Cell %s seed %d failed: %s', strategy.name.value, seed, e)
        cell['error'] = f'{type(e).__name__}: {e}'
        return cell

    cell['loss_trace_file'] = None
    if out_dir is not None:
        cell['loss_trace_file'] = _trace_name(strategy, seed)
        write_csv(os.path.join(out_dir, cell['loss_trace_file']), ('epoch', 'loss'), result.trace_rows())
    return cell


def _mean_std(values: Sequence[float]) -> dict:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return {'mean': None, 'std': None}
    mean = chunked_mean(values)
    return {'mean': mean, 'std': math.sqrt(chunked_mean((values - mean) ** 2))}


def summarize(cells: Sequence[dict]) -> Dict[str, dict]:
    """Mean and population std of every metric and AUSE column, per strategy.

    Failed cells are counted but left out of the statistics.
    """
    summary = {}
    for name in sorted({cell['strategy'] for cell in cells}):
        mine = [cell for cell in cells if cell['strategy'] == name]
        ok = [cell for cell in mine if 'error' not in cell]
        entry = {'n_cells': len(mine), 'n_failed': len(mine) - len(ok), 'metrics': {}, 'ause': {}}
        if ok:
            for metric in ok[0]['metrics']:
                entry['metrics'][metric] = _mean_std([cell['metrics'][metric] for cell in ok])
            for method, columns in ok[0]['ause'].items():
                entry['ause'][method] = {
                    kind: _mean_std([cell['ause'][method][kind] for cell in ok]) for kind in columns
                }
        summary[name] = entry
    return summary


def run_benchmark(config: BenchmarkConfig, strategies: Optional[Sequence[StrategyName]] = None,
                  seeds: Optional[Sequence[int]] = None, out_dir: Optional[str] = None) -> BenchmarkReport:
    """Runs the full strategy x seed grid.

    Args:
        config (BenchmarkConfig): scene, training and evaluation settings.
        strategies (list, optional): overrides ``config.strategies``.
        seeds (list, optional): overrides ``config.seeds``.
        out_dir (str, optional): where loss traces are written (under
            ``traces/``); no files are written when omitted.

    Raises:
        BadConfig if the strategy or seed list is empty.
    """
    updates = {}
    if strategies is not None:
        updates['strategies'] = [StrategyName(name) for name in strategies]
    if seeds is not None:
        updates['seeds'] = [int(seed) for seed in seeds]
    if updates:
        config = config.model_copy(update=updates)
    if not config.strategies or not config.seeds:
        raise BadConfig('A benchmark needs at least one strategy and one seed')

    resolved = resolve_strategies(config)
    if out_dir is not None:
        os.makedirs(os.path.join(out_dir, TRACE_DIR), exist_ok=True)

    jobs = [(resolved[StrategyName(name).value], seed) for name in config.strategies for seed in config.seeds]
    n_jobs = effective_n_jobs(config.n_jobs)
    _LOGGER.info('Running %d benchmark cells on %d worker(s)', len(jobs), n_jobs)
    cells = Parallel(n_jobs=n_jobs)(delayed(run_cell)(config, strategy, seed, out_dir) for strategy, seed in jobs)

    return BenchmarkReport(config, resolved, list(cells), summarize(cells))
