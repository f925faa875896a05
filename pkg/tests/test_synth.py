import json
import math

import numpy as np
import pytest

from carkit.exceptions import BadConfig, DivergedLoss
from carkit.losses import softmax
from carkit.maps import UncertaintyMethod
from carkit.metrics import depth_metrics
from carkit.synth import (
    BenchmarkConfig,
    Predictor,
    SceneConfig,
    Strategy,
    StrategyName,
    gen_scene,
    parse_config,
    run_benchmark,
    strategy_config,
    train,
)
from carkit.synth.benchmark import resolve_strategies, summarize
from carkit.synth.scene import FEATURE_NAMES
from carkit.tables import class_index


def test_scene_is_deterministic():
    """The same seed gives the same scene; another seed does not.
    """
    first, second = gen_scene(3, SceneConfig()), gen_scene(3, SceneConfig())
    assert np.array_equal(first.gt.values, second.gt.values)
    assert np.array_equal(first.features, second.features)
    assert not np.array_equal(first.gt.values, gen_scene(4, SceneConfig()).gt.values)


def test_scene_shape_and_range():
    config = SceneConfig(width=16, height=8, a=2.0, b=50.0)
    scene = gen_scene(0, config)
    assert scene.n == 128
    assert scene.features.shape == (128, len(FEATURE_NAMES))
    assert np.all((scene.gt.values >= 2.0) & (scene.gt.values <= 50.0))
    assert scene.gt.n_valid == 128


def test_noiseless_scene_observes_true_depth():
    scene = gen_scene(1, SceneConfig(noise=0.0, noise_floor=0.0))
    np.testing.assert_allclose(scene.observed_log_depth, np.log(scene.gt.values), rtol=0, atol=1e-12)
    assert np.all(scene.noise_sigma == 0)


def test_noise_grows_with_depth():
    """Observation noise is nondecreasing in the true depth.
    """
    scene = gen_scene(2, SceneConfig())
    order = np.argsort(scene.gt.values)
    assert np.all(np.diff(scene.noise_sigma[order]) >= 0)


def test_invalid_fraction_masks_pixels():
    scene = gen_scene(0, SceneConfig(invalid_fraction=0.5))
    assert 0 < scene.gt.n_valid < scene.n


def test_scene_config_errors():
    with pytest.raises(BadConfig):
        gen_scene(0, SceneConfig(a=10.0, b=5.0))
    with pytest.raises(BadConfig):
        parse_config(SceneConfig, {'width': 1})
    with pytest.raises(BadConfig):
        parse_config(SceneConfig, {'depth': 3})


def test_strategy_config_defaults():
    assert strategy_config('cao-smo3-wce').gamma == 65
    assert strategy_config('yang-smo1-mbce').gamma == 15
    assert strategy_config('sorn-smo2-wce').gamma == 1
    assert strategy_config('dorn-ordinal', k=8).n_channels == 16
    assert strategy_config('li-onehot-ce', k=8).n_channels == 8
    assert strategy_config('adabins-si').scheme is None


def test_strategy_config_errors():
    """Unknown names, mismatched losses and bad ranges are configuration errors.
    """
    with pytest.raises(BadConfig, match='Unknown strategy'):
        strategy_config('pixelformer')
    with pytest.raises(BadConfig, match='pairs with'):
        strategy_config('li-onehot-ce', loss='wce')
    with pytest.raises(BadConfig):
        strategy_config('li-onehot-ce', a=5.0, b=1.0)
    with pytest.raises(BadConfig):
        strategy_config('li-onehot-ce', learning_rate=1.0)


def test_strategy_config_is_frozen():
    config = strategy_config('li-onehot-ce')
    with pytest.raises(Exception):
        config.k = 4


def test_uncertainty_applicability():
    assert Strategy(strategy_config('dorn-ordinal')).uncertainty_methods == (UncertaintyMethod.EDIST_ORDINAL,)
    assert UncertaintyMethod.EDIST_ADAPTIVE in Strategy(strategy_config('adabins-si')).uncertainty_methods
    for name in ('li-onehot-ce', 'cao-smo3-wce', 'sorn-smo2-wce', 'yang-smo1-mbce', 'ds-side-smoothl1'):
        assert Strategy(strategy_config(name)).uncertainty_methods == (
            UncertaintyMethod.SENTR, UncertaintyMethod.ONE_MINUS_MCP, UncertaintyMethod.EDIST)


def test_strategy_targets(small_scene):
    assert Strategy(strategy_config('adabins-si')).targets(small_scene.gt) is small_scene.gt
    index = Strategy(strategy_config('ds-side-smoothl1', k=8)).targets(small_scene.gt)
    assert index.dtype == np.int64 and index.min() >= 0 and index.max() <= 7
    labels = Strategy(strategy_config('dorn-ordinal', k=8)).targets(small_scene.gt)
    assert labels.data.shape == (small_scene.n, 8)


def test_training_reduces_loss():
    scene = gen_scene(0, SceneConfig(noise=0.0, noise_floor=0.0))
    result = train(scene, strategy_config('li-onehot-ce'), lr=0.5, epochs=200, seed=0)
    assert len(result.loss_trace) == 201
    assert result.loss_trace[-1] < result.loss_trace[0]
    assert result.trace_rows()[0] == (0, result.loss_trace[0])


def test_zero_learning_rate(small_scene):
    """A zero learning rate leaves the initial weights untouched and the loss flat.
    """
    config = strategy_config('li-onehot-ce', k=8)
    result = train(small_scene, config, lr=0.0, epochs=5, seed=7)
    initial = Predictor.initial(small_scene.features.shape[1], config.n_channels, 7)
    assert np.array_equal(result.predictor.weights, initial.weights)
    assert np.array_equal(result.predictor.bias, initial.bias)
    assert len(set(result.loss_trace)) == 1


def test_training_arguments(small_scene):
    config = strategy_config('li-onehot-ce', k=8)
    with pytest.raises(BadConfig):
        train(small_scene, config, lr=-0.1, epochs=5, seed=0)
    with pytest.raises(BadConfig):
        train(small_scene, config, lr=0.1, epochs=-1, seed=0)


def test_training_detects_divergence(small_scene):
    """An infinite learning rate makes the loss non-finite, which stops training.
    """
    with pytest.raises(DivergedLoss):
        train(small_scene, strategy_config('yang-smo1-mbce', k=8), lr=float('inf'), epochs=3, seed=0)


def test_ordinal_head_width(small_scene):
    result = train(small_scene, strategy_config('dorn-ordinal', k=8), lr=0.5, epochs=2, seed=0)
    assert result.predictor.weights.shape == (len(FEATURE_NAMES), 16)


def test_quantization_floor():
    """A perfect classifier is only as good as the bin width allows."""
    scene = gen_scene(0, SceneConfig(noise=0.0, noise_floor=0.0))
    strategy = Strategy(strategy_config('li-onehot-ce'))
    index = class_index(strategy.table, scene.gt.values)
    logits = np.where(np.arange(strategy.table.k)[np.newaxis, :] == index[:, np.newaxis], 50.0, -50.0)
    decoded = strategy.decode(softmax(logits), scene.gt.mask)
    assert depth_metrics(decoded, scene.gt).abs_rel <= math.expm1(strategy.table.q) + 1e-12


def test_report_shape(tmp_path, small_config):
    """Every cell carries the metrics, AUSE columns and a trace file for its strategy.
    """
    report = run_benchmark(small_config, out_dir=str(tmp_path))
    doc = json.loads(report.to_json())
    assert set(doc) == {'config', 'strategies', 'cells', 'summary'}
    assert 'n_jobs' not in doc['config']
    assert len(doc['cells']) == len(StrategyName) * 2

    for cell in doc['cells']:
        assert 'error' not in cell
        methods = {method.value for method in Strategy(report.strategies[cell['strategy']]).uncertainty_methods}
        assert set(cell['ause']) == methods
        for columns in cell['ause'].values():
            assert set(columns) == {'rmse', 'abs_rel'}
        assert math.isfinite(cell['final_loss'])
        assert (tmp_path / cell['loss_trace_file']).exists()

    entry = doc['summary']['li-onehot-ce']
    assert entry['n_cells'] == 2 and entry['n_failed'] == 0
    assert entry['metrics']['abs_rel']['std'] >= 0
    assert report.ause_mean('li-onehot-ce', 'edist') == entry['ause']['edist']['rmse']['mean']


def test_trace_file(tmp_path, small_config):
    run_benchmark(small_config, strategies=['li-onehot-ce'], seeds=[1], out_dir=str(tmp_path))
    lines = (tmp_path / 'traces' / 'li-onehot-ce_seed1.csv').read_text().splitlines()
    assert lines[0] == 'epoch,loss'
    assert len(lines) == small_config.epochs + 2


def test_report_is_reproducible(small_config):
    """Two runs of the same configuration give identical JSON.
    """
    config = small_config.model_copy(update={'strategies': [StrategyName.CAO_SMO3_WCE, StrategyName.DORN_ORDINAL]})
    assert run_benchmark(config).to_json() == run_benchmark(config).to_json()


def test_failed_cells_are_recorded(monkeypatch, small_config):
    """A diverged cell records its error and is left out of the statistics.
    """
    def diverge(*args, **kwargs):
        raise DivergedLoss('loss became nan')

    monkeypatch.setattr('carkit.synth.benchmark.train', diverge)
    report = run_benchmark(small_config, strategies=['li-onehot-ce'])
    assert all(cell['error'] == 'DivergedLoss: loss became nan' for cell in report.cells)
    assert report.summary['li-onehot-ce']['n_failed'] == 2
    assert report.summary['li-onehot-ce']['metrics'] == {}


def test_summary_statistics():
    """Means and population standard deviations over successful cells only.
    """
    cells = [
        {'strategy': 's', 'metrics': {'rmse': 1.0}, 'ause': {'edist': {'rmse': 0.5}}},
        {'strategy': 's', 'metrics': {'rmse': 3.0}, 'ause': {'edist': {'rmse': 1.5}}},
        {'strategy': 's', 'error': 'DivergedLoss: x'},
    ]
    entry = summarize(cells)['s']
    assert entry['metrics']['rmse'] == {'mean': 2.0, 'std': 1.0}
    assert entry['ause']['edist']['rmse'] == {'mean': 1.0, 'std': 0.5}
    assert entry['n_failed'] == 1


def test_overrides(small_config):
    config = small_config.model_copy(update={'overrides': {StrategyName.DORN_ORDINAL: {'ordinal_strict': False}}})
    assert resolve_strategies(config)['dorn-ordinal'].ordinal_strict is False
    broken = small_config.model_copy(update={'overrides': {StrategyName.DORN_ORDINAL: {'loss': 'ce'}}})
    with pytest.raises(BadConfig):
        resolve_strategies(broken)


def test_benchmark_config():
    config = parse_config(BenchmarkConfig, {'seeds': [5], 'overrides': {'adabins-si': {'lr_scale': 0.1}}})
    assert config.strategies == list(StrategyName)
    assert config.overrides[StrategyName.ADABINS_SI] == {'lr_scale': 0.1}
    assert parse_config(BenchmarkConfig, config.report_dict()) == config
    with pytest.raises(BadConfig):
        parse_config(BenchmarkConfig, {'seeds': []})
    with pytest.raises(BadConfig):
        parse_config(BenchmarkConfig, {'strategies': ['li-onehot-ce', 'vnl']})
    with pytest.raises(BadConfig):
        run_benchmark(BenchmarkConfig(), seeds=[])


@pytest.mark.slow
def test_worker_count_does_not_change_report(small_config):
    serial = run_benchmark(small_config.model_copy(update={'n_jobs': 1}))
    parallel = run_benchmark(small_config.model_copy(update={'n_jobs': 2}))
    assert serial.to_json() == parallel.to_json()


@pytest.mark.slow
def test_distribution_distance_ranks_best_for_binary_ce():
    """On the default benchmark the distance-based uncertainty beats both
    probability-only measures for the smoothed binary cross-entropy head.
    """
    report = run_benchmark(BenchmarkConfig(), strategies=['yang-smo1-mbce'])
    edist = report.ause_mean('yang-smo1-mbce', 'edist')
    assert edist < report.ause_mean('yang-smo1-mbce', 'sentr')
    assert edist < report.ause_mean('yang-smo1-mbce', '1-mcp')


@pytest.fixture
def small_scene():
    return gen_scene(0, SceneConfig(width=12, height=10))


@pytest.fixture
def small_config():
    return BenchmarkConfig(scene=SceneConfig(width=12, height=10), seeds=[0, 1], k=8, epochs=10, lr=0.5)
