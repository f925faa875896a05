import math

import numpy as np
import pytest

from carkit.decode import decode_argmax, decode_ordinal, decode_soft_weighted
from carkit.exceptions import BadConfig, MaskMismatch, SemanticsMismatch, TooFewMembers
from carkit.maps import DepthMap, ProbMap, ProbSemantics, UncertaintyMethod
from carkit.tables import DepthRange, make_adaptive_table, make_uniform_log_table, normalize_widths
from carkit.uncertainty import (
    e_dist,
    e_dist_adaptive,
    e_dist_ordinal,
    ensemble_variance,
    one_minus_mcp,
    shannon_entropy,
    uncertainty_map,
)


def test_shannon_entropy():
    """Entropy is log K for a uniform row and zero for a one-hot row.
    """
    scores = shannon_entropy(softmax_probs([0.25] * 4, [1, 0, 0, 0], [0.5, 0.5, 0, 0]))
    np.testing.assert_allclose(scores.values, [1.386294, 0.0, 0.693147], atol=1e-6)
    assert scores.method is UncertaintyMethod.SENTR
    assert np.all(scores.values >= 0)


def test_one_minus_mcp():
    scores = one_minus_mcp(softmax_probs([0, 1, 0, 0], [0.25] * 4, [0.3, 0.7, 0, 0]))
    np.testing.assert_allclose(scores.values, [0.0, 0.75, 0.3], atol=1e-12)


def test_classification_scores_need_softmax():
    with pytest.raises(SemanticsMismatch):
        shannon_entropy(sigmoid_probs([0.5, 0.5]))
    with pytest.raises(SemanticsMismatch):
        one_minus_mcp(sigmoid_probs([0.5, 0.5]))


def test_e_dist(setup_t):
    """Soft-weighted decoding gives a smaller expected distance than argmax.
    """
    probs = softmax_probs([0.5, 0.5])
    soft = e_dist(setup_t, probs, decode_soft_weighted(setup_t, probs))
    argmax = e_dist(setup_t, probs, decode_argmax(setup_t, probs))
    assert soft.values[0] == pytest.approx(0.176144, abs=1e-6)
    assert argmax.values[0] == pytest.approx(0.346902, abs=1e-6)
    assert soft.method is UncertaintyMethod.EDIST


def test_e_dist_onehot_is_zero(setup_t):
    probs = softmax_probs([1, 0], [0, 1])
    scores = e_dist(setup_t, probs, decode_argmax(setup_t, probs))
    np.testing.assert_allclose(scores.values, 0.0, atol=1e-12)


def test_e_dist_is_a_parabola_in_the_decoded_depth():
    """Moving the decoded depth by ``t`` away from the expected depth adds
    exactly ``t^2``, so the soft-weighted decoding is the minimizer.
    """
    table = make_uniform_log_table(DepthRange(1.0, 10.0), 8)
    rng = np.random.Generator(np.random.Philox(3))
    probs = ProbMap(rng.dirichlet(np.ones(8), size=5), ProbSemantics.SOFTMAX)
    expected = probs.data @ table.depths
    base = e_dist(table, probs, DepthMap(expected)).values
    for offset in (-0.7, 0.25, 2.0):
        moved = e_dist(table, probs, DepthMap(expected + offset)).values
        np.testing.assert_allclose(moved - base, offset ** 2, rtol=0, atol=1e-9)
        assert np.all(moved > base)


def test_classification_scores_ignore_class_order():
    table = make_uniform_log_table(DepthRange(1.0, 10.0), 6)
    rng = np.random.Generator(np.random.Philox(4))
    data = rng.dirichlet(np.full(6, 0.5), size=20)
    probs = ProbMap(data, ProbSemantics.SOFTMAX)
    permuted = ProbMap(data[:, ::-1], ProbSemantics.SOFTMAX)

    np.testing.assert_allclose(shannon_entropy(permuted).values, shannon_entropy(probs).values, atol=1e-12)
    np.testing.assert_array_equal(one_minus_mcp(permuted).values, one_minus_mcp(probs).values)

    # the distance score depends on which depth each probability sits on
    decoded = DepthMap(np.full(20, 3.0))
    assert not np.allclose(e_dist(table, permuted, decoded).values, e_dist(table, probs, decoded).values)


@pytest.mark.parametrize('k', [2, 5, 32])
def test_classification_score_bounds(k):
    rng = np.random.Generator(np.random.Philox(k))
    data = np.vstack([rng.dirichlet(np.full(k, alpha), size=50) for alpha in (0.1, 1.0, 10.0)])
    probs = ProbMap(data, ProbSemantics.SOFTMAX)
    entropy = shannon_entropy(probs).values
    mcp = one_minus_mcp(probs).values
    assert np.all((entropy >= 0) & (entropy <= math.log(k) + 1e-12))
    assert np.all((mcp >= 0) & (mcp <= 1 - 1 / k + 1e-12))

    uniform = ProbMap(np.full((1, k), 1 / k), ProbSemantics.SOFTMAX)
    assert shannon_entropy(uniform).values[0] == pytest.approx(math.log(k))
    assert one_minus_mcp(uniform).values[0] == pytest.approx(1 - 1 / k)


def test_e_dist_adaptive():
    table = make_adaptive_table(DepthRange(0, 80), normalize_widths(np.ones(4), eps=0))
    scores = e_dist_adaptive(table, softmax_probs([0.25] * 4), DepthMap([50.0]))
    assert scores.values[0] == pytest.approx(500)

    pair = make_adaptive_table(DepthRange(0, 40), normalize_widths([1, 1], eps=0))
    assert e_dist_adaptive(pair, softmax_probs([0.5, 0.5]), DepthMap([30.0])).values[0] == pytest.approx(100)
    assert e_dist_adaptive(pair, softmax_probs([0, 1]), DepthMap([40.0])).values[0] == 0.0


def test_e_dist_adaptive_rejects_log_table(setup_t):
    with pytest.raises(SemanticsMismatch):
        e_dist_adaptive(setup_t, softmax_probs([0.5, 0.5]), DepthMap([1.5]))


def test_e_dist_ordinal(setup_t):
    """Ordinal probabilities are gated at one half before the distance is taken.
    """
    probs = sigmoid_probs([0.9, 0.2], [0.5, 0.2])
    decoded = decode_ordinal(setup_t, probs)
    np.testing.assert_allclose(decoded.values, [math.exp(0.75)] * 2)
    scores = e_dist_ordinal(setup_t, probs, decoded)
    np.testing.assert_allclose(scores.values, [0.012840, 0.321006], atol=1e-6)


def test_e_dist_ordinal_perfect_confidence(setup_t):
    probs = sigmoid_probs([1, 0], [0, 0])
    scores = e_dist_ordinal(setup_t, probs, decode_ordinal(setup_t, probs))
    np.testing.assert_array_equal(scores.values, [0.0, 0.0])


def test_e_dist_ordinal_requires_sigmoid(setup_t):
    with pytest.raises(SemanticsMismatch):
        e_dist_ordinal(setup_t, softmax_probs([0.5, 0.5]), DepthMap([1.5]))


def test_ensemble_variance():
    """Population variance over the member maps.
    """
    same = ensemble_variance([DepthMap([1.0, 2.0]), DepthMap([1.0, 2.0])])
    np.testing.assert_array_equal(same.values, [0.0, 0.0])
    assert ensemble_variance([DepthMap([2.0]), DepthMap([4.0])]).values[0] == pytest.approx(1.0)
    assert ensemble_variance([DepthMap([1.0]), DepthMap([2.0]), DepthMap([3.0])]).values[0] == \
        pytest.approx(2 / 3)


def test_ensemble_variance_errors():
    with pytest.raises(TooFewMembers):
        ensemble_variance([DepthMap([1.0])])
    with pytest.raises(MaskMismatch):
        ensemble_variance([DepthMap([1.0, 2.0], [True, False]), DepthMap([1.0, 2.0])])


def test_uncertainty_map_dispatch(setup_t):
    probs = softmax_probs([0.5, 0.5])
    decoded = decode_soft_weighted(setup_t, probs)
    assert uncertainty_map('sentr', probs=probs).values[0] == pytest.approx(math.log(2))
    assert uncertainty_map('1-mcp', probs=probs).values[0] == pytest.approx(0.5)
    assert uncertainty_map('edist', setup_t, probs, decoded).values[0] == pytest.approx(0.176144, abs=1e-6)
    assert uncertainty_map('ensemble', members=[DepthMap([2.0]), DepthMap([4.0])]).values[0] == 1.0
    with pytest.raises(BadConfig):
        uncertainty_map('edist', probs=probs)
    with pytest.raises(BadConfig):
        uncertainty_map('sentr')
    with pytest.raises(BadConfig):
        uncertainty_map('variance', probs=probs)


def softmax_probs(*rows):
    return ProbMap(np.array(rows, dtype=np.float64), ProbSemantics.SOFTMAX)


def sigmoid_probs(*rows):
    return ProbMap(np.array(rows, dtype=np.float64), ProbSemantics.PER_CLASS_SIGMOID)


@pytest.fixture
def setup_t():
    return make_uniform_log_table(DepthRange(1.0, math.e), 2)
