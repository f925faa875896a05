import json
import math

import numpy as np
import pytest

from carkit.cli import EXIT_INVALID, EXIT_IO, EXIT_OK, format_number, main
from carkit.io import load_table, read_array, read_csv, save_table, write_array, write_json
from carkit.tables import DepthRange, make_uniform_log_table


def test_bins(tmp_path, capsys):
    out = tmp_path / 'table.json'
    assert main(['bins', '--a', '1', '--b', str(math.e ** 2), '--k', '4', '-o', str(out)]) == EXIT_OK
    np.testing.assert_allclose(load_table(out).values, [0.25, 0.75, 1.25, 1.75], atol=1e-12)
    assert 'log_centers table with 4 bins' in capsys.readouterr().out


def test_bins_default_range(tmp_path):
    """Without a range the table spans 1 mm to 80 m.
    """
    out = tmp_path / 'table.json'
    assert main(['bins', '--k', '80', '-o', str(out)]) == EXIT_OK
    table = load_table(out)
    assert (table.a, table.b, table.k) == (1e-3, 80.0, 80)


def test_bins_adaptive(tmp_path):
    widths = save(tmp_path, 'widths.npy', [1.0, 1.0, 1.0, 1.0])
    out = tmp_path / 'table.json'
    assert main(['bins', '--a', '0', '--b', '80', '--adaptive-widths', widths, '--eps', '0', '-o', str(out)]) == EXIT_OK
    np.testing.assert_allclose(load_table(out).values, [20, 40, 60, 80])


def test_bins_invalid(tmp_path, capsys):
    """Bad ranges and bin counts exit with status 1 and a prefixed message.
    """
    out = str(tmp_path / 'table.json')
    assert main(['bins', '-o', out]) == EXIT_INVALID
    assert main(['bins', '--a', '5', '--b', '1', '--k', '4', '-o', out]) == EXIT_INVALID
    assert main(['bins', '--k', '0', '-o', out]) == EXIT_INVALID
    assert 'carkit bins:' in capsys.readouterr().err


def test_encode(tmp_path, setup_t):
    gt = save(tmp_path, 'gt.npy', [math.exp(0.6), 1.0, math.e])
    out = tmp_path / 'labels.npy'
    assert main(['encode', '--table', setup_t, '--scheme', 'onehot', '--gt', gt, '-o', str(out)]) == EXIT_OK
    np.testing.assert_array_equal(read_array(out), [[0, 1], [1, 0], [0, 1]])

    assert main(['encode', '--table', setup_t, '--scheme', 'ordinal', '--strict', '--gt', gt, '-o', str(out)]) == EXIT_OK
    np.testing.assert_array_equal(read_array(out), [[1, 0], [0, 0], [1, 0]])


def test_encode_with_mask(tmp_path, setup_t):
    gt = save(tmp_path, 'gt.npy', [math.exp(0.25), 0.0])
    mask = save(tmp_path, 'mask.npy', np.array([True, False]))
    out = tmp_path / 'labels.npy'
    args = ['encode', '--table', setup_t, '--scheme', 'smooth1', '--gamma', '1', '--gt', gt, '--mask', mask]
    assert main(args + ['-o', str(out)]) == EXIT_OK
    np.testing.assert_allclose(read_array(out), [[1, 0.778801], [0, 0]], atol=1e-6)


def test_decode(tmp_path, setup_t):
    probs = save(tmp_path, 'probs.npy', [[0.5, 0.5], [0.3, 0.7]])
    out = tmp_path / 'depth.npy'
    assert main(['decode', '--table', setup_t, '--probs', probs, '--method', 'soft', '-o', str(out)]) == EXIT_OK
    np.testing.assert_allclose(read_array(out), [1.648721, math.exp(0.25 * 0.3 + 0.75 * 0.7)], atol=1e-6)

    ordinal = save(tmp_path, 'ordinal.npy', [[0.9, 0.6]])
    assert main(['decode', '--table', setup_t, '--probs', ordinal, '--method', 'ordinal', '--literal',
                 '-o', str(out)]) == EXIT_OK
    np.testing.assert_allclose(read_array(out), [3.490343], atol=1e-6)


def test_decode_rejects_bad_probabilities(tmp_path, setup_t):
    probs = save(tmp_path, 'probs.npy', [[0.5, 0.6]])
    out = str(tmp_path / 'depth.npy')
    assert main(['decode', '--table', setup_t, '--probs', probs, '--method', 'soft', '-o', out]) == EXIT_INVALID


def test_uncert(tmp_path, setup_t):
    probs = save(tmp_path, 'probs.npy', [[0.5, 0.5]])
    depth = save(tmp_path, 'depth.npy', [math.exp(0.5)])
    out = tmp_path / 'uncert.npy'
    args = ['uncert', '--table', setup_t, '--probs', probs, '--depth', depth, '--method', 'edist']
    assert main(args + ['--decoder', 'soft', '-o', str(out)]) == EXIT_OK
    np.testing.assert_allclose(read_array(out), [0.176144], atol=1e-6)


def test_uncert_ordinal_and_ensemble(tmp_path, setup_t):
    probs = save(tmp_path, 'probs.npy', [[0.9, 0.2]])
    depth = save(tmp_path, 'depth.npy', [math.exp(0.75)])
    out = tmp_path / 'uncert.npy'
    args = ['uncert', '--table', setup_t, '--probs', probs, '--depth', depth, '--method', 'edist-ordinal']
    assert main(args + ['-o', str(out)]) == EXIT_OK
    np.testing.assert_allclose(read_array(out), [0.012840], atol=1e-6)

    members = [save(tmp_path, f'm{i}.npy', [value]) for i, value in enumerate((1.0, 2.0, 3.0))]
    assert main(['uncert', '--method', 'ensemble', '--members', *members, '-o', str(out)]) == EXIT_OK
    np.testing.assert_allclose(read_array(out), [2 / 3])


def test_uncert_incompatible_decoder(tmp_path, setup_t, capsys):
    probs = save(tmp_path, 'probs.npy', [[0.5, 0.5]])
    depth = save(tmp_path, 'depth.npy', [1.5])
    args = ['uncert', '--table', setup_t, '--probs', probs, '--depth', depth, '--method', 'edist-ordinal',
            '--decoder', 'soft', '-o', str(tmp_path / 'u.npy')]
    assert main(args) == EXIT_INVALID
    assert 'does not apply' in capsys.readouterr().err


def test_eval_perfect(tmp_path, capsys):
    """Numbers print with six decimals in CSV header order.
    """
    depth = save(tmp_path, 'depth.npy', [1.0, 2.0, 30.0])
    assert main(['eval', '--pred', depth, '--gt', depth]) == EXIT_OK
    header, row = capsys.readouterr().out.splitlines()
    assert header == 'rmse,abs_rel,sq_rel,rmse_log,log10,delta1,delta2,delta3,n_valid'
    assert row == ','.join(['0.000000'] * 5 + ['1.000000'] * 3 + ['3'])


def test_eval_json_and_file(tmp_path, capsys):
    pred = save(tmp_path, 'pred.npy', [1.0, 4.8])
    gt = save(tmp_path, 'gt.npy', [2.0, 4.0])
    out = tmp_path / 'metrics.json'
    assert main(['eval', '--pred', pred, '--gt', gt, '--json', '-o', str(out)]) == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed['rmse'] == 0.905539
    assert printed['n_valid'] == 2
    assert json.loads(out.read_text())['abs_rel'] == pytest.approx(0.35, abs=1e-15)


def test_eval_errors(tmp_path, capsys):
    """Mismatched maps are invalid input, unreadable files are file errors.
    """
    pred = save(tmp_path, 'pred.npy', [1.0, 2.0, 3.0])
    gt = save(tmp_path, 'gt.npy', [1.0, 2.0])
    assert main(['eval', '--pred', pred, '--gt', gt]) == EXIT_INVALID

    (tmp_path / 'zip.npy').write_bytes(b'PK\x03\x04' + b'\x00' * 60)
    assert main(['eval', '--pred', str(tmp_path / 'zip.npy'), '--gt', gt]) == EXIT_IO
    assert main(['eval', '--pred', str(tmp_path / 'missing.npy'), '--gt', gt]) == EXIT_IO
    assert 'not a .npy file' in capsys.readouterr().err


def test_sparsify_ause(tmp_path, capsys, four_pixels):
    """Four pixels ranked against their errors reproduce the worked AUSE value.
    """
    assert main(['sparsify', *four_pixels, '--step', '0.25', '--ause']) == EXIT_OK
    assert capsys.readouterr().out == '1.475819\n'


def test_sparsify_curves(tmp_path, four_pixels):
    out = tmp_path / 'curve.csv'
    assert main(['sparsify', *four_pixels, '--step', '0.25', '--curve', 'oracle', '-o', str(out)]) == EXIT_OK
    header, rows = read_csv(out)
    assert header == ['fraction', 'value']
    np.testing.assert_allclose([float(value) for _, value in rows], [2.738613, 2.160247, 1.581139, 1.0], atol=1e-6)

    assert main(['sparsify', *four_pixels, '--step', '0.25', '--curve', 'error', '-o', str(out)]) == EXIT_OK
    _, rows = read_csv(out)
    np.testing.assert_allclose([float(value) for _, value in rows], [0, 0.948879, 1.954395, 3.0], atol=1e-6)


def test_sparsify_invalid_step(four_pixels):
    assert main(['sparsify', *four_pixels, '--step', '0.75', '--ause']) == EXIT_INVALID


def test_gradcheck(capsys):
    assert main(['gradcheck', '--loss', 'ce', '--points', '5']) == EXIT_OK
    name, error, verdict = capsys.readouterr().out.split()
    assert (name, verdict) == ('ce', 'ok')
    assert float(error) <= 1e-5


def test_gradcheck_reports_failures(monkeypatch, capsys):
    """Every loss is checked with 100 points and seed 0 by default.
    """
    calls = []

    def always_fails(kind, n_points, seed):
        calls.append((kind, n_points, seed))
        return 1.0

    monkeypatch.setattr('carkit.cli.random_gradcheck', always_fails)
    assert main(['gradcheck']) == EXIT_INVALID
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == len(calls) == 6
    assert all(line.endswith('FAIL') for line in lines)
    assert all(call[1:] == (100, 0) for call in calls)


def test_synth(tmp_path, capsys):
    """A report can be fed back in as its own configuration and reproduces byte for byte.
    """
    config = tmp_path / 'config.json'
    write_json(config, {'scene': {'width': 8, 'height': 8}, 'strategies': ['li-onehot-ce', 'dorn-ordinal'],
                        'seeds': [0], 'k': 8, 'epochs': 5})
    report = tmp_path / 'report.json'
    assert main(['synth', '--config', str(config), '-o', str(report)]) == EXIT_OK
    doc = json.loads(report.read_text())
    assert [cell['strategy'] for cell in doc['cells']] == ['li-onehot-ce', 'dorn-ordinal']
    assert (tmp_path / 'traces' / 'dorn-ordinal_seed0.csv').exists()
    assert 'li-onehot-ce: failed 0/1' in capsys.readouterr().out

    rerun = tmp_path / 'rerun.json'
    assert main(['synth', '--config', str(report), '--n-jobs', '1', '-o', str(rerun)]) == EXIT_OK
    assert rerun.read_text() == report.read_text()


def test_synth_bad_config(tmp_path):
    config = tmp_path / 'config.json'
    write_json(config, {'strategies': ['li-onehot-ce'], 'epochs': -1})
    assert main(['synth', '--config', str(config), '-o', str(tmp_path / 'report.json')]) == EXIT_INVALID
    config.write_text('{not json')
    assert main(['synth', '--config', str(config), '-o', str(tmp_path / 'report.json')]) == EXIT_IO


def test_undecodable_json(tmp_path, capsys):
    """A table or config that is not UTF-8 is a file error, not a crash.
    """
    table = tmp_path / 'table.json'
    table.write_bytes(b'\xff\xfe')
    probs = save(tmp_path, 'probs.npy', [[0.5, 0.5]])
    args = ['decode', '--table', str(table), '--probs', probs, '--method', 'soft', '-o', str(tmp_path / 'd.npy')]
    assert main(args) == EXIT_IO
    err = capsys.readouterr().err
    assert err.startswith('carkit decode:')
    assert len(err.splitlines()) == 1
    assert main(['synth', '--config', str(table), '-o', str(tmp_path / 'report.json')]) == EXIT_IO


def test_usage_errors(tmp_path):
    """Argument errors exit with status 1 rather than argparse's 2.
    """
    with pytest.raises(SystemExit) as e:
        main(['bins'])
    assert e.value.code == EXIT_INVALID
    with pytest.raises(SystemExit) as e:
        main(['encode', '--table', 't', '--scheme', 'smooth9', '--gt', 'g', '-o', 'o'])
    assert e.value.code == EXIT_INVALID
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == EXIT_INVALID


def test_format_number():
    assert format_number(1.4758186318522165) == '1.475819'
    assert format_number(0) == '0.000000'
    assert format_number(4.54e-5) == '4.540000e-05'
    assert format_number(2.5e10) == '2.500000e+10'


def save(tmp_path, name, values):
    path = tmp_path / name
    write_array(path, np.asarray(values))
    return str(path)


@pytest.fixture
def setup_t(tmp_path):
    path = tmp_path / 'setup_t.json'
    save_table(path, make_uniform_log_table(DepthRange(1.0, math.e), 2))
    return str(path)


@pytest.fixture
def four_pixels(tmp_path):
    pred = save(tmp_path, 'pred.npy', [14.0, 13.0, 12.0, 11.0])
    gt = save(tmp_path, 'gt.npy', [10.0] * 4)
    uncert = save(tmp_path, 'uncert.npy', [1.0, 2.0, 3.0, 4.0])
    return ['--pred', pred, '--gt', gt, '--uncert', uncert]
