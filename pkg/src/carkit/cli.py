"""Command-line surface: one subcommand per pipeline stage.

Data goes to files (``.npy``, JSON, CSV); standard output carries short
human summaries and standard error carries log records and error
messages. Exit status is 0 on success, 1 for invalid input or usage and
2 for unreadable or malformed files.
"""
import argparse
import json
import logging
import os
import sys
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from carkit._version import __version__
from carkit.decode import DecodeMethod, decode
from carkit.encode import encode_labels
from carkit.exceptions import ArrayFormatError, BadConfig, CarkitError
from carkit.io import dumps_json, load_table, read_array, read_json, save_table, write_array, write_csv, write_json
from carkit.losses import GRADCHECK_TOLERANCE, LossKind, random_gradcheck
from carkit.maps import (
    DepthMap,
    GroundTruthDepth,
    LabelKind,
    ProbMap,
    ProbSemantics,
    UncertaintyMap,
    UncertaintyMethod,
)
from carkit.metrics import (
    CSV_HEADER,
    DEFAULT_STEP,
    MetricKind,
    ause,
    depth_metrics,
    oracle_ranking,
    sparsification_curve,
)
from carkit.synth.benchmark import run_benchmark
from carkit.synth.config import BenchmarkConfig, parse_config
from carkit.tables import (
    DEFAULT_MAX_DEPTH,
    DEFAULT_MIN_DEPTH,
    DEFAULT_WIDTH_EPS,
    DepthRange,
    IndexMode,
    make_adaptive_table,
    make_uniform_log_table,
    normalize_widths,
)
from carkit.uncertainty import uncertainty_map


_LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2

# decoder -> uncertainty methods that may score its output
_COMPATIBLE_METHODS = {
    DecodeMethod.SOFT_WEIGHTED: (UncertaintyMethod.SENTR, UncertaintyMethod.ONE_MINUS_MCP,
                                 UncertaintyMethod.EDIST, UncertaintyMethod.ENSEMBLE_VARIANCE),
    DecodeMethod.ARGMAX: (UncertaintyMethod.SENTR, UncertaintyMethod.ONE_MINUS_MCP,
                          UncertaintyMethod.EDIST, UncertaintyMethod.ENSEMBLE_VARIANCE),
    DecodeMethod.ORDINAL: (UncertaintyMethod.EDIST_ORDINAL, UncertaintyMethod.ENSEMBLE_VARIANCE),
    DecodeMethod.ADAPTIVE: (UncertaintyMethod.SENTR, UncertaintyMethod.ONE_MINUS_MCP,
                            UncertaintyMethod.EDIST_ADAPTIVE, UncertaintyMethod.ENSEMBLE_VARIANCE),
}


class RunConfig(BaseModel):
    """Settings of one CLI invocation, checked before anything is computed.

    Only the fields a subcommand uses are set; the rest stay None.
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    command: str
    a: Optional[float] = Field(None, ge=0)
    b: Optional[float] = None
    k: Optional[int] = Field(None, ge=1)
    eps: Optional[float] = Field(None, ge=0)
    scheme: Optional[LabelKind] = None
    gamma: Optional[float] = Field(None, gt=0)
    loss: Optional[LossKind] = None
    decoder: Optional[DecodeMethod] = None
    method: Optional[UncertaintyMethod] = None
    metric: Optional[MetricKind] = None
    step: Optional[float] = Field(None, gt=0, le=0.5)
    seed: int = 0
    points: Optional[int] = Field(None, ge=1)
    strict: bool = False
    literal: bool = False
    index_mode: IndexMode = IndexMode.ROUND

    @model_validator(mode='after')
    def _check_consistency(self):
        if self.a is not None and self.b is not None and not self.a < self.b:
            raise ValueError(f'--a must be below --b, got {self.a} and {self.b}')
        if self.scheme is LabelKind.ORDINAL and self.decoder not in (None, DecodeMethod.ORDINAL):
            raise ValueError(f'ordinal labels pair with the ordinal decoder, not {self.decoder.value}')
        if self.decoder is not None and self.method is not None:
            if self.method not in _COMPATIBLE_METHODS[self.decoder]:
                raise ValueError(f'{self.method.value} does not apply to {self.decoder.value} decoding')
        return self


class _Parser(argparse.ArgumentParser):
    """Argument parser that exits with the invalid-input status on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f'{self.prog}: error: {message}\n')


def format_number(value) -> str:
    """Six decimals, switching to scientific notation for tiny or huge magnitudes."""
    value = float(value)
    if value != 0 and not 1e-4 <= abs(value) < 1e9:
        return f'{value:.6e}'
    return f'{value:.6f}'


def _run_config(args, **fields) -> RunConfig:
    return parse_config(RunConfig, {'command': args.command, **fields})


def _read_mask(path, n: int):
    if path is None:
        return None
    mask = read_array(path)
    if mask.dtype != np.bool_:
        raise BadConfig(f'{path}: mask must be a bool array, got {mask.dtype.str}')
    if mask.size != n:
        raise BadConfig(f'{path}: mask has {mask.size} entries for {n} pixels')
    return mask.ravel()


def _read_probs(path, semantics: ProbSemantics) -> ProbMap:
    data = read_array(path)
    if data.ndim != 2:
        raise BadConfig(f'{path}: probabilities must be an N x K array')
    return ProbMap(data, semantics)


def _semantics_for_decoder(decoder: DecodeMethod) -> ProbSemantics:
    return ProbSemantics.PER_CLASS_SIGMOID if decoder is DecodeMethod.ORDINAL else ProbSemantics.SOFTMAX


def _semantics_for_method(method: UncertaintyMethod) -> ProbSemantics:
    if method is UncertaintyMethod.EDIST_ORDINAL:
        return ProbSemantics.PER_CLASS_SIGMOID
    return ProbSemantics.SOFTMAX


#################### Subcommands ####################
def cmd_bins(args) -> int:
    config = _run_config(args, a=args.a, b=args.b, k=args.k, eps=args.eps)
    depth_range = DepthRange(config.a, config.b)
    if args.adaptive_widths:
        widths = normalize_widths(read_array(args.adaptive_widths), eps=config.eps)
        table = make_adaptive_table(depth_range, widths)
    elif config.k is None:
        raise BadConfig('bins needs --k or --adaptive-widths')
    else:
        table = make_uniform_log_table(depth_range, config.k)
    save_table(args.output, table)
    print(f'{table.space.value} table with {table.k} bins over [{format_number(table.a)}, '
          f'{format_number(table.b)}] -> {args.output}')
    return EXIT_OK


def cmd_encode(args) -> int:
    config = _run_config(args, scheme=args.scheme, gamma=args.gamma, strict=args.strict, index_mode=args.index_mode)
    table = load_table(args.table)
    values = read_array(args.gt)
    gt = GroundTruthDepth(values, _read_mask(args.mask, values.size))
    labels = encode_labels(gt, table, config.scheme, gamma=config.gamma, strict=config.strict,
                           index_mode=config.index_mode)
    write_array(args.output, labels.data)
    print(f'encoded {gt.n_valid} of {gt.n} pixels as {labels.kind.value} -> {args.output}')
    return EXIT_OK


def cmd_decode(args) -> int:
    config = _run_config(args, decoder=args.method, literal=args.literal)
    table = load_table(args.table)
    probs = _read_probs(args.probs, _semantics_for_decoder(config.decoder))
    depth = decode(config.decoder, table, probs, _read_mask(args.mask, probs.n), literal=config.literal)
    write_array(args.output, depth.values)
    print(f'decoded {depth.n} pixels with {config.decoder.value} -> {args.output}')
    return EXIT_OK


def cmd_uncert(args) -> int:
    config = _run_config(args, method=args.method, decoder=args.decoder, strict=not args.literal)
    members = [DepthMap(read_array(path)) for path in args.members]
    if config.method is UncertaintyMethod.ENSEMBLE_VARIANCE:
        result = uncertainty_map(config.method, members=members)
    else:
        if args.probs is None or args.depth is None or args.table is None:
            raise BadConfig(f'{config.method.value} needs --table, --probs and --depth')
        table = load_table(args.table)
        probs = _read_probs(args.probs, _semantics_for_method(config.method))
        decoded = DepthMap(read_array(args.depth))
        result = uncertainty_map(config.method, table=table, probs=probs, decoded=decoded, strict=config.strict)
    write_array(args.output, result.values)
    print(f'{result.method.value} uncertainty for {result.n} pixels -> {args.output}')
    return EXIT_OK


def _load_pair(args):
    gt_values = read_array(args.gt)
    mask = _read_mask(args.mask, gt_values.size)
    return DepthMap(read_array(args.pred), mask), GroundTruthDepth(gt_values, mask)


def cmd_eval(args) -> int:
    _run_config(args)
    pred, gt = _load_pair(args)
    metrics = depth_metrics(pred, gt)
    if args.json:
        print(dumps_json({k: (v if isinstance(v, int) else float(format_number(v)))
                          for k, v in metrics.to_dict().items()}), end='')
    else:
        print(','.join(CSV_HEADER))
        print(','.join(str(metrics.n_valid) if name == 'n_valid' else format_number(getattr(metrics, name))
                       for name in CSV_HEADER))
    if args.output:
        if args.json:
            write_json(args.output, metrics.to_dict())
        else:
            with open(args.output, 'w', encoding='utf-8') as fp:
                fp.write(','.join(CSV_HEADER) + '\n' + metrics.to_csv_row() + '\n')
    return EXIT_OK


def cmd_sparsify(args) -> int:
    config = _run_config(args, metric=args.metric, step=args.step)
    pred, gt = _load_pair(args)
    uncert = UncertaintyMap(read_array(args.uncert))
    if uncert.n != gt.n:
        raise BadConfig(f'Uncertainty has {uncert.n} pixels, ground truth has {gt.n}')
    errors = oracle_ranking(pred, gt, config.metric)
    ranked = sparsification_curve(errors, uncert.values[gt.mask], config.metric, config.step)
    if args.output:
        if args.curve == 'uncert':
            values = ranked.metric_values
        else:
            oracle = sparsification_curve(errors, errors, config.metric, config.step)
            values = oracle.metric_values if args.curve == 'oracle' else ranked.metric_values - oracle.metric_values
        write_csv(args.output, ('fraction', 'value'), zip(ranked.fractions.tolist(), values.tolist()))
        print(f'{args.curve} curve with {ranked.fractions.size} fractions -> {args.output}')
    if args.ause:
        print(format_number(ause(pred, gt, uncert, config.metric, config.step)))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    config = _run_config(args, loss=None if args.loss == 'all' else args.loss, seed=args.seed, points=args.points)
    kinds = list(LossKind) if config.loss is None else [config.loss]
    status = EXIT_OK
    for kind in kinds:
        worst = random_gradcheck(kind, n_points=config.points, seed=config.seed)
        passed = worst <= GRADCHECK_TOLERANCE[kind]
        print(f'{kind.value} {format_number(worst)} {"ok" if passed else "FAIL"}')
        if not passed:
            status = EXIT_INVALID
    return status


def _benchmark_config(path) -> BenchmarkConfig:
    if path is None:
        return BenchmarkConfig()
    doc = read_json(path)
    # a report embeds its resolved config, so reports can be re-run directly
    if isinstance(doc, dict) and 'cells' in doc and 'config' in doc:
        doc = doc['config']
    return parse_config(BenchmarkConfig, doc)


def cmd_synth(args) -> int:
    _run_config(args)
    config = _benchmark_config(args.config)
    if args.n_jobs is not None:
        config = config.model_copy(update={'n_jobs': args.n_jobs})
    out_dir = os.path.dirname(os.path.abspath(args.output))
    report = run_benchmark(config, out_dir=out_dir)
    with open(args.output, 'w', encoding='utf-8') as fp:
        fp.write(report.to_json())
    for name, entry in report.summary.items():
        columns = ' '.join(f'{method}={format_number(cols["rmse"]["mean"])}'
                           for method, cols in entry['ause'].items())
        print(f'{name}: failed {entry["n_failed"]}/{entry["n_cells"]} ause_rmse {columns}')
    return EXIT_OK


#################### Parser ####################
def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='carkit', description='Classification-based depth estimation toolkit.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('-v', '--verbose', action='store_true', help='log at DEBUG level')
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    bins = commands.add_parser('bins', help='build a depth table')
    bins.add_argument('--a', type=float, default=DEFAULT_MIN_DEPTH, help='minimum depth (default %(default)s)')
    bins.add_argument('--b', type=float, default=DEFAULT_MAX_DEPTH, help='maximum depth (default %(default)s)')
    bins.add_argument('--k', type=int, help='number of bins of a log table')
    bins.add_argument('--adaptive-widths', metavar='FILE', help='raw widths (.npy) for an adaptive table')
    bins.add_argument('--eps', type=float, default=DEFAULT_WIDTH_EPS, help='width floor of an adaptive table')
    bins.add_argument('-o', '--output', required=True, help='table JSON')
    bins.set_defaults(handler=cmd_bins)

    encode = commands.add_parser('encode', help='encode ground truth as classification targets')
    encode.add_argument('--table', required=True)
    encode.add_argument('--scheme', required=True, choices=[x.value for x in LabelKind])
    encode.add_argument('--gamma', type=float)
    encode.add_argument('--gt', required=True)
    encode.add_argument('--mask')
    encode.add_argument('--strict', action='store_true', help='ordinal prefix p < k')
    encode.add_argument('--index-mode', default=IndexMode.ROUND.value, choices=[x.value for x in IndexMode])
    encode.add_argument('-o', '--output', required=True)
    encode.set_defaults(handler=cmd_encode)

    decode_ = commands.add_parser('decode', help='decode probabilities into depth')
    decode_.add_argument('--table', required=True)
    decode_.add_argument('--probs', required=True)
    decode_.add_argument('--method', required=True, choices=[x.value for x in DecodeMethod])
    decode_.add_argument('--mask')
    decode_.add_argument('--literal', action='store_true', help='do not clamp the ordinal count')
    decode_.add_argument('-o', '--output', required=True)
    decode_.set_defaults(handler=cmd_decode)

    uncert = commands.add_parser('uncert', help='compute an uncertainty map')
    uncert.add_argument('--table')
    uncert.add_argument('--probs')
    uncert.add_argument('--depth', help='decoded depth (.npy)')
    uncert.add_argument('--method', required=True, choices=[x.value for x in UncertaintyMethod])
    uncert.add_argument('--decoder', choices=[x.value for x in DecodeMethod],
                        help='decoder that produced --depth, checked against --method')
    uncert.add_argument('--members', nargs='*', default=[], help='ensemble depth maps')
    uncert.add_argument('--literal', action='store_true', help='ordinal re-encoding with p <= c')
    uncert.add_argument('-o', '--output', required=True)
    uncert.set_defaults(handler=cmd_uncert)

    eval_ = commands.add_parser('eval', help='depth accuracy metrics')
    eval_.add_argument('--pred', required=True)
    eval_.add_argument('--gt', required=True)
    eval_.add_argument('--mask')
    output_format = eval_.add_mutually_exclusive_group()
    output_format.add_argument('--csv', action='store_true', help='CSV output (default)')
    output_format.add_argument('--json', action='store_true', help='JSON output')
    eval_.add_argument('-o', '--output', help='full-precision metrics file')
    eval_.set_defaults(handler=cmd_eval)

    sparsify = commands.add_parser('sparsify', help='sparsification curves and AUSE')
    sparsify.add_argument('--pred', required=True)
    sparsify.add_argument('--gt', required=True)
    sparsify.add_argument('--mask')
    sparsify.add_argument('--uncert', required=True)
    sparsify.add_argument('--metric', default=MetricKind.RMSE.value, choices=[x.value for x in MetricKind])
    sparsify.add_argument('--step', type=float, default=DEFAULT_STEP)
    sparsify.add_argument('--curve', default='uncert', choices=['uncert', 'oracle', 'error'])
    sparsify.add_argument('--ause', action='store_true', help='print the AUSE')
    sparsify.add_argument('-o', '--output', help='curve CSV')
    sparsify.set_defaults(handler=cmd_sparsify)

    gradcheck = commands.add_parser('gradcheck', help='finite-difference check of the loss gradients')
    gradcheck.add_argument('--loss', default='all', choices=['all'] + [x.value for x in LossKind])
    gradcheck.add_argument('--points', type=int, default=100)
    gradcheck.add_argument('--seed', type=int, default=0)
    gradcheck.set_defaults(handler=cmd_gradcheck)

    synth = commands.add_parser('synth', help='run the synthetic strategy benchmark')
    synth.add_argument('--config', help='benchmark config or previous report (JSON)')
    synth.add_argument('--n-jobs', type=int)
    synth.add_argument('-o', '--output', required=True, help='report JSON')
    synth.set_defaults(handler=cmd_synth)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point of the ``carkit`` command.

    Returns:
        The process exit status.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except (ArrayFormatError, json.JSONDecodeError, UnicodeDecodeError) as e:
        print(f'carkit {args.command}: {e}', file=sys.stderr)
        return EXIT_IO
    except CarkitError as e:
        print(f'carkit {args.command}: {e}', file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f'carkit {args.command}: {e}', file=sys.stderr)
        return EXIT_IO
