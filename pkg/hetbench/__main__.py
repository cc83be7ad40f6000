'''
Command line interface: ``hetbench stat|measure|run|report``.

Exit codes: 0 on success, 1 if a measured child failed, 2 for usage,
configuration and scan errors. Logs go to stderr, results to stdout.
'''
from argparse import ArgumentParser, REMAINDER
from pathlib import Path
import logging
import subprocess
import sys

from . import __version__
from .codestat import compute_effort, scan_tree, stats_table
from .config import load_config
from .exceptions import EmptyComparison, HetbenchError, WrongValue
from .harness import read_manifest, run_suite, summarize
from .metering import MeasurementSession
from .report import (
    EffortMatrix,
    TEXT_FORMAT,
    compare_matrices,
    default_comparisons,
    deviations_table,
    effort_ratio,
    effort_table,
    load_published_effort,
    matrix_from_stats,
    perf_energy_table,
    ratios_table,
    regenerate_rodinia,
)
from .utils import dump_json, setup_logging


log = logging.getLogger('hetbench')

EXIT_OK = 0
EXIT_CHILD_FAILED = 1
EXIT_USAGE = 2
SUMMARY_NAME = 'summary.json'
DEFAULT_RUN_DIR = 'hetbench-results'


def _emit(rendered, args):
    if args.json:
        print(rendered.json)
    elif args.csv:
        sys.stdout.write(rendered.csv)
    else:
        sys.stdout.write(rendered.text)


def _child_exit_status(returncode):
    # killed by a signal: report it the way a shell does
    if returncode < 0:
        return 128 - returncode
    return returncode


def cmd_stat(args, config):
    config = config.override(profiles=args.profiles).validate_paths()
    profiles = config.load_profiles()

    root = Path(args.root)
    if not root.is_dir():
        print(f'hetbench stat: {root} is not a directory', file=sys.stderr)
        return EXIT_USAGE

    stats = scan_tree(
        root, profiles,
        include_globs=args.include, exclude_globs=args.exclude,
        workers=args.workers, onerror='log',
    )
    effort = compute_effort(stats)

    if args.json:
        dump_json(stats.to_dict(effort), sys.stdout)
    else:
        stats_table(stats, effort).write(sys.stdout, format=TEXT_FORMAT)

    if effort.degenerate:
        print(f'hetbench stat: no lines of code found below {root}', file=sys.stderr)
    if stats.errors:
        for path, msg in stats.errors:
            print(f'hetbench stat: {path}: {msg}', file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def cmd_measure(args, config):
    command = list(args.command)
    if command and command[0] == '--':
        command = command[1:]
    if not command:
        print('hetbench measure: no command given', file=sys.stderr)
        return EXIT_USAGE

    config = config.override(
        replay_trace=args.replay,
        power_cmd=args.power_cmd,
        interval_s=args.interval,
        out_dir=args.out,
    ).validate_paths()

    session = MeasurementSession(config.backends())
    with session:
        try:
            proc = subprocess.run(command, stdout=subprocess.PIPE)
        except OSError as e:
            log.error('Cannot execute %s: %s', command[0], e)
            proc = None

    if proc is None:
        return EXIT_USAGE

    # child stdout must not mix with the JSON result
    sys.stderr.write(proc.stdout.decode('utf-8', errors='replace'))

    measurement = session.get_value()
    doc = measurement.to_dict()
    doc['exit_status'] = proc.returncode
    if config.out_dir is not None:
        doc['power_log_paths'] = session.write_logs(config.out_dir, 'measure')
    dump_json(doc, sys.stdout)
    return _child_exit_status(proc.returncode)


def cmd_run(args, config):
    config = config.override(
        replay_trace=args.replay,
        power_cmd=args.power_cmd,
        interval_s=args.interval,
        out_dir=args.out,
    )
    if config.out_dir is None:
        config = config.override(out_dir=DEFAULT_RUN_DIR)
    config = config.validate_paths()
    records = run_suite(
        args.suite, config.backends(),
        out_dir=config.out_dir, repetitions=args.reps,
    )
    summary = summarize(records)

    with open(Path(config.out_dir) / SUMMARY_NAME, 'w', encoding='utf-8') as f:
        dump_json(summary.to_dict(), f)

    if args.json:
        dump_json(
            {'records': [r.to_dict() for r in records], 'summary': summary.to_dict()},
            sys.stdout,
        )
    else:
        _emit(perf_energy_table(summary).rows, args)

    if not records or any(r.failed for r in records):
        return EXIT_CHILD_FAILED
    return EXIT_OK


def _load_matrix(args):
    if args.stats:
        return matrix_from_stats(args.stats)
    if args.matrix:
        return EffortMatrix.load(args.matrix)
    return load_published_effort()


def report_effort(args, config):
    _emit(effort_table(_load_matrix(args)), args)
    return EXIT_OK


def report_ratios(args, config):
    matrix = _load_matrix(args)
    if args.a or args.b:
        if not (args.a and args.b):
            print('hetbench report ratios: --a and --b go together', file=sys.stderr)
            return EXIT_USAGE
        summaries = [effort_ratio(matrix, args.a, args.b, exclude=args.exclude)]
    else:
        summaries = []
        for a, b, exclude in default_comparisons():
            try:
                summaries.append(effort_ratio(matrix, a, b, exclude=exclude))
            except (WrongValue, EmptyComparison) as e:
                log.warning('Skipping %s / %s: %s', a, b, e)
        if not summaries:
            raise EmptyComparison('None of the default comparisons applies to this matrix')

    _emit(ratios_table(summaries), args)
    return EXIT_OK


def report_perf(args, config):
    records = [r for path in args.manifests for r in read_manifest(path)]
    tables = perf_energy_table(summarize(records))
    if args.long:
        sys.stdout.write(tables.long_csv)
    else:
        _emit(tables.rows, args)
    return EXIT_OK


def report_rodinia(args, config):
    config = config.override(profiles=args.profiles).validate_paths()
    reference = EffortMatrix.load(args.matrix) if args.matrix else load_published_effort()
    regenerated = regenerate_rodinia(args.rodinia, config.load_profiles())
    deviations = compare_matrices(reference, regenerated, tolerance=args.tolerance)
    _emit(deviations_table(deviations), args)

    outside = [d for d in deviations if not d.within]
    for d in outside:
        log.warning(
            '%s %s: %.2f vs published %.2f', d.application, d.column, d.actual, d.expected,
        )
    log.info('%d of %d cells within %.2f points', len(deviations) - len(outside),
             len(deviations), args.tolerance)
    return EXIT_OK


def build_parser():
    parser = ArgumentParser(
        prog='hetbench',
        description='Programming effort, time and energy of parallel benchmark implementations',
    )
    parser.add_argument('--version', action='version', version=__version__)
    parser.add_argument(
        '-v', '--verbose', action='count', default=0,
        help='more log output on stderr, repeat for debug output',
    )
    parser.add_argument('--config', help='JSON config file, default $HETBENCH_CONFIG')

    output = ArgumentParser(add_help=False)
    fmt = output.add_mutually_exclusive_group()
    fmt.add_argument('--json', action='store_true', help='JSON on stdout')
    fmt.add_argument('--csv', action='store_true', help='CSV on stdout')

    metering = ArgumentParser(add_help=False)
    metering.add_argument('--replay', help='replay this power trace CSV')
    metering.add_argument('--power-cmd', help='command printing the current power in watts')
    metering.add_argument('--interval', type=float, help='power sampling interval in seconds')

    subparsers = parser.add_subparsers(dest='command_name', metavar='COMMAND')
    subparsers.required = True

    stat = subparsers.add_parser('stat', parents=[output], help='count parallelization effort')
    stat.add_argument('root', help='source tree to scan')
    stat.add_argument('--profiles', help='profile config JSON, default built-in profiles')
    stat.add_argument('--include', action='append', default=[], metavar='GLOB')
    stat.add_argument('--exclude', action='append', default=[], metavar='GLOB')
    stat.add_argument('--workers', type=int, default=1)
    stat.set_defaults(func=cmd_stat)

    measure = subparsers.add_parser(
        'measure', parents=[metering], help='measure time and energy of a command',
    )
    measure.add_argument('--out', help='directory for the power logs')
    measure.add_argument('command', nargs=REMAINDER, help='-- command [args...]')
    measure.set_defaults(func=cmd_measure)

    run = subparsers.add_parser(
        'run', parents=[output, metering], help='run a benchmark suite',
    )
    run.add_argument('--suite', required=True, help='suite config JSON')
    run.add_argument('--reps', type=int, help='override the repetitions of every benchmark')
    run.add_argument(
        '--out',
        help=f'directory for records, summary and power logs, default ./{DEFAULT_RUN_DIR}',
    )
    run.set_defaults(func=cmd_run)

    report = subparsers.add_parser('report', help='effort, ratio and performance tables')
    kinds = report.add_subparsers(dest='kind', metavar='KIND')
    kinds.required = True

    matrix = ArgumentParser(add_help=False)
    matrix.add_argument('--matrix', help='effort matrix JSON, default the published table')
    matrix.add_argument(
        '--stats', nargs=3, action='append', metavar=('APP', 'COLUMN', 'PATH'),
        help='build the matrix from `stat --json` outputs instead',
    )

    effort = kinds.add_parser('effort', parents=[output, matrix])
    effort.set_defaults(func=report_effort)

    ratios = kinds.add_parser('ratios', parents=[output, matrix])
    ratios.add_argument('--a', help='numerator column, e.g. Rodinia-OpenCL')
    ratios.add_argument('--b', help='denominator column, e.g. Rodinia-CUDA')
    ratios.add_argument('--exclude', action='append', default=[], metavar='APP')
    ratios.set_defaults(func=report_ratios)

    perf = kinds.add_parser('perf', parents=[output])
    perf.add_argument('manifests', nargs='+', help='records.jsonl files of runs')
    perf.add_argument('--long', action='store_true', help='long-format CSV for plotting')
    perf.set_defaults(func=report_perf)

    rodinia = kinds.add_parser('rodinia', parents=[output])
    rodinia.add_argument('--rodinia', required=True, help='Rodinia checkout')
    rodinia.add_argument('--matrix', help='reference matrix, default the published table')
    rodinia.add_argument('--profiles', help='profile config JSON')
    rodinia.add_argument('--tolerance', type=float, default=2.0)
    rodinia.set_defaults(func=report_rodinia)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code

    try:
        config = load_config(args.config)
    except (HetbenchError, OSError) as e:
        setup_logging(args.verbose)
        log.error('%s', e)
        return EXIT_USAGE

    setup_logging(max(args.verbose, config.verbosity))
    try:
        return args.func(args, config)
    except (HetbenchError, OSError) as e:
        log.error('%s', e)
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
