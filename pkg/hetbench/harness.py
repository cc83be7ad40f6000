'''
Benchmark execution wrapped in measurement sessions.

For every repetition a fresh session is started, the benchmark command
is executed synchronously and the session is stopped, so the measured
region spans the child process from spawn to exit. Builds and warmup
runs happen outside of any session.
'''
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
import json
import logging
import os
import shlex
import subprocess

import numpy as np

from .backends import detect_environment
from .exceptions import (
    BuildFailed, HetbenchError, StartFailed, ValidationError, WrongValue,
)
from .metering import MeasurementSession
from .schema import Schema, Field
from .utils import read_json


log = logging.getLogger(__name__)

DEFAULT_REPETITIONS = 5
MANIFEST_NAME = 'records.jsonl'


def as_command(cmd, args=()):
    '''A command given as string (shell-split) or list, plus extra args'''
    if cmd is None:
        return None
    if isinstance(cmd, str):
        cmd = shlex.split(cmd)
    return tuple(cmd) + tuple(args)


@dataclass(frozen=True)
class BenchmarkSpec:
    '''
    One benchmark implementation: an application in one framework

    Attributes
    ----------
    name: str
        application name, e.g. ``"BFS"``
    framework: str
        framework label, e.g. ``"OpenMP"``
    run_cmd: tuple of str
        the measured command
    workdir: str
        working directory of build and run
    build_cmd: tuple of str or None
        unmeasured build step, run once before anything else
    env: dict
        overrides of the inherited environment
    repetitions: int
        number of measured runs
    timeout_s: float or None
        a run exceeding this is killed and counted as failed
    warmup_runs: int
        unmeasured runs before the first repetition
    '''
    name: str
    framework: str
    run_cmd: tuple
    workdir: str = '.'
    build_cmd: tuple = None
    env: dict = field(default_factory=dict)
    repetitions: int = DEFAULT_REPETITIONS
    timeout_s: float = None
    warmup_runs: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'run_cmd', as_command(self.run_cmd))
        object.__setattr__(self, 'build_cmd', as_command(self.build_cmd))
        if not self.run_cmd:
            raise WrongValue(f'Benchmark {self.name!r}: run_cmd must not be empty')
        for cmd in (self.run_cmd, self.build_cmd or ()):
            if not all(isinstance(arg, str) for arg in cmd):
                raise WrongValue(
                    f'Benchmark {self.name!r}: command arguments must be strings'
                )
        if self.repetitions < 1:
            raise WrongValue(
                f'Benchmark {self.name!r}: repetitions must be at least 1'
                f', got {self.repetitions}'
            )
        if self.warmup_runs < 0:
            raise WrongValue(f'Benchmark {self.name!r}: warmup_runs must be >= 0')
        if self.timeout_s is not None and not self.timeout_s > 0:
            raise WrongValue(f'Benchmark {self.name!r}: timeout_s must be positive')

    @property
    def label(self):
        return f'{self.name}-{self.framework}'


@dataclass(frozen=True)
class RunRecord:
    '''
    Outcome of one measured repetition

    ``exit_status`` is None if the run was killed on timeout.
    '''
    name: str
    framework: str
    repetition: int
    exit_status: int
    time_s: float
    energy_j: dict = field(default_factory=dict)
    energy_total_j: float = 0.0
    power_log_paths: dict = field(default_factory=dict)
    started_at: str = ''
    timed_out: bool = False

    @property
    def failed(self):
        return self.timed_out or self.exit_status != 0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, dct):
        return cls(**dct)


class BenchmarkRecord(Schema):
    name = Field(type_=str, nonempty=True)
    framework = Field(type_=str, nonempty=True)
    workdir = Field(type_=str, required=False, default='.')
    build_cmd = Field(type_=(str, list), required=False)
    run_cmd = Field(type_=(str, list))
    args = Field(item_type=str, required=False, default=[])
    env = Field(type_=dict, required=False, default={})
    repetitions = Field(type_=int, required=False, default=DEFAULT_REPETITIONS)
    timeout_s = Field(type_=(int, float), required=False)
    warmup_runs = Field(type_=int, required=False, default=0)


class DefaultsRecord(Schema):
    workdir = Field(type_=str, required=False)
    build_cmd = Field(type_=(str, list), required=False)
    run_cmd = Field(type_=(str, list), required=False)
    args = Field(item_type=str, required=False)
    env = Field(type_=dict, required=False)
    repetitions = Field(type_=int, required=False)
    timeout_s = Field(type_=(int, float), required=False)
    warmup_runs = Field(type_=int, required=False)


class SuiteRecord(Schema):
    defaults = Field(type_=dict, required=False, default={})
    benchmarks = Field(type_=list)


def parse_suite(doc, base_dir='.', repetitions=None, source='<suite>'):
    '''
    Turn a decoded suite config into ``BenchmarkSpec`` objects.

    Relative workdirs are resolved against ``base_dir``; ``repetitions``
    overrides every benchmark's repetition count.
    '''
    suite = SuiteRecord.validate(doc, where=f'{source}: ')
    defaults = DefaultsRecord.validate(suite['defaults'], where=f'{source}: defaults.')
    defaults = {k: v for k, v in defaults.items() if v is not None}

    specs = []
    for i, entry in enumerate(suite['benchmarks']):
        where = f'{source}: benchmarks[{i}].'
        if not isinstance(entry, dict):
            raise ValidationError(f'{where[:-1]} must be a JSON object')
        merged = {**defaults, **entry}
        if 'env' in defaults and 'env' in entry:
            merged['env'] = {**defaults['env'], **entry['env']}
        values = BenchmarkRecord.validate(merged, where=where)

        env = values['env']
        if not all(isinstance(v, str) for v in env.values()):
            raise ValidationError(f'{where}\'env\' values must be strings')

        try:
            specs.append(BenchmarkSpec(
                name=values['name'],
                framework=values['framework'],
                run_cmd=as_command(values['run_cmd'], values['args']),
                workdir=str(Path(base_dir) / values['workdir']),
                build_cmd=values['build_cmd'],
                env=env,
                repetitions=repetitions or values['repetitions'],
                timeout_s=values['timeout_s'],
                warmup_runs=values['warmup_runs'],
            ))
        except ValidationError as e:
            raise type(e)(f'{where[:-1]}: {e}') from None

    return specs


def load_suite(path, repetitions=None):
    '''Read a suite config JSON file, see ``parse_suite``'''
    path = Path(path)
    try:
        doc = read_json(path, what='suite config')
    except OSError as e:
        raise ValidationError(f'Cannot read suite config {path}: {e}') from None
    return parse_suite(doc, base_dir=path.parent, repetitions=repetitions, source=str(path))


def _run_child(cmd, spec, env, stdout=None, timeout=None):
    return subprocess.run(
        cmd, cwd=spec.workdir, env=env, timeout=timeout,
        stdout=stdout, stderr=None if stdout is None else subprocess.STDOUT,
    )


@contextmanager
def _child_output(out_dir, name):
    '''File below ``out_dir/logs`` for the output of a child, None without ``out_dir``'''
    if out_dir is None:
        yield None
        return
    path = Path(out_dir) / 'logs' / name
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        yield f


def run_benchmark(spec, backends=None, out_dir=None, clock=None, child_stdout=None):
    '''
    Build, warm up and run one benchmark, measuring every repetition.

    A failing build raises ``BuildFailed``, a run command that cannot be
    executed during warmup raises ``StartFailed``. A nonzero exit status or a
    timeout of a repetition is recorded and does not stop the remaining
    repetitions. With ``out_dir`` the power logs and child output are
    persisted below ``out_dir/logs``.
    '''
    if backends is None:
        backends = detect_environment()
    if not Path(spec.workdir).is_dir():
        raise ValidationError(f'Benchmark {spec.label}: workdir {spec.workdir} does not exist')

    env = {**os.environ, **spec.env}
    session_kwargs = {} if clock is None else {'clock': clock}

    if spec.build_cmd:
        log.info('Building %s: %s', spec.label, shlex.join(spec.build_cmd))
        try:
            with _child_output(out_dir, f'{spec.label}-build.out') as out:
                proc = _run_child(spec.build_cmd, spec, env, stdout=out or child_stdout)
        except OSError as e:
            raise BuildFailed(f'Build of {spec.label} could not start: {e}') from e
        if proc.returncode != 0:
            raise BuildFailed(f'Build of {spec.label} exited with status {proc.returncode}')

    for i in range(spec.warmup_runs):
        log.info('Warmup %d/%d of %s', i + 1, spec.warmup_runs, spec.label)
        try:
            _run_child(spec.run_cmd, spec, env, stdout=child_stdout, timeout=spec.timeout_s)
        except subprocess.TimeoutExpired:
            log.warning('Warmup %d of %s timed out', i + 1, spec.label)
        except OSError as e:
            raise StartFailed(
                f'Cannot execute {shlex.join(spec.run_cmd)} of {spec.label}: {e}'
            ) from e

    records = []
    for rep in range(1, spec.repetitions + 1):
        prefix = f'{spec.label}-{rep}'
        session = MeasurementSession(backends, **session_kwargs)
        started_at = datetime.now().isoformat(timespec='seconds')
        timed_out = False
        exit_status = None

        with _child_output(out_dir, f'{prefix}.out') as out:
            session.start()
            try:
                proc = _run_child(
                    spec.run_cmd, spec, env, stdout=out or child_stdout, timeout=spec.timeout_s,
                )
                exit_status = proc.returncode
            except subprocess.TimeoutExpired:
                timed_out = True
            except OSError as e:
                log.error('Cannot execute %s: %s', shlex.join(spec.run_cmd), e)
                exit_status = 127
            finally:
                session.stop()

        m = session.get_value()
        paths = {}
        if out_dir is not None:
            paths = session.write_logs(Path(out_dir) / 'logs', prefix)

        record = RunRecord(
            name=spec.name,
            framework=spec.framework,
            repetition=rep,
            exit_status=exit_status,
            time_s=m.time_s,
            energy_j=m.energy_j,
            energy_total_j=m.energy_total_j,
            power_log_paths=paths,
            started_at=started_at,
            timed_out=timed_out,
        )
        if timed_out:
            log.warning('%s repetition %d timed out after %s s', spec.label, rep, spec.timeout_s)
        elif record.failed:
            log.warning('%s repetition %d exited with status %s', spec.label, rep, exit_status)
        log.info(
            '%s repetition %d: %.3f s, %.3f J', spec.label, rep, m.time_s, m.energy_total_j,
        )
        records.append(record)

    return records


def write_manifest(records, path):
    '''Write records as JSON lines'''
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for r in records:
            f.write(json.dumps(r.to_dict(), sort_keys=True))
            f.write('\n')


def read_manifest(path):
    records = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(RunRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, TypeError) as e:
                raise ValidationError(f'{path}:{line_no}: invalid run record: {e}') from None
    return records


def run_suite(suite_config, backends=None, out_dir=None, repetitions=None, clock=None):
    '''
    Run every benchmark of a suite, strictly one after another.

    ``suite_config`` is a path or a list of ``BenchmarkSpec``. A benchmark
    that fails to build or cannot start is logged and skipped. With
    ``out_dir`` all records are written to ``out_dir/records.jsonl``.
    '''
    if isinstance(suite_config, (str, os.PathLike)):
        specs = load_suite(suite_config, repetitions=repetitions)
    else:
        specs = list(suite_config)
    if backends is None:
        backends = detect_environment()

    records = []
    for spec in specs:
        log.info('Running %s (%d repetitions)', spec.label, spec.repetitions)
        try:
            records.extend(run_benchmark(spec, backends, out_dir=out_dir, clock=clock))
        except HetbenchError as e:
            log.error('Skipping %s: %s', spec.label, e)

    if out_dir is not None:
        write_manifest(records, Path(out_dir) / MANIFEST_NAME)
    return records


@dataclass(frozen=True)
class Statistics:
    mean: float
    median: float
    min: float
    max: float
    stddev: float

    @classmethod
    def of(cls, values):
        '''Statistics of a nonempty sequence, sample standard deviation'''
        values = np.asarray(values, dtype=float)
        return cls(
            mean=float(np.mean(values)),
            median=float(np.median(values)),
            min=float(np.min(values)),
            max=float(np.max(values)),
            stddev=float(np.std(values, ddof=1)) if len(values) > 1 else 0.0,
        )


@dataclass(frozen=True)
class SummaryRow:
    '''
    Statistics of the successful repetitions of one benchmark.
    ``time`` and ``energy`` are None if no repetition succeeded.
    '''
    name: str
    framework: str
    n: int
    failures: int
    time: Statistics = None
    energy: Statistics = None

    def to_dict(self):
        return asdict(self)


class RunSummary:
    '''Summary rows keyed by ``(name, framework)`` in order of appearance'''
    def __init__(self, rows=()):
        self.rows = {(r.name, r.framework): r for r in rows}

    def __getitem__(self, key):
        return self.rows[key]

    def __contains__(self, key):
        return key in self.rows

    def __iter__(self):
        return iter(self.rows.values())

    def __len__(self):
        return len(self.rows)

    def to_dict(self):
        return [r.to_dict() for r in self]


def summarize(records):
    '''Statistics over successful repetitions, grouped by benchmark'''
    groups = {}
    for r in records:
        groups.setdefault((r.name, r.framework), []).append(r)

    rows = []
    for (name, framework), group in groups.items():
        ok = [r for r in group if not r.failed]
        rows.append(SummaryRow(
            name=name,
            framework=framework,
            n=len(ok),
            failures=len(group) - len(ok),
            time=Statistics.of([r.time_s for r in ok]) if ok else None,
            energy=Statistics.of([r.energy_total_j for r in ok]) if ok else None,
        ))
    return RunSummary(rows)
