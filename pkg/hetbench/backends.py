'''
Meter backends: the sources of timestamps, power samples and energy
counters that a measurement session reads.

``detect_environment`` looks, in order, for a replay trace, an external
power command and cumulative energy counter files, and always adds the
wallclock backend.
'''
from abc import ABCMeta, abstractmethod
from pathlib import Path
import logging
import os
import re
import shlex
import subprocess
import threading

import numpy as np

from .exceptions import (
    NoPowerSource, PowerReadError, SessionStateError, ValidationError, WrongValue,
)
from .powerlog import (
    PowerLog, PowerSample, integrate_power, quantize_time, read_power_logs,
)
from .utils import log_or_raise


log = logging.getLogger(__name__)

DEFAULT_INTERVAL_S = 0.1
POWERCAP_ROOT = '/sys/class/powercap'

ENV_REPLAY = 'XMPU_REPLAY_TRACE'
ENV_POWER_CMD = 'XMPU_POWER_CMD'
ENV_POWER_CMD_ALIASES = (ENV_POWER_CMD, 'POWER_SOURCE_CMD')

NUMBER_RE = re.compile(r'[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?')


class MeterBackend(metaclass=ABCMeta):
    '''
    A source of measurements attached to a session.

    A backend is started and stopped by the session with timestamps from
    the session clock. It emits samples only between start and stop and
    can serve one session at a time.

    Attributes
    ----------
    kind: str
        one of ``'wallclock'``, ``'sampled_power'``, ``'composite'``,
        ``'replay'``, ``'energy_counter'``
    components: tuple of str
        labels of the measured components
    '''
    kind = None

    def __init__(self):
        self.active = False
        self.t_start = None
        self.t_stop = None

    @property
    @abstractmethod
    def components(self):
        '''Labels of the measured components'''

    def start(self, t_start, clock):
        if self.active:
            raise SessionStateError(f'{self!r} is already attached to a running session')
        self.active = True
        self.t_start = quantize_time(t_start)
        self.t_stop = None

    def stop(self, t_stop):
        if not self.active:
            raise SessionStateError(f'{self!r} was not started')
        self.active = False
        self.t_stop = quantize_time(t_stop)

    def logs(self):
        '''Power logs of the last measured region, component -> PowerLog'''
        return {}

    def energy(self, onerror='log'):
        '''Energy in joules per component over the last measured region'''
        return {
            c: integrate_power(log_, self.t_start, self.t_stop, onerror=onerror)
            for c, log_ in self.logs().items()
        }

    def __repr__(self):
        return f'{self.__class__.__name__}(components={list(self.components)})'


class WallclockBackend(MeterBackend):
    '''Time only, no power components'''
    kind = 'wallclock'

    @property
    def components(self):
        return ()


class CommandPowerReader:
    '''
    Run a command that prints one wattage number per invocation.

    Any tool that prints the current power, e.g. a vendor utility
    wrapped in a shell one-liner, can serve as a power source.
    '''
    def __init__(self, command, timeout=5.0):
        if isinstance(command, str):
            command = shlex.split(command)
        if not command:
            raise WrongValue('Power command must not be empty')
        self.command = list(command)
        self.timeout = timeout

    def __call__(self):
        try:
            proc = subprocess.run(
                self.command, capture_output=True, text=True, timeout=self.timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as e:
            raise PowerReadError(f'Power command {self.command} failed: {e}') from e

        if proc.returncode != 0:
            raise PowerReadError(
                f'Power command {self.command} exited with status {proc.returncode}'
            )
        m = NUMBER_RE.search(proc.stdout)
        if m is None:
            raise PowerReadError(
                f'Power command {self.command} printed no number: {proc.stdout!r}'
            )
        return float(m.group())

    def __repr__(self):
        return f'{self.__class__.__name__}({" ".join(self.command)!r})'


class SampledPowerBackend(MeterBackend):
    '''
    Polls a reader callable returning watts on a background thread.

    A sample is taken at start, every ``interval_s`` while running and
    once more at stop, so that the last interval is never truncated.
    '''
    kind = 'sampled_power'

    def __init__(self, reader, component='host', interval_s=DEFAULT_INTERVAL_S):
        super().__init__()
        if not interval_s > 0:
            raise WrongValue(f'Sampling interval must be positive, got {interval_s}')
        self.reader = reader
        self.component = component
        self.interval_s = interval_s
        self._samples = []
        self._lock = threading.Lock()
        self._stopped = threading.Event()
        self._thread = None
        self._clock = None

    @property
    def components(self):
        return (self.component, )

    def _read(self):
        try:
            return self.reader()
        except PowerReadError as e:
            log.warning('Skipping power sample of %r: %s', self.component, e)
            return None

    def _append(self, t, watts):
        if watts is None:
            return
        try:
            sample = PowerSample(t, watts, self.component)
        except ValueError as e:
            log.warning('Dropping invalid power sample of %r: %s', self.component, e)
            return
        # two reads within the same microsecond keep the first
        if self._samples and not sample.t > self._samples[-1].t:
            return
        self._samples.append(sample)

    def _poll(self):
        while not self._stopped.wait(self.interval_s):
            watts = self._read()
            t = self._clock()
            with self._lock:
                if self._stopped.is_set():
                    break
                self._append(t, watts)

    def start(self, t_start, clock):
        super().start(t_start, clock)
        self._clock = clock
        self._samples = []
        self._stopped.clear()
        self._append(t_start, self._read())
        self._thread = threading.Thread(
            target=self._poll, name=f'power-poller-{self.component}', daemon=True,
        )
        self._thread.start()

    def stop(self, t_stop):
        super().stop(t_stop)
        with self._lock:
            self._stopped.set()
        self._thread.join()
        self._thread = None

        # samples read after the stop timestamp are outside the region
        while self._samples and self._samples[-1].t >= self.t_stop:
            self._samples.pop()
        self._append(t_stop, self._read())
        log.debug('%r collected %d samples', self, len(self._samples))

    def logs(self):
        return {self.component: PowerLog(self.component, self._samples)}


class ReplayBackend(MeterBackend):
    '''
    Replays recorded power traces as if sampled during the region.

    Trace time is taken relative to its first sample and shifted to the
    session start. Past the end of a trace its last value is held.
    '''
    kind = 'replay'

    def __init__(self, traces):
        super().__init__()
        if isinstance(traces, PowerLog):
            traces = {traces.component: traces}
        elif not isinstance(traces, dict):
            traces = read_power_logs(traces)
        for c, trace in traces.items():
            if len(trace) == 0:
                raise WrongValue(f'Replay trace of {c!r} has no samples')
        self.traces = dict(traces)
        self._logs = {}

    @classmethod
    def constant(cls, watts, component='host', duration_s=3600.0):
        '''A trace of constant power'''
        return cls(PowerLog.from_arrays(component, [0.0, duration_s], [watts, watts]))

    @property
    def components(self):
        return tuple(self.traces)

    def stop(self, t_stop):
        super().stop(t_stop)
        self._logs = {
            c: self._replay(trace, self.t_start, self.t_stop)
            for c, trace in self.traces.items()
        }

    @staticmethod
    def _replay(trace, t_start, t_stop):
        rel = trace.t - trace.t[0]
        duration = t_stop - t_start
        inside = (rel > 0) & (rel < duration)
        t = np.concatenate(([t_start], t_start + rel[inside]))
        w = np.concatenate(([trace.watts[0]], trace.watts[inside]))
        if duration > 0:
            t = np.append(t, t_stop)
            w = np.append(w, np.interp(duration, rel, trace.watts))
        # shifted timestamps closer than a microsecond collapse to one sample
        t = np.array([quantize_time(ti) for ti in t])
        keep = np.concatenate(([True], np.diff(t) > 0))
        return PowerLog.from_arrays(trace.component, t[keep], w[keep])

    def logs(self):
        return dict(self._logs)


class EnergyCounterBackend(MeterBackend):
    '''
    Reads cumulative energy counter files at start and stop.

    Each counter file holds one integer, in units of ``scale`` joules
    (microjoules for powercap ``energy_uj``). A counter that wrapped is
    corrected by its ``max_range``.
    The power log of a component holds its mean power at start and stop.
    '''
    kind = 'energy_counter'

    def __init__(self, counters, scale=1e-6, max_ranges=None):
        super().__init__()
        if not counters:
            raise WrongValue('EnergyCounterBackend needs at least one counter file')
        self.counters = {c: Path(p) for c, p in counters.items()}
        self.scale = scale
        self.max_ranges = dict(max_ranges or {})
        self._begin = {}
        self._delta = {}

    @property
    def components(self):
        return tuple(self.counters)

    def _read_all(self):
        values = {}
        for c, path in self.counters.items():
            try:
                values[c] = int(path.read_text().split()[0])
            except (OSError, ValueError, IndexError) as e:
                raise PowerReadError(f'Cannot read energy counter {path}: {e}') from e
        return values

    def start(self, t_start, clock):
        self._begin = self._read_all()
        super().start(t_start, clock)

    def stop(self, t_stop):
        super().stop(t_stop)
        end = self._read_all()
        self._delta = {}
        for c, begin in self._begin.items():
            diff = end[c] - begin
            if diff < 0:
                # counter overflow
                diff += self.max_ranges.get(c, 0)
            self._delta[c] = max(diff, 0) * self.scale

    def energy(self, onerror='log'):
        return dict(self._delta)

    def logs(self):
        duration = self.t_stop - self.t_start
        if not duration > 0:
            return {}
        return {
            c: PowerLog.from_arrays(
                c, [self.t_start, self.t_stop], [joules / duration] * 2,
            )
            for c, joules in self._delta.items()
        }


class CompositeBackend(MeterBackend):
    '''Measures several backends as one, components must not overlap'''
    kind = 'composite'

    def __init__(self, backends):
        super().__init__()
        self.backends = list(backends)
        check_components(self.backends)

    @property
    def components(self):
        return tuple(c for b in self.backends for c in b.components)

    def start(self, t_start, clock):
        super().start(t_start, clock)
        started = []
        try:
            for b in self.backends:
                b.start(t_start, clock)
                started.append(b)
        except Exception:
            for b in started:
                b.stop(t_start)
            self.active = False
            raise

    def stop(self, t_stop):
        super().stop(t_stop)
        for b in self.backends:
            b.stop(t_stop)

    def logs(self):
        return {c: log_ for b in self.backends for c, log_ in b.logs().items()}

    def energy(self, onerror='log'):
        return {c: e for b in self.backends for c, e in b.energy(onerror).items()}


def check_components(backends):
    '''Raise if two backends measure the same component'''
    seen = set()
    for b in backends:
        for c in b.components:
            if c in seen:
                raise ValidationError(f'Component {c!r} is measured by two backends')
            seen.add(c)


def find_powercap_counters(root=POWERCAP_ROOT):
    '''
    Readable top-level powercap zones below ``root``.

    Returns ``(counters, max_ranges)``, both keyed by the zone name.
    '''
    counters = {}
    max_ranges = {}
    root = Path(root)
    if not root.is_dir():
        return counters, max_ranges

    for zone in sorted(root.glob('*')):
        energy_file = zone / 'energy_uj'
        # sub-zones (e.g. intel-rapl:0:0) are already part of their parent
        if zone.name.count(':') != 1 or not energy_file.is_file():
            continue
        if not os.access(energy_file, os.R_OK):
            log.debug('Energy counter %s is not readable', energy_file)
            continue
        try:
            name = (zone / 'name').read_text().strip()
        except OSError:
            name = zone.name
        if name in counters:
            name = f'{name}-{zone.name}'
        counters[name] = energy_file
        try:
            max_ranges[name] = int((zone / 'max_energy_range_uj').read_text())
        except (OSError, ValueError):
            pass
    return counters, max_ranges


def detect_environment(
    replay_trace=None, power_cmd=None, energy_files=None,
    interval_s=DEFAULT_INTERVAL_S, environ=None, powercap_root=POWERCAP_ROOT,
):
    '''
    Look for power sources and return the backends to measure with.

    Explicit arguments take precedence over the environment variables
    ``XMPU_REPLAY_TRACE`` and ``XMPU_POWER_CMD`` (alias ``POWER_SOURCE_CMD``).
    The first source found in the order replay trace, power command,
    energy counter files is used. The wallclock backend is always first;
    without any power source only time is measured.
    '''
    if environ is None:
        environ = os.environ

    backends = [WallclockBackend()]

    replay_trace = replay_trace or environ.get(ENV_REPLAY)
    if replay_trace:
        log.info('Replaying power trace %s', replay_trace)
        backends.append(ReplayBackend(replay_trace))
        return backends

    if power_cmd is None:
        power_cmd = next(
            (environ[k] for k in ENV_POWER_CMD_ALIASES if environ.get(k)), None,
        )
    if power_cmd:
        log.info('Sampling power from command %r every %.3f s', power_cmd, interval_s)
        backends.append(SampledPowerBackend(
            CommandPowerReader(power_cmd), component='host', interval_s=interval_s,
        ))
        return backends

    if energy_files:
        counters, max_ranges = dict(energy_files), {}
    else:
        counters, max_ranges = find_powercap_counters(powercap_root)
    if counters:
        log.info('Reading energy counters %s', sorted(counters))
        backends.append(EnergyCounterBackend(counters, max_ranges=max_ranges))
        return backends

    log_or_raise(
        'No power source found, measuring time only',
        NoPowerSource, log, onerror='log',
    )
    return backends


