'''
Start/stop measurement of a code region's time and energy.

Usage::

    session = MeasurementSession(detect_environment())
    session.start()
    run_the_region()
    session.stop()
    m = session.get_value()
    print(m.time_s, m.energy_total_j)
'''
from dataclasses import dataclass, field
from pathlib import Path
import logging
import math
import time

import astropy.units as u

from .backends import check_components, detect_environment
from .exceptions import SessionStateError
from .powerlog import quantize_time, write_power_log


log = logging.getLogger(__name__)

IDLE = 'idle'
RUNNING = 'running'
STOPPED = 'stopped'


@dataclass(frozen=True)
class Measurement:
    '''
    Time and energy of one measured region

    Attributes
    ----------
    time_s: float
        elapsed seconds
    energy_j: dict
        component -> joules
    energy_total_j: float
        sum of all components
    degenerate: tuple
        components with too few samples for integration, reported as 0 J
    '''
    time_s: float
    energy_j: dict = field(default_factory=dict)
    energy_total_j: float = 0.0
    degenerate: tuple = ()

    @classmethod
    def from_components(cls, time_s, energy_j, degenerate=()):
        energy_j = dict(energy_j)
        return cls(
            time_s=time_s,
            energy_j=energy_j,
            energy_total_j=math.fsum(energy_j.values()),
            degenerate=tuple(degenerate),
        )

    @property
    def time(self):
        return self.time_s * u.s

    @property
    def energy_total(self):
        return self.energy_total_j * u.J

    @property
    def mean_power(self):
        '''Mean total power over the region, NaN for an empty region'''
        if self.time_s <= 0:
            return math.nan * u.W
        return (self.energy_total / self.time).to(u.W)

    def to_dict(self):
        return {
            'time_s': self.time_s,
            'energy_j': dict(sorted(self.energy_j.items())),
            'energy_total_j': self.energy_total_j,
            'degenerate': list(self.degenerate),
        }


class MeasurementSession:
    '''
    One measured region: idle -> running -> stopped.

    Backends are started and stopped with timestamps of a single
    monotonic ``clock``. Any call out of order raises
    ``SessionStateError`` and leaves the session unchanged.
    A session also works as a context manager around the region.
    '''
    def __init__(self, backends=None, clock=time.monotonic):
        if backends is None:
            backends = detect_environment()
        self.backends = list(backends)
        check_components(self.backends)
        self.clock = clock
        self.state = IDLE
        self.t_start = None
        self.t_stop = None
        self._value = None

    def __repr__(self):
        return (
            f'{self.__class__.__name__}(state={self.state!r},'
            f' backends={[b.kind for b in self.backends]})'
        )

    @property
    def components(self):
        return tuple(c for b in self.backends for c in b.components)

    def start(self):
        if self.state != IDLE:
            raise SessionStateError(f'Cannot start a {self.state} session')
        busy = [b for b in self.backends if b.active]
        if busy:
            raise SessionStateError(f'Backends {busy} are used by another session')

        t_start = quantize_time(self.clock())
        started = []
        try:
            for b in self.backends:
                b.start(t_start, self.clock)
                started.append(b)
        except Exception:
            for b in started:
                b.stop(t_start)
            raise

        self.t_start = t_start
        self.state = RUNNING
        log.debug('Session started at %.6f', t_start)

    def stop(self):
        if self.state != RUNNING:
            raise SessionStateError(f'Cannot stop a {self.state} session')
        t_stop = quantize_time(self.clock())
        for b in self.backends:
            b.stop(t_stop)
        self.t_stop = t_stop
        self.state = STOPPED
        log.debug('Session stopped at %.6f', t_stop)

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, exc_type, exc, tb):
        if self.state == RUNNING:
            self.stop()

    @property
    def logs(self):
        '''component -> PowerLog of the measured region'''
        if self.state != STOPPED:
            raise SessionStateError(f'Power logs of a {self.state} session')
        return {c: log_ for b in self.backends for c, log_ in b.logs().items()}

    def get_value(self):
        '''Time and per-component energy of the measured region'''
        if self.state != STOPPED:
            raise SessionStateError(f'Cannot get the value of a {self.state} session')
        if self._value is None:
            energy_j = {}
            degenerate = []
            for b in self.backends:
                logs = b.logs()
                for c, joules in b.energy(onerror='log').items():
                    energy_j[c] = joules
                    if c in logs and joules == 0 and len(logs[c]) < 2:
                        degenerate.append(c)
            self._value = Measurement.from_components(
                self.t_stop - self.t_start, energy_j, degenerate,
            )
        return self._value

    def write_logs(self, directory, prefix):
        '''Write one CSV per component, return component -> path'''
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {}
        for c, log_ in self.logs.items():
            path = directory / f'{prefix}-{c}.csv'
            write_power_log(log_, path)
            paths[c] = str(path)
        return paths


def start(session):
    session.start()


def stop(session):
    session.stop()


def get_value(session):
    return session.get_value()
