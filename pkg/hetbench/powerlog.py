'''
Timestamped power samples, their energy integral and the CSV log format.

A power log CSV has the header ``t_s,watts,component`` and one sample
per row in time order. Timestamps are held at microsecond resolution,
the precision ``t_s`` is written with, so a log reads back unchanged.
'''
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
import csv
import io
import logging
import math

import numpy as np
import astropy.units as u

from .exceptions import (
    InsufficientSamples, MalformedRow, NonMonotonic, ValidationError, WrongValue,
)
from .utils import log_or_raise


log = logging.getLogger(__name__)

CSV_HEADER = ('t_s', 'watts', 'component')
TIME_DECIMALS = 6


def quantize_time(t):
    '''Round a timestamp in seconds to the resolution of the log format'''
    return round(float(t), TIME_DECIMALS)


@dataclass(frozen=True)
class PowerSample:
    '''
    One instantaneous power reading

    Attributes
    ----------
    t: float
        monotonic timestamp in seconds, rounded to microseconds
    watts: float
        power in W, nonnegative
    component: str
        label of the measured component, e.g. ``"host"`` or ``"device"``
    '''
    t: float
    watts: float
    component: str = 'host'

    def __post_init__(self):
        if not math.isfinite(self.t):
            raise WrongValue(f'Sample timestamp must be finite, got {self.t}')
        object.__setattr__(self, 't', quantize_time(self.t))
        if not math.isfinite(self.watts) or self.watts < 0:
            raise WrongValue(
                f'Sample power must be finite and nonnegative, got {self.watts}'
            )


@dataclass(frozen=True)
class PowerLog:
    '''
    Time-ordered power samples of one component

    Timestamps are strictly increasing.
    '''
    component: str
    samples: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, 'samples', tuple(self.samples))
        last = -math.inf
        for i, s in enumerate(self.samples):
            if s.component != self.component:
                raise WrongValue(
                    f'Sample {i} belongs to {s.component!r},'
                    f' not to {self.component!r}'
                )
            if not s.t > last:
                raise NonMonotonic(
                    f'Power log {self.component!r}: timestamp {s.t} of sample {i}'
                    f' does not increase'
                )
            last = s.t

    @classmethod
    def from_arrays(cls, component, t, watts):
        return cls(component, tuple(
            PowerSample(float(ti), float(wi), component) for ti, wi in zip(t, watts)
        ))

    def __len__(self):
        return len(self.samples)

    @cached_property
    def t(self):
        '''timestamps as a numpy array in seconds'''
        return np.array([s.t for s in self.samples], dtype=float)

    @cached_property
    def watts(self):
        '''power values as a numpy array in W'''
        return np.array([s.watts for s in self.samples], dtype=float)

    @property
    def time(self):
        return u.Quantity(self.t, u.s)

    @property
    def power(self):
        return u.Quantity(self.watts, u.W)


def integrate_power(log_, t0, t1, onerror='raise'):
    '''
    Energy in joules of ``log_`` over ``[t0, t1]`` by the trapezoidal rule.

    The samples are clipped to the window; values at the window edges are
    linearly interpolated from the neighbouring samples. The window is not
    extrapolated beyond the first and last sample. If fewer than two points
    cover the window the result is 0 and ``InsufficientSamples`` is reported.
    '''
    if t0 > t1:
        raise ValueError(f'Integration window [{t0}, {t1}] is reversed')
    if t0 == t1:
        return 0.0

    t = log_.t
    w = log_.watts
    if len(t) == 0:
        a = b = 0.0
    else:
        a = max(t0, t[0])
        b = min(t1, t[-1])

    if len(t) == 0 or b <= a:
        log_or_raise(
            f'Fewer than two power samples of {log_.component!r}'
            f' in [{t0:.6f}, {t1:.6f}], energy set to 0',
            InsufficientSamples, log, onerror=onerror,
        )
        return 0.0

    inside = (t > a) & (t < b)
    ts = np.concatenate(([a], t[inside], [b]))
    ws = np.concatenate(([np.interp(a, t, w)], w[inside], [np.interp(b, t, w)]))
    return float(np.sum(np.diff(ts) * (ws[1:] + ws[:-1])) / 2)


def energy(log_, t0, t1, onerror='raise'):
    '''``integrate_power`` as an astropy quantity'''
    return integrate_power(log_, t0, t1, onerror=onerror) * u.J


def _open(destination, mode):
    if hasattr(destination, 'write' if 'w' in mode else 'read'):
        return destination, False
    return open(destination, mode, newline='', encoding='utf-8'), True


def write_power_log(log_, destination):
    '''
    Write one or more power logs as CSV.

    ``log_`` is a ``PowerLog`` or an iterable of them, ``destination`` a
    path or a text file. Rows are written log by log.
    '''
    logs = [log_] if isinstance(log_, PowerLog) else list(log_)
    try:
        f, close = _open(destination, 'w')
    except OSError as e:
        raise ValidationError(f'Cannot write power log {destination}: {e}') from None

    try:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(CSV_HEADER)
        for one in logs:
            for s in one.samples:
                writer.writerow((f'{s.t:.6f}', repr(float(s.watts)), s.component))
    finally:
        if close:
            f.close()


def read_power_logs(source, onerror='raise'):
    '''
    Read a power log CSV, returning a dict component -> ``PowerLog``
    in order of first appearance.

    Malformed rows raise ``MalformedRow`` and timestamps that do not
    increase within a component raise ``NonMonotonic``, both with the
    line number. With ``onerror='log'`` such rows are logged and skipped.
    '''
    name = getattr(source, 'name', source)
    if isinstance(source, (str, Path)):
        try:
            text = Path(source).read_text(encoding='utf-8')
        except OSError as e:
            raise ValidationError(f'Cannot read power log {source}: {e}') from None
    else:
        text = source.read()

    rows = csv.reader(io.StringIO(text))
    header = next(rows, None)
    if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
        raise MalformedRow(
            f'{name}:1: expected header {",".join(CSV_HEADER)}, found {header}'
        )

    samples = {}
    for line_no, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != 3:
            log_or_raise(
                f'{name}:{line_no}: expected 3 fields, found {len(row)}',
                MalformedRow, log, onerror=onerror,
            )
            continue

        try:
            sample = PowerSample(float(row[0]), float(row[1]), row[2].strip())
        except ValueError as e:
            log_or_raise(f'{name}:{line_no}: {e}', MalformedRow, log, onerror=onerror)
            continue

        previous = samples.setdefault(sample.component, [])
        if previous and not sample.t > previous[-1].t:
            log_or_raise(
                f'{name}:{line_no}: timestamp {row[0]} of {sample.component!r}'
                f' does not increase',
                NonMonotonic, log, onerror=onerror,
            )
            continue
        previous.append(sample)

    return {c: PowerLog(c, s) for c, s in samples.items()}


def read_power_log(source, component=None, onerror='raise'):
    '''
    Read a single-component power log CSV.

    If the file holds several components, ``component`` selects one.
    An empty file yields an empty log labeled ``component``.
    '''
    logs = read_power_logs(source, onerror=onerror)
    if component is not None:
        return logs.get(component, PowerLog(component))
    if not logs:
        return PowerLog('')
    if len(logs) > 1:
        raise WrongValue(
            f'Power log holds components {list(logs)}, select one with `component`'
        )
    return next(iter(logs.values()))
