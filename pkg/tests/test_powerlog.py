import io
from pathlib import Path

import numpy as np
import pytest
import astropy.units as u
from hetbench.exceptions import (
    InsufficientSamples, MalformedRow, NonMonotonic, WrongValue,
)


REFERENCE_TRACE = Path(__file__).parent.parent / 'hetbench' / 'data' / 'reference_trace.csv'


def pairwise_trapezoid(t, w):
    total = 0.0
    for i in range(1, len(t)):
        total += (t[i] - t[i - 1]) * (w[i] + w[i - 1]) / 2
    return total


def random_log(rng, n=None):
    from hetbench.powerlog import PowerLog

    if n is None:
        n = rng.integers(2, 60)
    t = np.cumsum(rng.uniform(0.01, 1.0, size=n))
    watts = rng.uniform(0, 300, size=n)
    return PowerLog.from_arrays('host', t, watts)


def test_sample_validation():
    from hetbench.powerlog import PowerSample

    PowerSample(0.0, 0.0)
    with pytest.raises(WrongValue):
        PowerSample(0.0, -1.0)
    with pytest.raises(WrongValue):
        PowerSample(float('nan'), 1.0)
    with pytest.raises(WrongValue):
        PowerSample(0.0, float('inf'))


def test_log_validation():
    from hetbench.powerlog import PowerLog, PowerSample

    with pytest.raises(NonMonotonic):
        PowerLog('host', [PowerSample(1.0, 1.0), PowerSample(1.0, 2.0)])
    with pytest.raises(WrongValue):
        PowerLog('host', [PowerSample(1.0, 1.0, 'device')])


def test_quantities():
    from hetbench.powerlog import PowerLog, energy

    log = PowerLog.from_arrays('host', [0, 1, 2], [10, 20, 30])
    assert log.time.unit == u.s
    assert log.power.unit == u.W
    assert energy(log, 0, 2).to_value(u.J) == pytest.approx(40)


def test_constant():
    from hetbench.powerlog import PowerLog, integrate_power

    log = PowerLog.from_arrays('host', np.arange(11), np.full(11, 50.0))
    assert integrate_power(log, 0, 10) == pytest.approx(500)


def test_linear_ramp():
    from hetbench.powerlog import PowerLog, integrate_power

    t = np.arange(11)
    log = PowerLog.from_arrays('host', t, 10.0 * t)
    assert integrate_power(log, 0, 10) == pytest.approx(500)
    # interpolated edges are exact on a linear signal
    assert integrate_power(log, 2.5, 7.25) == pytest.approx(5 * (7.25**2 - 2.5**2))


def test_single_sample():
    from hetbench.powerlog import PowerLog, integrate_power

    log = PowerLog.from_arrays('host', [5.0], [100.0])
    with pytest.warns(InsufficientSamples):
        assert integrate_power(log, 0, 10) == 0

    # outside of the window
    log = PowerLog.from_arrays('host', [20.0, 21.0], [100.0, 100.0])
    with pytest.warns(InsufficientSamples):
        assert integrate_power(log, 0, 10) == 0

    assert integrate_power(PowerLog('host'), 0, 10, onerror='log') == 0


def test_empty_and_reversed_window():
    from hetbench.powerlog import PowerLog, integrate_power

    log = PowerLog.from_arrays('host', [0, 1], [1, 1])
    assert integrate_power(log, 0.5, 0.5) == 0
    with pytest.raises(ValueError):
        integrate_power(log, 1, 0)


def test_no_extrapolation():
    from hetbench.powerlog import PowerLog, integrate_power

    log = PowerLog.from_arrays('host', [2, 4], [100, 100])
    assert integrate_power(log, 0, 10) == pytest.approx(200)


def test_reference_trace_against_pairwise_sum():
    from hetbench.powerlog import read_power_logs, integrate_power

    logs = read_power_logs(REFERENCE_TRACE)
    assert set(logs) == {'host', 'device'}
    for log in logs.values():
        t = [s.t for s in log.samples]
        w = [s.watts for s in log.samples]
        expected = pairwise_trapezoid(t, w)
        assert integrate_power(log, t[0], t[-1]) == pytest.approx(expected, rel=1e-9)


def test_nonnegative_and_additive():
    from hetbench.powerlog import integrate_power

    rng = np.random.default_rng(42)
    for _ in range(1000):
        log = random_log(rng)
        lo = log.t[0] - 1
        hi = log.t[-1] + 1
        t0, t1, t2 = np.sort(rng.uniform(lo, hi, size=3))

        e01 = integrate_power(log, t0, t1, onerror='log')
        e12 = integrate_power(log, t1, t2, onerror='log')
        e02 = integrate_power(log, t0, t2, onerror='log')
        assert e01 >= 0 and e12 >= 0
        assert e01 + e12 == pytest.approx(e02, rel=1e-9, abs=1e-9)


def test_refinement_converges():
    from hetbench.powerlog import PowerLog, integrate_power

    # analytic energy of 100 + 50 sin(t) over [0, 3]
    expected = 300 + 50 * (1 - np.cos(3))
    errors = []
    for n in (10, 100, 1000):
        t = np.linspace(0, 3, n + 1)
        log = PowerLog.from_arrays('host', t, 100 + 50 * np.sin(t))
        errors.append(abs(integrate_power(log, 0, 3) - expected))

    # second order: ten times more samples, a hundred times smaller error
    for coarse, fine in zip(errors, errors[1:]):
        assert fine < coarse / 50
    assert errors[-1] < 1e-3


def test_csv_round_trip(tmp_path):
    from hetbench.powerlog import (
        PowerLog, read_power_log, read_power_logs, write_power_log,
    )

    rng = np.random.default_rng(0)
    host = random_log(rng, 20)
    device = PowerLog.from_arrays('device', host.t, rng.uniform(0, 50, size=20))

    path = tmp_path / 'log.csv'
    write_power_log([host, device], path)
    assert path.read_text().splitlines()[0] == 't_s,watts,component'

    logs = read_power_logs(path)
    assert list(logs) == ['host', 'device']
    assert logs == {'host': host, 'device': device}

    assert read_power_log(path, component='device').watts.tolist() == device.watts.tolist()
    assert len(read_power_log(path, component='gpu')) == 0
    with pytest.raises(WrongValue):
        read_power_log(path)

    buf = io.StringIO()
    write_power_log(host, buf)
    buf.seek(0)
    assert len(read_power_log(buf)) == 20


def test_read_errors():
    from hetbench.powerlog import read_power_log, read_power_logs

    with pytest.raises(MalformedRow, match='expected header'):
        read_power_log(io.StringIO('time,power\n0,1\n'))

    text = 't_s,watts,component\n0.0,1.0,host\n1.0,abc,host\n2.0,1.0\n'
    with pytest.raises(MalformedRow, match=':3:'):
        read_power_log(io.StringIO(text))

    text = 't_s,watts,component\n0.0,1.0,host\n2.0,1.0,host\n1.0,1.0,host\n'
    with pytest.raises(NonMonotonic, match=':4:'):
        read_power_log(io.StringIO(text))

    logs = read_power_logs(io.StringIO(text), onerror='log')
    assert logs['host'].t.tolist() == [0.0, 2.0]


def test_empty_file():
    from hetbench.powerlog import read_power_log

    log = read_power_log(io.StringIO('t_s,watts,component\n'))
    assert len(log) == 0


def test_timestamps_are_quantized(tmp_path):
    from hetbench.powerlog import PowerLog, PowerSample, read_power_log, write_power_log

    assert PowerSample(0.1234567, 1.0).t == 0.123457

    # readings within the same microsecond cannot be told apart
    with pytest.raises(NonMonotonic):
        PowerLog.from_arrays('host', [0.1234567, 0.1234569, 1.0], [1.0, 2.0, 3.0])

    rng = np.random.default_rng(42)
    for _ in range(50):
        n = rng.integers(1, 30)
        t = 1e4 * rng.random() + np.cumsum(rng.uniform(2e-6, 2.0, size=n))
        original = PowerLog.from_arrays('host', t, rng.uniform(0, 500, size=n))

        buf = io.StringIO()
        write_power_log(original, buf)
        buf.seek(0)
        assert read_power_log(buf) == original

    path = tmp_path / 'log.csv'
    write_power_log(PowerLog.from_arrays('host', [0.1234567, 1.0], [1.0, 2.0]), path)
    assert path.read_text().splitlines()[1:] == ['0.123457,1.0,host', '1.000000,2.0,host']
