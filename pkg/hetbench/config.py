'''
Global settings shared by all subcommands.

Values come from an optional JSON file (``--config`` or the
``HETBENCH_CONFIG`` environment variable); command line flags override
them. Relative paths in the file are resolved against the file's directory.
'''
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
import logging
import os

from .backends import DEFAULT_INTERVAL_S, detect_environment
from .exceptions import ValidationError, WrongValue
from .profiles import load_profiles
from .schema import Schema, Field
from .utils import read_json


log = logging.getLogger(__name__)

ENV_CONFIG = 'HETBENCH_CONFIG'
PATH_KEYS = ('profiles', 'replay_trace', 'out_dir')


class ConfigRecord(Schema):
    profiles = Field(type_=str, required=False)
    interval_s = Field(type_=(int, float), required=False, default=DEFAULT_INTERVAL_S)
    replay_trace = Field(type_=str, required=False)
    power_cmd = Field(type_=(str, list), required=False)
    energy_files = Field(type_=dict, required=False)
    out_dir = Field(type_=str, required=False)
    verbosity = Field(type_=int, required=False, default=0)


@dataclass(frozen=True)
class GlobalConfig:
    '''
    Attributes
    ----------
    profiles: str or None
        profile config path, None for the built-in profiles
    interval_s: float
        power sampling interval
    replay_trace: str or None
        force the replay backend with this trace
    power_cmd: str, list or None
        force the command sampling backend
    energy_files: dict
        component -> cumulative energy counter file
    out_dir: str or None
        where runs persist records and power logs
    verbosity: int
    '''
    profiles: str = None
    interval_s: float = DEFAULT_INTERVAL_S
    replay_trace: str = None
    power_cmd: object = None
    energy_files: dict = field(default_factory=dict)
    out_dir: str = None
    verbosity: int = 0

    def __post_init__(self):
        if not self.interval_s > 0:
            raise WrongValue(f'interval_s must be positive, got {self.interval_s}')
        if self.verbosity < 0:
            raise WrongValue(f'verbosity must not be negative, got {self.verbosity}')

    def override(self, **kwargs):
        '''A copy with every non-None keyword replacing the stored value'''
        known = {f.name for f in fields(self)}
        unknown = set(kwargs) - known
        if unknown:
            raise TypeError(f'Unknown settings {sorted(unknown)}')
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

    def validate_paths(self):
        '''Check that configured input files exist before anything runs'''
        for key in ('profiles', 'replay_trace'):
            value = getattr(self, key)
            if value is not None and not Path(value).is_file():
                raise ValidationError(f'{key}: {value} is not a file')
        for component, path in self.energy_files.items():
            if not Path(path).is_file():
                raise ValidationError(f'energy_files[{component!r}]: {path} is not a file')
        if self.out_dir is not None and Path(self.out_dir).is_file():
            raise ValidationError(f'out_dir: {self.out_dir} is a file')
        return self

    def load_profiles(self, onerror='raise'):
        return load_profiles(self.profiles, onerror=onerror)

    def backends(self, environ=None):
        return detect_environment(
            replay_trace=self.replay_trace,
            power_cmd=self.power_cmd,
            energy_files=self.energy_files or None,
            interval_s=self.interval_s,
            environ=environ,
        )


def load_config(path=None, environ=None):
    '''
    Read a ``GlobalConfig`` from ``path``, or from ``$HETBENCH_CONFIG``
    if no path is given. Without either, the defaults are returned.
    '''
    if environ is None:
        environ = os.environ
    if path is None:
        path = environ.get(ENV_CONFIG) or None
    if path is None:
        return GlobalConfig()

    path = Path(path)
    if not path.is_file():
        raise ValidationError(f'Config file {path} does not exist')

    doc = read_json(path, what='config file')
    values = ConfigRecord.validate(doc, where=f'{path}: ')
    values = {k: v for k, v in values.items() if v is not None}

    base = path.parent
    for key in PATH_KEYS:
        if key in values:
            values[key] = str(base / values[key])
    if 'energy_files' in values:
        values['energy_files'] = {
            component: str(base / p) for component, p in values['energy_files'].items()
        }

    log.debug('Loaded config %s: %s', path, values)
    return GlobalConfig(**values)
