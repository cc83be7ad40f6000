import json
import logging
import warnings

from .exceptions import HetbenchError, ValidationError


log = logging.getLogger(__name__)

LOG_FORMAT = '%(levelname)s %(name)s: %(message)s'


def log_or_raise(msg, exc_type=HetbenchError, log=log, onerror='raise'):
    '''Report a problem either loudly or quietly.

    With ``onerror='raise'`` exceptions are raised and ``UserWarning``
    subclasses are issued via ``warnings.warn``.
    With ``onerror='log'`` exceptions are logged as errors and warnings
    as warnings, and processing continues.
    '''
    if onerror == 'raise':
        if issubclass(exc_type, UserWarning):
            warnings.warn(msg, exc_type, stacklevel=3)
        else:
            raise exc_type(msg)
    elif onerror == 'log':
        if issubclass(exc_type, UserWarning):
            log.warning(msg)
        else:
            log.error(msg)
    else:
        raise ValueError('`onerror` must be either "raise" or "log"')


def setup_logging(verbosity=0):
    '''Configure the root logger on stderr; 0=WARNING, 1=INFO, 2+=DEBUG'''
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger().setLevel(level)


def dump_json(obj, fp=None):
    '''Deterministic JSON serialization used for all machine output'''
    text = json.dumps(obj, indent=2, sort_keys=True)
    if fp is None:
        return text
    fp.write(text)
    fp.write('\n')


def read_json(path, what='file'):
    '''Load a JSON document, turning syntax errors into ``ValidationError``'''
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ValidationError(
            f'Malformed {what} {path}: line {e.lineno}, column {e.colno}: {e.msg}'
        ) from None
