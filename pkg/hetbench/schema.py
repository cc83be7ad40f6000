'''
Schema definitions for JSON configuration records.

Profile configs, suite configs and the global config file are all
lists or objects of flat records. A record schema is declared as a class
with ``Field`` members, in the same way for every config kind::

    class BenchmarkRecord(Schema):
        name = Field(type_=str)
        repetitions = Field(type_=int, required=False, default=5)
'''
from collections.abc import Iterable, Mapping
import copy
import logging

from .exceptions import (
    RequiredMissing, WrongType, WrongValue, UnknownKey,
)
from .utils import log_or_raise


log = logging.getLogger(__name__)


class Field:
    '''
    Schema for one key of a configuration record

    Attributes
    ----------
    key: str
        override the key given as the class member name
    required: bool
        If this key must be present
    type_: type or tuple of types
        Allowed python types of the value, after JSON decoding
    item_type: type or tuple of types
        If given, the value must be a list whose items have this type
    allowed_values: iterable
        If given, the value must be one of these
    nonempty: bool
        Reject empty strings, and empty strings inside lists
    default:
        Value filled in when an optional key is absent
    '''
    def __init__(
        self, key=None, *, required=True, type_=None, item_type=None,
        allowed_values=None, nonempty=False, default=None,
    ):
        self.key = key
        self.required = required
        self.nonempty = nonempty
        self.default = default

        if item_type is not None:
            type_ = list
        if isinstance(type_, Iterable):
            type_ = tuple(type_)
        self.type = type_
        self.item_type = item_type

        if allowed_values is not None:
            allowed_values = frozenset(allowed_values)
        self.allowed_values = allowed_values

    def __set_name__(self, owner, name):
        if self.key is None:
            self.key = name

    def __repr__(self):
        return (
            f'{self.__class__.__name__}('
            f'key={self.key!r}, required={self.required}, type={self.type}'
            ')'
        )

    def validate(self, value, where='', onerror='raise'):
        '''Validate a single decoded JSON value, return True if valid'''
        k = f'{where}{self.key!r}'

        # bool is an int in python, but never a valid int in a config
        if self.type is not None and (
            not isinstance(value, self.type)
            or (isinstance(value, bool) and bool not in _as_tuple(self.type))
        ):
            log_or_raise(
                f'Field {k} has wrong type {type(value).__name__}'
                f', expected {_type_names(self.type)}',
                WrongType, log, onerror=onerror,
            )
            return False

        if self.item_type is not None:
            for i, item in enumerate(value):
                if not isinstance(item, self.item_type):
                    log_or_raise(
                        f'Item {i} of field {k} has wrong type {type(item).__name__}'
                        f', expected {_type_names(self.item_type)}',
                        WrongType, log, onerror=onerror,
                    )
                    return False
                if self.nonempty and isinstance(item, str) and not item.strip():
                    log_or_raise(
                        f'Item {i} of field {k} is an empty string',
                        WrongValue, log, onerror=onerror,
                    )
                    return False
        elif self.nonempty and isinstance(value, str) and not value.strip():
            log_or_raise(f'Field {k} must not be empty', WrongValue, log, onerror)
            return False

        if self.allowed_values is not None and value not in self.allowed_values:
            log_or_raise(
                f'Possible values for {k} are {sorted(self.allowed_values)}'
                f', found {value!r}',
                WrongValue, log, onerror=onerror,
            )
            return False

        return True


def _as_tuple(type_):
    return type_ if isinstance(type_, tuple) else (type_, )


def _type_names(type_):
    return ' or '.join(t.__name__ for t in _as_tuple(type_))


class SchemaMeta(type):
    def __new__(cls, name, bases, dct):
        dct['__fields__'] = {}
        dct['__slots__'] = tuple()

        for base in reversed(bases):
            if hasattr(base, '__fields__'):
                dct['__fields__'].update(base.__fields__)

        for k, v in dct.items():
            if isinstance(v, Field):
                k = v.key or k
                dct['__fields__'][k] = v

        return super().__new__(cls, name, bases, dct)


class Schema(metaclass=SchemaMeta):
    '''
    Schema definition for one JSON configuration record

    Add ``Field`` class members to define the schema.
    '''

    @classmethod
    def validate(cls, record, where='', onerror='raise'):
        '''
        Validate a decoded JSON object against this schema.

        Returns a new dict with defaults filled in for absent optional keys,
        or None if the record is invalid and ``onerror='log'``.
        ``where`` is prepended to diagnostics, e.g. ``'benchmarks[2].'``.
        '''
        if not isinstance(record, Mapping):
            log_or_raise(
                f'{where or "record"} must be a JSON object'
                f', found {type(record).__name__}',
                WrongType, log, onerror=onerror,
            )
            return None

        valid = True
        unknown = set(record) - set(cls.__fields__)
        if unknown:
            valid = False
            log_or_raise(
                f'{where}unknown keys {sorted(unknown)}',
                UnknownKey, log, onerror=onerror,
            )

        missing = {k for k, f in cls.__fields__.items() if f.required} - set(record)
        if missing:
            valid = False
            log_or_raise(
                f'{where}missing required keys {sorted(missing)}',
                RequiredMissing, log, onerror=onerror,
            )

        result = {}
        for k, field in cls.__fields__.items():
            if k not in record:
                result[k] = copy.copy(field.default)
                continue
            # explicit null for an optional key means "use the default"
            if record[k] is None and not field.required:
                result[k] = copy.copy(field.default)
                continue
            valid &= field.validate(record[k], where=where, onerror=onerror)
            result[k] = record[k]

        return result if valid else None
