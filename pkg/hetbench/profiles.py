'''
Framework profiles: the marker sets that attribute source lines to a
parallel programming framework.

A profile config is a JSON array of objects, one per framework::

    [{"name": "openmp",
      "extensions": [".c", ".cpp"],
      "directive_markers": ["#pragma omp"],
      "call_markers": ["omp_*"]}]

Call markers are identifiers matched at identifier boundaries.
``name`` matches exactly, ``prefix*`` matches any identifier starting
with ``prefix`` and ``prefix[A-Z]*`` additionally requires the character
after the prefix to be in the bracketed class.
'''
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
import json
import logging
import re

from .exceptions import DuplicateName, ValidationError, WrongType, WrongValue
from .schema import Schema, Field
from .utils import log_or_raise


log = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / 'data'
PROFILE_DIR = DATA_DIR / 'profiles'
DEFAULT_PROFILE_NAMES = ('openmp', 'openacc', 'opencl', 'cuda')

IDENTIFIER_CHARS = 'A-Za-z0-9_'
NAME_RE = re.compile(r'^[a-z][a-z0-9_+-]*$')
EXTENSION_RE = re.compile(r'^\.[a-z0-9_+-]+$')
CALL_MARKER_RE = re.compile(r'^([A-Za-z_][A-Za-z0-9_]*)(\[[^\[\]]+\])?(\*)?$')


def normalize_directive(text):
    '''Collapse whitespace runs and the space in ``# pragma``'''
    return re.sub(r'^#\s*', '#', ' '.join(text.split()))


def call_marker_pattern(marker):
    '''Translate a call marker into a regular expression source'''
    m = CALL_MARKER_RE.match(marker)
    if m is None:
        raise WrongValue(f'Invalid call marker {marker!r}')

    name, char_class, star = m.groups()
    if char_class is not None and star is None:
        raise WrongValue(
            f'Call marker {marker!r}: a character class requires a trailing "*"'
        )

    pattern = rf'(?<![{IDENTIFIER_CHARS}]){re.escape(name)}'
    if char_class is not None:
        pattern += char_class
    if star is None:
        pattern += rf'(?![{IDENTIFIER_CHARS}])'
    return pattern


class ProfileRecord(Schema):
    name = Field(type_=str, nonempty=True)
    extensions = Field(item_type=str, nonempty=True, required=False, default=[])
    whole_file_extensions = Field(
        item_type=str, nonempty=True, required=False, default=[],
    )
    directive_markers = Field(item_type=str, nonempty=True, required=False, default=[])
    call_markers = Field(item_type=str, nonempty=True, required=False, default=[])
    syntax_markers = Field(item_type=str, nonempty=True, required=False, default=[])


@dataclass(frozen=True)
class FrameworkProfile:
    '''
    The configurable marker set defining one parallel framework.

    Attributes
    ----------
    name: str
        lowercase framework identifier, e.g. ``"openmp"``
    extensions: frozenset of str
        dot-prefixed extensions of files scanned for this framework's markers
    whole_file_extensions: frozenset of str
        extensions of files attributed to this framework in their entirety
    directive_markers: tuple of str
        statement prefixes matched after leading whitespace
    call_markers: tuple of str
        identifier markers matched at identifier boundaries
    syntax_markers: tuple of str
        literal tokens matched anywhere in the code text
    '''
    name: str
    extensions: frozenset = field(default_factory=frozenset)
    whole_file_extensions: frozenset = field(default_factory=frozenset)
    directive_markers: tuple = ()
    call_markers: tuple = ()
    syntax_markers: tuple = ()

    def __post_init__(self):
        # accept any iterable, store hashable immutable containers
        for attr, kind in (
            ('extensions', frozenset), ('whole_file_extensions', frozenset),
            ('directive_markers', tuple), ('call_markers', tuple),
            ('syntax_markers', tuple),
        ):
            object.__setattr__(self, attr, kind(getattr(self, attr)))

        if not isinstance(self.name, str) or not NAME_RE.match(self.name):
            raise WrongValue(
                f'Framework name must be a nonempty lowercase token, got {self.name!r}'
            )

        for ext in self.extensions | self.whole_file_extensions:
            if not EXTENSION_RE.match(ext):
                raise WrongValue(
                    f'Profile {self.name!r}: extension {ext!r} must be'
                    ' dot-prefixed and lowercase'
                )

        overlap = self.extensions & self.whole_file_extensions
        if overlap:
            raise WrongValue(
                f'Profile {self.name!r}: extensions {sorted(overlap)} are listed'
                ' both as scanned and as whole-file extensions'
            )

        for marker in self.directive_markers + self.call_markers + self.syntax_markers:
            if not marker or not marker.strip():
                raise WrongValue(f'Profile {self.name!r} has an empty marker')
            if not marker.isascii():
                raise WrongValue(
                    f'Profile {self.name!r}: marker {marker!r} is not ASCII'
                )

        # fail early on bad call markers
        self._call_re

    @property
    def all_extensions(self):
        return self.extensions | self.whole_file_extensions

    @cached_property
    def _directives(self):
        return tuple(normalize_directive(d) for d in self.directive_markers)

    @cached_property
    def _call_re(self):
        if not self.call_markers:
            return None
        return re.compile(
            '|'.join(call_marker_pattern(m) for m in self.call_markers), re.ASCII,
        )

    def matches_directive(self, code_text):
        '''True if the line starts with one of the directive markers'''
        if not self._directives:
            return False
        line = normalize_directive(code_text)
        return any(line.startswith(d) for d in self._directives)

    def matches(self, code_text):
        '''True if any marker of this profile occurs in the masked code text'''
        if self.matches_directive(code_text):
            return True
        if self._call_re is not None and self._call_re.search(code_text):
            return True
        return any(s in code_text for s in self.syntax_markers)

    def to_dict(self):
        return {
            'name': self.name,
            'extensions': sorted(self.extensions),
            'whole_file_extensions': sorted(self.whole_file_extensions),
            'directive_markers': list(self.directive_markers),
            'call_markers': list(self.call_markers),
            'syntax_markers': list(self.syntax_markers),
        }


def parse_profiles(text, source='<config>', onerror='raise'):
    '''
    Parse profile config text.

    Empty text or an empty array yields the built-in default profiles.
    '''
    if not text.strip():
        return default_profiles()

    try:
        records = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(
            f'Malformed profile config {source}: line {e.lineno},'
            f' column {e.colno}: {e.msg}'
        ) from None

    if not isinstance(records, list):
        raise WrongType(
            f'Profile config {source} must be a JSON array of objects'
            f', found {type(records).__name__}'
        )
    if not records:
        return default_profiles()

    profiles = []
    seen = set()
    for i, record in enumerate(records):
        where = f'{source}: profiles[{i}].'
        values = ProfileRecord.validate(record, where=where, onerror=onerror)
        if values is None:
            continue

        try:
            profile = FrameworkProfile(**values)
        except ValidationError as e:
            log_or_raise(f'{where[:-1]}: {e}', type(e), log, onerror=onerror)
            continue

        if profile.name in seen:
            log_or_raise(
                f'{where[:-1]}: duplicate framework name {profile.name!r}',
                DuplicateName, log, onerror=onerror,
            )
            continue

        seen.add(profile.name)
        profiles.append(profile)

    log.debug('Loaded profiles %s from %s', [p.name for p in profiles], source)
    return profiles


def load_profiles(config_source=None, onerror='raise'):
    '''
    Load framework profiles.

    ``config_source`` is a path, an open text file or None for the
    built-in OpenMP, OpenACC, OpenCL and CUDA profiles.
    '''
    if config_source is None:
        return default_profiles()

    if hasattr(config_source, 'read'):
        name = getattr(config_source, 'name', '<stream>')
        return parse_profiles(config_source.read(), source=name, onerror=onerror)

    path = Path(config_source)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ValidationError(f'Cannot read profile config {path}: {e}') from None
    return parse_profiles(text, source=str(path), onerror=onerror)


@lru_cache(maxsize=None)
def _default_profiles():
    profiles = []
    for name in DEFAULT_PROFILE_NAMES:
        path = PROFILE_DIR / f'{name}.json'
        profiles.extend(
            parse_profiles(path.read_text(encoding='utf-8'), source=str(path))
        )
    return tuple(profiles)


def default_profiles():
    '''The shipped OpenMP, OpenACC, OpenCL and CUDA profiles'''
    return list(_default_profiles())
