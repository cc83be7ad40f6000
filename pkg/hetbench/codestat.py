'''
Lines-of-code attribution per parallel framework.

A scan counts code lines (``loc_total``) and, per framework, the code
lines that contain one of its markers (``loc_par``).
The parallelization effort of a framework is ``100 * loc_par / loc_total``.
'''
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fnmatch import fnmatchcase
from pathlib import Path
import logging
import os

from astropy.table import Table

from .exceptions import ScanError, BinaryFileSkipped, UnreadableFile
from .lexer import CODE, LineClass, partition_lines
from .profiles import default_profiles
from .utils import log_or_raise


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CodeStats:
    '''
    Per-file or aggregate line counts

    Attributes
    ----------
    loc_total: int
        number of code lines
    loc_par: dict
        framework name -> number of code lines attributed to it
    files_scanned: int
        number of files that contributed to the counts
    per_file: tuple
        ``(path, CodeStats)`` pairs of an aggregate, sorted by path
    skipped: tuple
        paths of files skipped because of binary content
    errors: tuple
        ``(path, message)`` pairs of files that could not be read
    '''
    loc_total: int = 0
    loc_par: dict = field(default_factory=dict)
    files_scanned: int = 0
    per_file: tuple = ()
    skipped: tuple = ()
    errors: tuple = ()

    @classmethod
    def empty(cls, profiles, **kwargs):
        return cls(loc_par={p.name: 0 for p in profiles}, **kwargs)

    @classmethod
    def merge(cls, items, profiles):
        '''Aggregate ``(path, CodeStats)`` pairs into one CodeStats'''
        items = sorted(items, key=lambda item: item[0])
        loc_par = {p.name: 0 for p in profiles}
        loc_total = files = 0
        skipped = []
        errors = []
        per_file = []

        for path, stats in items:
            loc_total += stats.loc_total
            files += stats.files_scanned
            for name, count in stats.loc_par.items():
                loc_par[name] = loc_par.get(name, 0) + count
            skipped.extend(stats.skipped)
            errors.extend(stats.errors)
            if stats.files_scanned:
                per_file.append((path, stats))

        return cls(
            loc_total=loc_total,
            loc_par=loc_par,
            files_scanned=files,
            per_file=tuple(per_file),
            skipped=tuple(skipped),
            errors=tuple(errors),
        )

    def to_dict(self, effort=None):
        '''JSON-compatible representation, effort taken from ``compute_effort``'''
        if effort is None:
            effort = compute_effort(self)
        return {
            'loc_total': self.loc_total,
            'files_scanned': self.files_scanned,
            'loc_par': dict(sorted(self.loc_par.items())),
            'effort_percent': dict(sorted(effort.effort.items())),
            'degenerate': effort.degenerate,
            'per_file': [
                {
                    'path': path,
                    'loc_total': stats.loc_total,
                    'loc_par': dict(sorted(stats.loc_par.items())),
                }
                for path, stats in self.per_file
            ],
            'skipped': list(self.skipped),
            'errors': [{'path': p, 'message': m} for p, m in self.errors],
        }


@dataclass(frozen=True)
class EffortReport:
    '''
    Parallelization effort per framework in percent

    ``degenerate`` is set when there were no code lines at all,
    in which case every effort is reported as 0.
    '''
    effort: dict
    loc_total: int = 0
    degenerate: bool = False


def classify_line(code_text, profiles):
    '''Return the names of all frameworks with a marker in ``code_text``'''
    return frozenset(p.name for p in profiles if p.matches(code_text))


def classify_lines(lines, profiles, extension):
    '''
    Attribute the code lines of one file to frameworks.

    ``lines`` are ``LineClass`` objects from ``partition_lines``.
    Only profiles that list ``extension`` take part. Whole-file
    profiles get every code line, a directive ending in a backslash
    extends to the following code lines of the same logical statement.
    '''
    scanned = [p for p in profiles if extension in p.extensions]
    whole = frozenset(
        p.name for p in profiles if extension in p.whole_file_extensions
    )

    result = []
    continued = frozenset()
    for line in lines:
        if line.kind != CODE:
            continued = frozenset()
            result.append(line)
            continue

        frameworks = set(whole) | continued
        directives = set()
        for p in scanned:
            if p.name in continued or p.matches_directive(line.text):
                directives.add(p.name)
                frameworks.add(p.name)
            elif p.matches(line.text):
                frameworks.add(p.name)

        continued = frozenset(directives) if line.text.endswith('\\') else frozenset()
        result.append(LineClass(line.line_no, CODE, frozenset(frameworks), line.text))

    return result


def count_lines(lines, profiles):
    loc_total = sum(1 for line in lines if line.kind == CODE)
    loc_par = {p.name: 0 for p in profiles}
    for line in lines:
        for name in line.frameworks:
            loc_par[name] += 1
    return loc_total, loc_par


def classify_source(source_text, profiles, extension):
    '''Count the lines of one in-memory source, see ``classify_file``'''
    lines = classify_lines(partition_lines(source_text), profiles, extension)
    loc_total, loc_par = count_lines(lines, profiles)
    return CodeStats(loc_total=loc_total, loc_par=loc_par, files_scanned=1)


def classify_file(path, profiles=None, onerror='raise'):
    '''
    Count the code lines of a single file and attribute them to frameworks.

    Raises ``ScanError`` if the file cannot be read. Files containing NUL
    bytes are skipped with a ``BinaryFileSkipped`` warning and yield
    empty counts with the path recorded in ``skipped``.
    '''
    if profiles is None:
        profiles = default_profiles()

    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ScanError(f'Cannot read {path}: {e.strerror or e}', path=str(path)) from e

    if b'\0' in data:
        log_or_raise(
            f'Skipping binary file {path}', BinaryFileSkipped, log, onerror=onerror,
        )
        return CodeStats.empty(profiles, skipped=(str(path), ))

    stats = classify_source(data, profiles, path.suffix.lower())
    log.debug('%s: loc_total=%d loc_par=%s', path, stats.loc_total, stats.loc_par)
    return stats


def _match_segments(parts, pattern_parts):
    if not pattern_parts:
        return not parts
    head, rest = pattern_parts[0], pattern_parts[1:]
    if head == '**':
        return any(_match_segments(parts[i:], rest) for i in range(len(parts) + 1))
    return bool(parts) and fnmatchcase(parts[0], head) and _match_segments(parts[1:], rest)


def match_glob(rel_path, pattern):
    '''
    Match a relative posix path against a glob.

    ``*``, ``?`` and ``[...]`` follow ``fnmatch`` within one path segment,
    a ``**`` segment spans any number of directories (including none).
    '''
    return _match_segments(tuple(rel_path.split('/')), tuple(pattern.split('/')))


def matches_any(rel_path, patterns):
    '''
    True if the relative posix path matches one of the globs.
    Patterns without a slash are also tried against the file name.
    '''
    name = rel_path.rsplit('/', 1)[-1]
    for pattern in patterns:
        if match_glob(rel_path, pattern):
            return True
        if '/' not in pattern and match_glob(name, pattern):
            return True
    return False


def iter_source_files(root, profiles, include_globs=(), exclude_globs=()):
    '''
    Yield ``(relative posix path, absolute path)`` of all files below
    ``root`` with an extension known to some profile, in path order.
    '''
    extensions = set()
    for p in profiles:
        extensions |= p.all_extensions

    found = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in filenames:
            full = Path(dirpath) / name
            rel = full.relative_to(root).as_posix()
            if full.suffix.lower() not in extensions:
                continue
            if include_globs and not matches_any(rel, include_globs):
                continue
            if exclude_globs and matches_any(rel, exclude_globs):
                continue
            found.append((rel, full))

    yield from sorted(found)


def scan_tree(
    root, profiles=None, include_globs=(), exclude_globs=(), workers=1,
    onerror='log',
):
    '''
    Recursively count lines of code below ``root``.

    Files are selected by profile extensions, then by the include globs
    (all files if empty) and the exclude globs. Unreadable files are
    reported with an ``UnreadableFile`` warning and listed in ``errors``;
    they never abort the scan.
    With ``workers > 1`` files are classified on a thread pool; the result
    does not depend on the number of workers.
    '''
    if profiles is None:
        profiles = default_profiles()

    root = Path(root)
    if not root.is_dir():
        raise ScanError(f'Source tree {root} does not exist', path=str(root))

    files = list(iter_source_files(root, profiles, include_globs, exclude_globs))
    log.info('Scanning %d files below %s', len(files), root)

    def scan(item):
        rel, full = item
        try:
            stats = classify_file(full, profiles, onerror=onerror)
            if stats.skipped:
                stats = replace(stats, skipped=(rel, ))
            return rel, stats
        except ScanError as e:
            log_or_raise(str(e), UnreadableFile, log, onerror=onerror)
            return rel, CodeStats.empty(profiles, errors=((rel, str(e)), ))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(scan, files))
    else:
        results = [scan(item) for item in files]

    return CodeStats.merge(results, profiles)


def compute_effort(stats):
    '''Parallelization effort ``100 * loc_par / loc_total`` per framework'''
    if stats.loc_total == 0:
        return EffortReport(
            effort={name: 0.0 for name in stats.loc_par},
            loc_total=0,
            degenerate=True,
        )

    effort = {
        name: 100 * count / stats.loc_total
        for name, count in stats.loc_par.items()
    }
    return EffortReport(effort=effort, loc_total=stats.loc_total)


def stats_table(stats, effort=None):
    '''Tabulate a scan as one row per framework'''
    if effort is None:
        effort = compute_effort(stats)

    names = sorted(stats.loc_par)
    table = Table()
    table['framework'] = names
    table['loc_par'] = [stats.loc_par[n] for n in names]
    table['loc_total'] = [stats.loc_total] * len(names)
    table['effort_percent'] = [effort.effort[n] for n in names]
    table['effort_percent'].format = '.2f'
    table.meta['files_scanned'] = stats.files_scanned
    return table
