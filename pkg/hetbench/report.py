'''
Effort tables, cross-framework effort ratios and time/energy comparisons.

Effort matrices have one row per application and one column per
``(suite, framework)`` pair, labeled ``"<suite>-<framework>"``, e.g.
``"Rodinia-OpenCL"``. Cells are optional, published tables are sparse.
'''
from collections import namedtuple
from dataclasses import asdict, dataclass, field
from pathlib import Path
import io
import logging
import math

import numpy as np
from astropy.io import ascii
from astropy.table import Column as TableColumn, MaskedColumn, Table

from .codestat import compute_effort, scan_tree
from .exceptions import EmptyComparison, ScanError, ValidationError, WrongValue
from .profiles import DATA_DIR, default_profiles
from .schema import Schema, Field
from .utils import dump_json, read_json


log = logging.getLogger(__name__)

PUBLISHED_EFFORT_PATH = DATA_DIR / 'published_effort.json'
TEXT_FORMAT = 'ascii.fixed_width_two_line'
STATS = ('mean', 'median', 'min', 'max', 'stddev')
METRICS = (('time_s', 'time'), ('energy_j', 'energy'))
LONG_COLUMNS = ('app', 'framework', 'metric', 'stat', 'value')

# application -> directory name in a Rodinia checkout
RODINIA_APPS = {
    'BFS': 'bfs',
    'CFD': 'cfd',
    'HotSpot': 'hotspot',
    'LUD': 'lud',
    'NW': 'nw',
    'B+Tree': 'b+tree',
    'GE': 'gaussian',
    'Heartwall': 'heartwall',
    'Kmeans': 'kmeans',
    'LavaMD': 'lavaMD',
    'SRAD': 'srad',
    'BP': 'backprop',
    'k-NN': 'nn',
    'Myocyte': 'myocyte',
    'PF': 'particlefilter',
    'SC': 'streamcluster',
}
RODINIA_FRAMEWORKS = ('OpenMP', 'OpenCL', 'CUDA')


class Column(namedtuple('Column', ['suite', 'framework'])):
    '''A ``(suite, framework)`` column of an effort matrix'''
    __slots__ = ()

    @classmethod
    def parse(cls, label):
        if isinstance(label, Column):
            return label
        if isinstance(label, (tuple, list)) and len(label) == 2:
            return cls(*label)
        suite, sep, framework = str(label).partition('-')
        if not sep or not suite or not framework:
            raise WrongValue(f'Column label {label!r} is not of the form <suite>-<framework>')
        return cls(suite, framework)

    @property
    def label(self):
        return f'{self.suite}-{self.framework}'


class MatrixRow(Schema):
    application = Field(type_=str, nonempty=True)
    effort = Field(type_=dict)


class MatrixDocument(Schema):
    description = Field(type_=str, required=False)
    columns = Field(item_type=str, nonempty=True)
    rows = Field(type_=list)


class EffortMatrix:
    '''
    Effort percentages per application and ``(suite, framework)`` column

    Attributes
    ----------
    rows: tuple of str
        application names, in display order
    columns: tuple of Column
        column keys, in display order
    cells: dict
        ``(application, Column)`` -> effort in percent, absent if unknown
    '''
    def __init__(self, rows=(), columns=(), cells=None):
        self.rows = tuple(rows)
        self.columns = tuple(Column.parse(c) for c in columns)
        self.cells = {}
        for (app, column), value in (cells or {}).items():
            self.set(app, column, value)

    def __repr__(self):
        return (
            f'{self.__class__.__name__}(rows={len(self.rows)},'
            f' columns={[c.label for c in self.columns]}, cells={len(self.cells)})'
        )

    def __eq__(self, other):
        return (
            isinstance(other, EffortMatrix)
            and self.rows == other.rows
            and self.columns == other.columns
            and self.cells == other.cells
        )

    def set(self, app, column, value):
        column = Column.parse(column)
        value = float(value)
        if not 0 <= value <= 100:
            raise WrongValue(f'Effort of {app} in {column.label} is {value}, not in [0, 100]')
        if app not in self.rows:
            self.rows += (app, )
        if column not in self.columns:
            self.columns += (column, )
        self.cells[(app, column)] = value

    def get(self, app, column):
        return self.cells.get((app, Column.parse(column)))

    def column_values(self, column):
        '''application -> effort of one column, present cells only, in row order'''
        column = Column.parse(column)
        if column not in self.columns:
            raise WrongValue(
                f'Unknown column {column.label!r},'
                f' available: {[c.label for c in self.columns]}'
            )
        return {
            app: self.cells[(app, column)]
            for app in self.rows if (app, column) in self.cells
        }

    @classmethod
    def from_json(cls, doc, source='<matrix>'):
        doc = MatrixDocument.validate(doc, where=f'{source}: ')
        columns = [Column.parse(c) for c in doc['columns']]
        labels = {c.label for c in columns}
        matrix = cls(columns=columns)
        for i, row in enumerate(doc['rows']):
            row = MatrixRow.validate(row, where=f'{source}: rows[{i}].')
            unknown = set(row['effort']) - labels
            if unknown:
                raise WrongValue(
                    f'{source}: rows[{i}] has cells for undeclared columns {sorted(unknown)}'
                )
            if row['application'] in matrix.rows:
                raise ValidationError(
                    f'{source}: rows[{i}] repeats application {row["application"]!r}'
                )
            matrix.rows += (row['application'], )
            for label, value in row['effort'].items():
                if value is None:
                    continue
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ValidationError(
                        f'{source}: rows[{i}].effort[{label!r}] must be a number'
                    )
                matrix.set(row['application'], label, value)
        return matrix

    def to_json(self):
        return {
            'columns': [c.label for c in self.columns],
            'rows': [
                {
                    'application': app,
                    'effort': {
                        c.label: self.cells[(app, c)]
                        for c in self.columns if (app, c) in self.cells
                    },
                }
                for app in self.rows
            ],
        }

    @classmethod
    def load(cls, path):
        return cls.from_json(read_json(path, what='effort matrix'), source=str(path))


def load_published_effort():
    '''The published effort table shipped with the package'''
    return EffortMatrix.load(PUBLISHED_EFFORT_PATH)


def matrix_from_stats(entries):
    '''
    Build a matrix from codestat JSON outputs.

    ``entries`` are ``(application, column, stats_json_path)``; the cell
    is the effort of the column's framework (lowercased) in that scan.
    '''
    matrix = EffortMatrix()
    for app, column, path in entries:
        column = Column.parse(column)
        doc = read_json(path, what='codestat output')
        try:
            value = doc['effort_percent'][column.framework.lower()]
        except (KeyError, TypeError):
            raise ValidationError(
                f'{path} has no effort_percent for {column.framework.lower()!r}'
            ) from None
        matrix.set(app, column, value)
    return matrix


@dataclass(frozen=True)
class RenderedTable:
    '''One table as text for humans, CSV and JSON'''
    table: Table
    text: str
    csv: str
    json: str


def _write(table, fmt):
    buf = io.StringIO()
    table.write(buf, format=fmt, fill_values=[(ascii.masked, '')])
    return buf.getvalue()


def _render(table, json_doc):
    return RenderedTable(
        table=table,
        text=_write(table, TEXT_FORMAT),
        csv=_write(table, 'ascii.csv'),
        json=dump_json(json_doc),
    )


def _masked(values, fmt=None, dtype=float):
    col = MaskedColumn(
        [0 if v is None else v for v in values],
        mask=[v is None for v in values],
        dtype=dtype,
    )
    if fmt is not None:
        col.format = fmt
    return col


def effort_table(matrix):
    '''Render a matrix, rows in input order, percentages to 2 decimals'''
    table = Table()
    table['application'] = TableColumn(list(matrix.rows), dtype=str)
    for column in matrix.columns:
        table[column.label] = _masked(
            [matrix.get(app, column) for app in matrix.rows], fmt='.2f',
        )

    doc = {
        'columns': [c.label for c in matrix.columns],
        'rows': [
            {
                'application': app,
                'effort': {
                    c.label: None if matrix.get(app, c) is None else round(matrix.get(app, c), 2)
                    for c in matrix.columns
                },
            }
            for app in matrix.rows
        ],
    }
    return _render(table, doc)


@dataclass(frozen=True)
class RatioSummary:
    '''
    Per-application effort ratios ``effort_a / effort_b``

    ``mean_of_ratios`` is the arithmetic mean of the per-application
    ratios; ``ratio_of_means`` is kept for comparison.
    '''
    a: Column
    b: Column
    ratios: dict = field(default_factory=dict)
    mean_of_ratios: float = math.nan
    ratio_of_means: float = math.nan
    excluded: tuple = ()

    @property
    def applications(self):
        return tuple(self.ratios)

    def to_dict(self):
        return {
            'a': self.a.label,
            'b': self.b.label,
            'applications': list(self.applications),
            'ratios': dict(self.ratios),
            'mean_of_ratios': self.mean_of_ratios,
            'ratio_of_means': self.ratio_of_means,
            'excluded': list(self.excluded),
        }


def effort_ratio(matrix, a, b, exclude=()):
    '''
    Compare the effort of column ``a`` against column ``b``.

    Only applications with both cells present, ``effort_b > 0`` and not in
    ``exclude`` take part. Raises ``EmptyComparison`` if none remains.
    '''
    a, b = Column.parse(a), Column.parse(b)
    values_a = matrix.column_values(a)
    values_b = matrix.column_values(b)
    exclude = tuple(exclude)

    apps = [
        app for app in matrix.rows
        if app in values_a and app in values_b
        and values_b[app] > 0 and app not in exclude
    ]
    if not apps:
        raise EmptyComparison(f'No application has both {a.label} and {b.label} effort')

    ratios = {app: values_a[app] / values_b[app] for app in apps}
    mean_a = np.mean([values_a[app] for app in apps])
    mean_b = np.mean([values_b[app] for app in apps])
    return RatioSummary(
        a=a,
        b=b,
        ratios=ratios,
        mean_of_ratios=float(np.mean(list(ratios.values()))),
        ratio_of_means=float(mean_a / mean_b),
        excluded=tuple(app for app in exclude if app in values_a and app in values_b),
    )


def default_comparisons():
    '''
    The headline comparisons of the published effort table as
    ``(a, b, exclude)``: OpenCL vs OpenACC on SPEC, OpenCL vs CUDA on
    Rodinia without BFS, OpenCL and CUDA vs OpenMP on Rodinia.
    '''
    return [
        ('SPEC-OpenCL', 'SPEC-OpenACC', ()),
        ('Rodinia-OpenCL', 'Rodinia-CUDA', ('BFS', )),
        ('Rodinia-OpenCL', 'Rodinia-OpenMP', ()),
        ('Rodinia-CUDA', 'Rodinia-OpenMP', ()),
    ]


def ratios_table(summaries):
    table = Table()
    table['a'] = TableColumn([s.a.label for s in summaries], dtype=str)
    table['b'] = TableColumn([s.b.label for s in summaries], dtype=str)
    table['n'] = TableColumn([len(s.ratios) for s in summaries], dtype=int)
    table['mean_of_ratios'] = _masked([s.mean_of_ratios for s in summaries], fmt='.2f')
    table['ratio_of_means'] = _masked([s.ratio_of_means for s in summaries], fmt='.2f')
    table['excluded'] = TableColumn(
        [' '.join(s.excluded) for s in summaries], dtype=str,
    )
    return _render(table, [s.to_dict() for s in summaries])


@dataclass(frozen=True)
class PerfTables:
    '''
    Time and energy comparison of benchmark summaries

    Attributes
    ----------
    rows: RenderedTable
        one row per application and framework
    by_application: dict
        application -> astropy Table of its frameworks
    long_csv: str
        ``app,framework,metric,stat,value`` rows for external plotting
    '''
    rows: RenderedTable
    by_application: dict
    long_csv: str


def perf_energy_table(summary):
    '''
    Group benchmark summaries by application, one row per framework.

    Applications and frameworks keep their order of first appearance.
    '''
    order = {}
    for row in summary:
        order.setdefault(row.name, []).append(row)
    ordered = [row for rows in order.values() for row in rows]

    table = Table()
    table['app'] = TableColumn([r.name for r in ordered], dtype=str)
    table['framework'] = TableColumn([r.framework for r in ordered], dtype=str)
    table['n'] = TableColumn([r.n for r in ordered], dtype=int)
    table['failures'] = TableColumn([r.failures for r in ordered], dtype=int)
    for metric, attr in METRICS:
        for stat in STATS:
            table[f'{metric}_{stat}'] = _masked(
                [
                    None if getattr(r, attr) is None else getattr(getattr(r, attr), stat)
                    for r in ordered
                ],
                fmt='.4f',
            )

    long_rows = [
        (r.name, r.framework, metric, stat, float(getattr(getattr(r, attr), stat)))
        for r in ordered
        for metric, attr in METRICS
        if getattr(r, attr) is not None
        for stat in STATS
    ]
    long = Table()
    for i, name in enumerate(LONG_COLUMNS):
        long[name] = TableColumn(
            [row[i] for row in long_rows], dtype=float if name == 'value' else str,
        )

    by_application = {
        app: table[[i for i, r in enumerate(ordered) if r.name == app]]
        for app in order
    }
    return PerfTables(
        rows=_render(table, summary.to_dict()),
        by_application=by_application,
        long_csv=_write(long, 'ascii.csv'),
    )


def regenerate_rodinia(root, profiles=None, apps=None, frameworks=RODINIA_FRAMEWORKS):
    '''
    Scan a Rodinia checkout laid out as ``<root>/<framework>/<app>`` and
    return the effort of each framework in its own implementation.
    Missing implementations are left as empty cells.
    '''
    if profiles is None:
        profiles = default_profiles()
    apps = RODINIA_APPS if apps is None else apps
    root = Path(root)
    if not root.is_dir():
        raise ScanError(f'Rodinia checkout {root} does not exist', path=str(root))

    matrix = EffortMatrix(rows=(), columns=[Column('Rodinia', f) for f in frameworks])
    for app, dirname in apps.items():
        for framework in frameworks:
            path = root / framework.lower() / dirname
            if not path.is_dir():
                log.info('No %s implementation of %s at %s', framework, app, path)
                continue
            effort = compute_effort(scan_tree(path, profiles))
            value = effort.effort.get(framework.lower())
            if value is not None:
                matrix.set(app, Column('Rodinia', framework), value)
    return matrix


@dataclass(frozen=True)
class CellDeviation:
    application: str
    column: str
    expected: float
    actual: float
    deviation: float
    within: bool


def compare_matrices(reference, regenerated, tolerance=2.0):
    '''Per-cell differences of all cells present in both matrices'''
    result = []
    for app in reference.rows:
        for column in reference.columns:
            expected = reference.get(app, column)
            actual = regenerated.get(app, column) if column in regenerated.columns else None
            if expected is None or actual is None:
                continue
            deviation = actual - expected
            result.append(CellDeviation(
                application=app,
                column=column.label,
                expected=expected,
                actual=actual,
                deviation=deviation,
                within=abs(deviation) <= tolerance,
            ))
    return result


def deviations_table(deviations):
    table = Table()
    table['application'] = TableColumn([d.application for d in deviations], dtype=str)
    table['column'] = TableColumn([d.column for d in deviations], dtype=str)
    for name in ('expected', 'actual', 'deviation'):
        table[name] = _masked([getattr(d, name) for d in deviations], fmt='.2f')
    table['within'] = TableColumn([d.within for d in deviations], dtype=bool)
    return _render(table, [asdict(d) for d in deviations])
