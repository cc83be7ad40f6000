import json
import os
import string
from pathlib import Path

import numpy as np
import pytest
from hetbench.exceptions import BinaryFileSkipped, ScanError, UnreadableFile


FIXTURES = Path(__file__).parent / 'fixtures'

# source pieces with the frameworks they must be attributed to in a .c file
CODE_PIECES = [
    ('x = y + 1;', ()),
    ('close(fd);', ()),
    ('t = clock();', ()),
    ('my_omp_init();', ()),
    ('accumulate(a, n);', ()),
    ('xcudaMalloc(p);', ()),
    ('cl_int err;', ()),
    ('__globalize();', ()),
    ("n = 1'000'000;", ()),
    ("m = 0xFF'FF;", ()),
    ('s = "cudaMalloc /* omp_get_wtime";', ()),
    ('e = "a \\" clFinish";', ()),
    ("c = '\"';", ()),
    ("d = '/';", ()),
    ('omp_get_wtime();', ('openmp', )),
    ('acc_wait(1);', ('openacc', )),
    ('clFinish(queue);', ('opencl', )),
    ('if (e != CL_SUCCESS) {', ('opencl', )),
    ('__local float *tile;', ('opencl', )),
    ('cudaFree(p);', ('cuda', )),
    ('__syncthreads();', ('cuda', )),
    ('k<<<grid, block>>>(a);', ('cuda', )),
    ('__global__ void k(float *a);', ('cuda', )),
]
DIRECTIVES = [
    ('#pragma omp parallel for', ('openmp', )),
    ('  #  pragma omp barrier', ('openmp', )),
    ('#pragma acc kernels loop', ('openacc', )),
    ('#pragma once', ()),
]
INLINE_COMMENTS = ['/* clFinish(q); */', '/**/', '/* "acc_wait( */']
LINE_COMMENTS = ['// cudaFree(p)', '//#pragma omp parallel', "// don't /* open"]
COMMENT_TEXT = [
    '', 'cudaMalloc(&p, n);', '"unterminated', "it's", '// nested',
    '#pragma omp parallel', '* bullet',
]


IDENTIFIER_FRAGMENTS = [
    'cuda', 'omp_', 'omp', 'acc_', 'acc', 'cl', 'CL_', 'CL', 'Finish', 'ose',
    'x', '_', '1', 'A', '__global', '__local', '__syncthreads', '__',
]


def pick(rng, items):
    return items[rng.integers(len(items))]


def random_identifier(rng):
    return ''.join(pick(rng, IDENTIFIER_FRAGMENTS) for _ in range(rng.integers(1, 4)))


def is_identifier_char(c):
    return c in string.ascii_letters or c in string.digits or c == '_'


def scan_call_marker(text, marker):
    '''Try every position of ``text`` for an occurrence of a call marker'''
    star = marker.endswith('*')
    name = marker.rstrip('*')
    allowed = None
    if name.endswith(']'):
        name, char_range = name[:-1].split('[')
        first, last = char_range.split('-')
        allowed = {chr(c) for c in range(ord(first), ord(last) + 1)}

    for i in range(len(text)):
        if i > 0 and is_identifier_char(text[i - 1]):
            continue
        if not text.startswith(name, i):
            continue
        end = i + len(name)
        if allowed is not None:
            if end < len(text) and text[end] in allowed:
                return True
        elif star or end == len(text) or not is_identifier_char(text[end]):
            return True
    return False


def scan_frameworks(text, profiles):
    return {
        p.name for p in profiles
        if any(scan_call_marker(text, m) for m in p.call_markers)
        or any(s in text for s in p.syntax_markers)
    }


def random_pieces(rng, profiles):
    '''Code and inline comment pieces for one line, with the line's kind and frameworks'''
    parts = []
    kind = 'blank'
    frameworks = set()
    for _ in range(rng.integers(0, 5)):
        r = rng.random()
        if r < 0.2:
            parts.append(pick(rng, INLINE_COMMENTS))
            if kind == 'blank':
                kind = 'comment'
            continue
        if r < 0.6:
            text = f'{random_identifier(rng)}({random_identifier(rng)});'
            names = scan_frameworks(text, profiles)
        else:
            text, names = pick(rng, CODE_PIECES)
        parts.append(text)
        frameworks.update(names)
        kind = 'code'
    return parts, kind, frameworks


def random_source(rng, n_lines, profiles):
    '''
    Lines assembled from pieces of known classification, together with
    the expected ``(kind, frameworks)`` of every line
    '''
    lines = []
    expected = []
    while len(lines) < n_lines:
        indent = pick(rng, ['', '    ', '\t'])

        if rng.random() < 0.15:
            # block comment spanning lines
            parts, kind, frameworks = random_pieces(rng, profiles)
            parts.append('/* ' + pick(rng, COMMENT_TEXT))
            lines.append(indent + ' '.join(parts))
            expected.append(('code', frameworks) if kind == 'code' else ('comment', set()))

            for _ in range(rng.integers(0, 3)):
                lines.append(pick(rng, COMMENT_TEXT))
                expected.append(('comment', set()))

            parts, kind, frameworks = random_pieces(rng, profiles)
            lines.append(' '.join([pick(rng, COMMENT_TEXT) + ' */'] + parts))
            expected.append(('code', frameworks) if kind == 'code' else ('comment', set()))
            continue

        parts, kind, frameworks = random_pieces(rng, profiles)
        if rng.random() < 0.25:
            text, names = pick(rng, DIRECTIVES)
            parts.insert(0, text)
            frameworks.update(names)
            kind = 'code'
        if rng.random() < 0.3:
            parts.append(pick(rng, LINE_COMMENTS))
            if kind == 'blank':
                kind = 'comment'
        lines.append(indent + ' '.join(parts))
        expected.append((kind, frameworks if kind == 'code' else set()))

    return lines, expected


def test_mini_omp():
    from hetbench.codestat import scan_tree, compute_effort

    stats = scan_tree(FIXTURES / 'mini-omp')
    assert stats.loc_total == 20
    assert stats.loc_par['openmp'] == 3
    effort = compute_effort(stats)
    assert not effort.degenerate
    assert effort.effort['openmp'] == pytest.approx(15.0)
    assert effort.effort['cuda'] == 0


def test_corpus():
    from hetbench.codestat import scan_tree

    expected = json.loads((FIXTURES / 'corpus_expected.json').read_text())
    stats = scan_tree(FIXTURES / 'corpus')

    assert stats.loc_total == expected['loc_total']
    assert stats.loc_par == expected['loc_par']
    assert stats.files_scanned == expected['files_scanned']
    assert list(stats.skipped) == expected['skipped']
    assert stats.errors == ()

    per_file = {
        path: {'loc_total': s.loc_total, 'loc_par': s.loc_par}
        for path, s in stats.per_file
    }
    assert per_file == expected['per_file']


def test_workers_do_not_change_result():
    from hetbench.codestat import scan_tree

    serial = scan_tree(FIXTURES / 'corpus', workers=1)
    parallel = scan_tree(FIXTURES / 'corpus', workers=4)
    assert serial == parallel


def test_profile_order_does_not_change_result():
    from hetbench.codestat import scan_tree
    from hetbench.profiles import default_profiles

    profiles = default_profiles()
    forward = scan_tree(FIXTURES / 'corpus', profiles)
    backward = scan_tree(FIXTURES / 'corpus', profiles[::-1])
    assert forward.loc_par == backward.loc_par
    assert forward.loc_total == backward.loc_total
    assert dict(forward.per_file) == dict(backward.per_file)


def test_whole_file_attribution():
    from hetbench.codestat import classify_source
    from hetbench.profiles import default_profiles

    source = '__kernel void k(int n)\n{\n    // comment\n    int i = 0;\n}\n'
    stats = classify_source(source, default_profiles(), '.cl')
    assert stats.loc_total == 4
    assert stats.loc_par == {'openmp': 0, 'openacc': 0, 'opencl': 4, 'cuda': 0}


def test_directive_continuation():
    from hetbench.codestat import classify_source
    from hetbench.profiles import default_profiles

    source = (
        '#pragma omp parallel for \\\n'
        '    private(i) \\\n'
        '    shared(a)\n'
        'for (i = 0; i < n; i++) a[i] = i;\n'
        '#pragma omp barrier\n'
    )
    stats = classify_source(source, default_profiles(), '.c')
    assert stats.loc_total == 5
    assert stats.loc_par['openmp'] == 4


def test_continuation_stops_at_comment_line():
    from hetbench.codestat import classify_source
    from hetbench.profiles import default_profiles

    source = '#pragma acc kernels \\\n// interrupted\nx = 1;\n'
    stats = classify_source(source, default_profiles(), '.c')
    assert stats.loc_total == 2
    assert stats.loc_par['openacc'] == 1


def test_extension_selects_profiles():
    from hetbench.codestat import classify_source
    from hetbench.profiles import default_profiles

    profiles = default_profiles()
    source = 'cudaMalloc(&p, n);\n#pragma omp parallel\n'
    on_cu = classify_source(source, profiles, '.cu')
    on_c = classify_source(source, profiles, '.c')
    assert on_cu.loc_par['cuda'] == 1 and on_cu.loc_par['openmp'] == 0
    assert on_c.loc_par['cuda'] == 1 and on_c.loc_par['openmp'] == 1


def test_generated_sources():
    from hetbench.codestat import classify_lines, classify_source
    from hetbench.lexer import partition_lines
    from hetbench.profiles import default_profiles

    profiles = default_profiles()
    rng = np.random.default_rng(1337)

    for _ in range(500):
        lines, expected = random_source(rng, rng.integers(0, 40), profiles)

        source = ''.join(line + '\n' for line in lines)
        classified = classify_lines(partition_lines(source), profiles, '.c')
        actual = [(line.kind, set(line.frameworks)) for line in classified]
        assert actual == expected, source

        loc_total = sum(kind == 'code' for kind, _ in expected)
        loc_par = {
            p.name: sum(p.name in frameworks for _, frameworks in expected)
            for p in profiles
        }
        newline = '\r\n' if rng.random() < 0.2 else '\n'
        stats = classify_source(newline.join(lines), profiles, '.c')
        assert stats.loc_total == loc_total, source
        assert stats.loc_par == loc_par, source
        assert all(v <= stats.loc_total for v in stats.loc_par.values())


def test_classify_file_binary(tmp_path):
    from hetbench.codestat import classify_file

    path = tmp_path / 'blob.c'
    path.write_bytes(b'int x;\0\1')
    with pytest.warns(BinaryFileSkipped):
        stats = classify_file(path)
    assert stats.loc_total == 0
    assert stats.files_scanned == 0
    assert stats.skipped == (str(path), )


def test_classify_file_missing(tmp_path):
    from hetbench.codestat import classify_file

    with pytest.raises(ScanError) as e:
        classify_file(tmp_path / 'nope.c')
    assert e.value.path == str(tmp_path / 'nope.c')


def test_scan_tree_unreadable_file(tmp_path):
    from hetbench.codestat import scan_tree

    (tmp_path / 'ok.c').write_text('int x;\n')
    os.symlink(tmp_path / 'does-not-exist.c', tmp_path / 'dangling.c')

    stats = scan_tree(tmp_path)
    assert stats.loc_total == 1
    assert [path for path, _ in stats.errors] == ['dangling.c']

    with pytest.warns(UnreadableFile):
        scan_tree(tmp_path, onerror='raise')


def test_scan_tree_missing_root(tmp_path):
    from hetbench.codestat import scan_tree

    with pytest.raises(ScanError):
        scan_tree(tmp_path / 'missing')


def test_scan_tree_globs():
    from hetbench.codestat import scan_tree

    root = FIXTURES / 'corpus'
    only_cl = scan_tree(root, include_globs=['**/*.cl'])
    assert only_cl.files_scanned == 1
    assert only_cl.loc_par['opencl'] == 7

    no_common = scan_tree(root, exclude_globs=['common/*'])
    assert no_common.files_scanned == 11
    assert no_common.skipped == ()

    headers = scan_tree(root, include_globs=['*.h', '*.cuh'])
    assert [path for path, _ in headers.per_file] == ['common/timer.h', 'cuda/util.cuh']


@pytest.mark.parametrize('pattern, path, expected', [
    ('**/*.cl', 'kernels.cl', True),
    ('**/*.cl', 'a/b/kernels.cl', True),
    ('*.c', 'a/b/main.c', True),
    ('common/*', 'common/timer.h', True),
    ('common/*', 'common/sub/timer.h', False),
    ('common/**', 'common/sub/timer.h', True),
    ('src/?.c', 'src/a.c', True),
    ('src/[!a].c', 'src/a.c', False),
    ('src/*.c', 'src/sub/a.c', False),
    ('a/**/b.c', 'a/b.c', True),
    ('a/**/b.c', 'a/x/y/b.c', True),
    ('**', 'a/b.c', True),
    ('*.C', 'main.c', False),
])
def test_matches_any(pattern, path, expected):
    from hetbench.codestat import matches_any

    assert matches_any(path, [pattern]) is expected


def test_compute_effort_degenerate(tmp_path):
    from hetbench.codestat import scan_tree, compute_effort

    (tmp_path / 'only_comments.c').write_text('// nothing here\n\n/* or here */\n')
    effort = compute_effort(scan_tree(tmp_path))
    assert effort.degenerate
    assert effort.loc_total == 0
    assert set(effort.effort.values()) == {0.0}


def test_merge_and_to_dict():
    from hetbench.codestat import CodeStats
    from hetbench.profiles import default_profiles

    profiles = default_profiles()
    a = CodeStats(loc_total=10, loc_par={'openmp': 2}, files_scanned=1)
    b = CodeStats(loc_total=5, loc_par={'cuda': 5}, files_scanned=1)
    merged = CodeStats.merge([('b.cu', b), ('a.c', a)], profiles)

    assert merged.loc_total == 15
    assert merged.loc_par == {'openmp': 2, 'openacc': 0, 'opencl': 0, 'cuda': 5}
    assert [path for path, _ in merged.per_file] == ['a.c', 'b.cu']

    doc = merged.to_dict()
    assert doc['effort_percent']['cuda'] == pytest.approx(100 / 3)
    assert doc['degenerate'] is False
    assert json.loads(json.dumps(doc)) == doc


def test_stats_table():
    from hetbench.codestat import scan_tree, stats_table

    table = stats_table(scan_tree(FIXTURES / 'mini-omp'))
    assert list(table['framework']) == ['cuda', 'openacc', 'opencl', 'openmp']
    row = table[table['framework'] == 'openmp'][0]
    assert row['loc_par'] == 3
    assert row['effort_percent'] == pytest.approx(15.0)
    assert table.meta['files_scanned'] == 1


@pytest.mark.parametrize('text, expected', [
    ('#pragma omp parallel for reduction(+:s)', {'openmp'}),
    ('kernel<<<grid, block>>>(d_a, n);', {'cuda'}),
    ('int x = my_omp_helper();', set()),
    ('clSetKernelArg(k, 0, sizeof(cl_mem), &buf);', {'opencl'}),
])
def test_classify_line(text, expected):
    from hetbench.codestat import classify_line
    from hetbench.profiles import default_profiles

    assert classify_line(text, default_profiles()) == expected


def test_six_line_file_and_kernel(tmp_path):
    from hetbench.codestat import classify_file, compute_effort, scan_tree

    (tmp_path / 'main.c').write_text(
        'int main(void) {\n'
        '\n'
        '    // run in parallel\n'
        '#pragma omp parallel\n'
        '    work();\n'
        '}\n'
    )
    kernel_lines = []
    for i in range(10):
        kernel_lines.append(f'    x{i} = {i};')
        if i % 4 == 0:
            kernel_lines.append(f'    // step {i}')
    (tmp_path / 'kernel.cl').write_text('\n'.join(kernel_lines) + '\n')

    main = classify_file(tmp_path / 'main.c')
    assert main.loc_total == 4
    assert main.loc_par['openmp'] == 1

    kernel = classify_file(tmp_path / 'kernel.cl')
    assert kernel.loc_total == 10
    assert kernel.loc_par['opencl'] == 10

    both = scan_tree(tmp_path)
    assert both.loc_total == 14
    assert both.loc_par['openmp'] == 1
    assert both.loc_par['opencl'] == 10

    assert scan_tree(tmp_path, exclude_globs=['**/*.cl']).loc_total == 4

    effort = compute_effort(both)
    assert effort.effort['opencl'] == pytest.approx(100 * 10 / 14)


def test_empty_directory(tmp_path):
    from hetbench.codestat import compute_effort, scan_tree

    stats = scan_tree(tmp_path)
    assert stats.loc_total == 0
    assert stats.files_scanned == 0
    assert compute_effort(stats).degenerate


@pytest.mark.parametrize('loc_total, loc_par, expected', [
    (100, {'openmp': 10}, {'openmp': 10.0}),
    (1234, {'opencl': 60}, {'opencl': 100 * 60 / 1234}),
])
def test_compute_effort(loc_total, loc_par, expected):
    from hetbench.codestat import CodeStats, compute_effort

    effort = compute_effort(CodeStats(loc_total=loc_total, loc_par=loc_par))
    assert effort.effort == pytest.approx(expected)
    assert not effort.degenerate
