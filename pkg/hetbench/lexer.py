'''
Line partitioning for C-family sources.

Each physical line is labeled blank, comment or code. String and
character literal contents are masked with spaces and comments are
replaced by a single space, so that marker matching on the resulting
code text never sees text inside comments or literals.
'''
from dataclasses import dataclass, field


BLANK = 'blank'
COMMENT = 'comment'
CODE = 'code'
KINDS = (BLANK, COMMENT, CODE)

# lexer states
_NORMAL = 0
_BLOCK = 1
_STRING = 2


@dataclass(frozen=True)
class LineClass:
    '''
    Classification of one physical source line

    Attributes
    ----------
    line_no: int
        1-based line index
    kind: str
        one of ``'blank'``, ``'comment'``, ``'code'``
    frameworks: frozenset of str
        names of the frameworks this line is attributed to
    text: str
        the code text with comments removed and literals masked,
        empty for blank and comment lines
    '''
    line_no: int
    kind: str
    frameworks: frozenset = field(default_factory=frozenset)
    text: str = ''

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f'Invalid line kind {self.kind!r}')
        object.__setattr__(self, 'frameworks', frozenset(self.frameworks))
        if self.kind != CODE and self.frameworks:
            raise ValueError(f'{self.kind} line {self.line_no} cannot have frameworks')


def split_lines(text):
    '''Split on newline, dropping the empty tail after a final newline'''
    if not text:
        return []
    lines = text.split('\n')
    if lines[-1] == '':
        lines.pop()
    return [line[:-1] if line.endswith('\r') else line for line in lines]


def _is_digit_separator(line, i):
    '''True for the quote in numeric literals like ``1'000'000`` or ``0xFF'FF``'''
    if i + 1 >= len(line) or not line[i + 1].isalnum():
        return False
    start = i
    while start > 0 and (line[start - 1].isalnum() or line[start - 1] in "_.'"):
        start -= 1
    return start < i and line[start].isdigit()


def partition_lines(source_text, c_family=True):
    '''
    Label each line of ``source_text`` as blank, comment or code.

    ``source_text`` may be bytes, which are decoded byte-for-byte
    (latin-1) so that non-ASCII bytes stay opaque.
    With ``c_family=False`` no comment syntax is recognized and every
    non-blank line is code.

    Returns a list of ``LineClass`` with empty framework sets.
    '''
    if isinstance(source_text, (bytes, bytearray)):
        source_text = bytes(source_text).decode('latin-1')

    result = []
    state = _NORMAL
    quote = None

    for line_no, line in enumerate(split_lines(source_text), start=1):
        if not c_family:
            kind = CODE if line.strip() else BLANK
            result.append(LineClass(line_no, kind, text=line if kind == CODE else ''))
            continue

        code = []
        has_code = False
        # a line that starts inside a block comment is part of that comment
        has_comment = state == _BLOCK
        i = 0
        n = len(line)

        while i < n:
            if state == _BLOCK:
                end = line.find('*/', i)
                if end < 0:
                    i = n
                    break
                code.append(' ')
                state = _NORMAL
                i = end + 2
                continue

            c = line[i]
            if state == _STRING:
                if c == '\\':
                    code.append('  '[:n - i])
                    i += 2
                    continue
                if c == quote:
                    code.append(c)
                    state = _NORMAL
                else:
                    code.append(' ')
                i += 1
                continue

            if c == '/' and line.startswith('//', i):
                has_comment = True
                break
            if c == '/' and line.startswith('/*', i):
                has_comment = True
                state = _BLOCK
                i += 2
                continue
            if c == "'" and _is_digit_separator(line, i):
                has_code = True
            elif c == '"' or c == "'":
                quote = c
                state = _STRING
                has_code = True
            elif not c.isspace():
                has_code = True
            code.append(c)
            i += 1

        # literals end at the line end, unterminated ones included
        if state == _STRING:
            state = _NORMAL

        if has_code:
            result.append(LineClass(line_no, CODE, text=''.join(code).rstrip()))
        elif has_comment:
            result.append(LineClass(line_no, COMMENT))
        else:
            result.append(LineClass(line_no, BLANK))

    return result
