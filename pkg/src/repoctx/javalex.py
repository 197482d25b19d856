"""Lexical scanner for a forgiving subset of Java.

The scanner never raises: unterminated literals stop at end of line and
unterminated block comments run to end of input.
"""

from __future__ import annotations

from dataclasses import dataclass

CODE = "code"
BLANK = "blank"
LINE_COMMENT = "line_comment"
BLOCK_COMMENT = "block_comment"

WORD, STRING, CHAR, NUMBER, PUNCT = "word", "string", "char", "number", "punct"

KEYWORDS = frozenset(
    """
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package
    private protected public return short static strictfp super switch
    synchronized this throw throws transient try void volatile while
    true false null var record yield sealed permits non
    """.split()
)

_SPACE = " \t\r\f\v"


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    start: int
    end: int
    line: int

    @property
    def is_identifier(self) -> bool:
        return self.kind == WORD and self.text not in KEYWORDS


def _is_ident_start(c: str) -> bool:
    return c.isalpha() or c in "_$"


def _is_ident_part(c: str) -> bool:
    return c.isalnum() or c in "_$"


def scan(text: str) -> tuple[list[Token], list[str]]:
    """Tokenize `text`, returning code tokens and a per-line mask."""
    n = len(text)
    n_lines = text.count("\n") + 1
    has_code = [False] * n_lines
    has_line_comment = [False] * n_lines
    has_block_comment = [False] * n_lines
    tokens: list[Token] = []
    i = 0
    line = 0

    def emit(kind: str, start: int, end: int) -> None:
        nonlocal line
        tokens.append(Token(kind, text[start:end], start, end, line))
        newlines = text.count("\n", start, end)
        for k in range(line, line + newlines + 1):
            has_code[k] = True
        line += newlines

    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
        elif c in _SPACE:
            i += 1
        elif text.startswith("//", i):
            j = text.find("\n", i)
            j = n if j < 0 else j
            has_line_comment[line] = True
            i = j
        elif text.startswith("/*", i):
            j = text.find("*/", i + 2)
            end = n if j < 0 else j + 2
            newlines = text.count("\n", i, end)
            for k in range(line, line + newlines + 1):
                has_block_comment[k] = True
            line += newlines
            i = end
        elif text.startswith('"""', i):
            j = i + 3
            while True:
                j = text.find('"""', j)
                if j < 0:
                    j = n
                    break
                if text[j - 1] != "\\":
                    j += 3
                    break
                j += 1
            emit(STRING, i, j)
            i = j
        elif c == '"' or c == "'":
            j = i + 1
            while j < n and text[j] != c and text[j] != "\n":
                j += 2 if text[j] == "\\" else 1
            j = min(j, n)
            end = j + 1 if j < n and text[j] == c else j
            emit(STRING if c == '"' else CHAR, i, end)
            i = end
        elif _is_ident_start(c):
            j = i + 1
            while j < n and _is_ident_part(text[j]):
                j += 1
            emit(WORD, i, j)
            i = j
        elif c.isdigit():
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] in "._"):
                j += 1
            emit(NUMBER, i, j)
            i = j
        else:
            emit(PUNCT, i, i + 1)
            i += 1

    mask = []
    for k in range(n_lines):
        if has_code[k]:
            mask.append(CODE)
        elif has_block_comment[k]:
            mask.append(BLOCK_COMMENT)
        elif has_line_comment[k]:
            mask.append(LINE_COMMENT)
        else:
            mask.append(BLANK)
    return tokens, mask


def match_brackets(tokens: list[Token]) -> dict[int, int]:
    """Map the index of each opening `(`/`{`/`[` to its closing partner.

    Unmatched openers are absent from the result.
    """
    pairs = {"(": ")", "{": "}", "[": "]"}
    closers = {v: k for k, v in pairs.items()}
    stacks: dict[str, list[int]] = {k: [] for k in pairs}
    out: dict[int, int] = {}
    for idx, tok in enumerate(tokens):
        if tok.kind != PUNCT:
            continue
        if tok.text in pairs:
            stacks[tok.text].append(idx)
        elif tok.text in closers:
            stack = stacks[closers[tok.text]]
            if stack:
                out[stack.pop()] = idx
    return out
