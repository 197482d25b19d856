"""Repository scanning and Java-lite structural facts.

A repository is indexed once into an immutable :class:`RepoIndex`; the
relation helpers (imports, siblings, similar names, parent classes) answer
"which other files are related to this one" for prompt extraction.
"""

from __future__ import annotations

import logging
import os
import posixpath
import re
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from repoctx import javalex
from repoctx.javalex import BLANK, CODE, PUNCT, WORD, Token

log = logging.getLogger(__name__)

DEFAULT_MAX_BYTES = 1 << 20

_CLASS_KEYWORDS = frozenset({"class", "interface", "enum", "record"})
# Words that may directly precede a call but never a declaration name.
_NOT_DECL_PREV = frozenset({"return", "new", "throw", "else", "case", "assert", "yield", "instanceof"})


class RepoScanError(OSError):
    pass


@dataclass(frozen=True)
class SourceFile:
    repo_id: str
    rel_path: str
    content: str
    line_spans: tuple[tuple[int, int], ...]

    @classmethod
    def from_text(cls, repo_id: str, rel_path: str, content: str) -> "SourceFile":
        spans = []
        start = 0
        for line in content.split("\n"):
            spans.append((start, start + len(line)))
            start += len(line) + 1
        return cls(repo_id, rel_path, content, tuple(spans))

    @property
    def lines(self) -> list[str]:
        return self.content.split("\n")

    def line(self, idx: int) -> str:
        s, e = self.line_spans[idx]
        return self.content[s:e]

    def line_start(self, idx: int) -> int:
        return self.line_spans[idx][0]


@dataclass(frozen=True)
class MethodSpan:
    name: str
    signature_lines: tuple[int, int]
    body_span: tuple[int, int]


@dataclass(frozen=True)
class JavaLiteFacts:
    package_name: str | None
    imports: tuple[str, ...]
    class_names: tuple[str, ...]
    extends_names: tuple[str, ...]
    method_spans: tuple[MethodSpan, ...]
    identifiers: tuple[str, ...]
    string_literals: tuple[str, ...]
    field_declaration_lines: tuple[int, ...]
    line_mask: tuple[str, ...]
    unbalanced: bool = False
    truncated: bool = False

    @property
    def method_names(self) -> list[str]:
        return [m.name for m in self.method_spans]


def _dedupe(items) -> tuple[str, ...]:
    return tuple(dict.fromkeys(items))


def _dotted_name(tokens: list[Token], i: int) -> tuple[str, int]:
    """Read `a.b.C` or `a.b.*` starting at token i; return (name, next index)."""
    parts = []
    while i < len(tokens):
        t = tokens[i]
        if t.kind == WORD or t.text == "*" or t.text == ".":
            parts.append(t.text)
            i += 1
        else:
            break
    return "".join(parts), i


def _class_header(tokens: list[Token], i: int, brackets: dict[int, int]):
    """Scan a class header from the token after the class keyword.

    Returns (class name, extends simple names, index of body `{` or None).
    """
    name = tokens[i].text if i < len(tokens) and tokens[i].kind == WORD else None
    extends: list[str] = []
    angle = 0
    collecting = False
    last_word = None
    j = i + 1
    while j < len(tokens):
        t = tokens[j]
        if t.kind == PUNCT:
            if t.text == "{" and angle == 0:
                break
            if t.text == ";":
                return name, extends, None
            if t.text == "<":
                angle += 1
            elif t.text == ">":
                angle -= 1
            elif t.text == "(" and j in brackets:
                j = brackets[j]  # record components
            elif t.text == "," and angle == 0 and collecting and last_word:
                extends.append(last_word)
                last_word = None
        elif t.kind == WORD and angle == 0:
            if t.text == "extends":
                collecting = True
            elif t.text in ("implements", "permits"):
                if collecting and last_word:
                    extends.append(last_word)
                collecting = False
                last_word = None
            elif collecting:
                last_word = t.text
        j += 1
    if collecting and last_word:
        extends.append(last_word)
    body = j if j < len(tokens) else None
    return name, extends, body


def analyze_file(file: SourceFile, max_bytes: int = DEFAULT_MAX_BYTES) -> JavaLiteFacts:
    content = file.content
    truncated = len(content.encode("utf-8")) > max_bytes
    if truncated:
        content = content.encode("utf-8")[:max_bytes].decode("utf-8", errors="ignore")
    tokens, mask = javalex.scan(content)
    n_lines = len(file.line_spans)
    if len(mask) < n_lines:
        mask = mask + [BLANK] * (n_lines - len(mask))
    brackets = javalex.match_brackets(tokens)

    package_name = None
    imports: list[str] = []
    class_names: list[str] = []
    extends_names: list[str] = []
    class_bodies: set[int] = set()

    depth = 0
    for i, t in enumerate(tokens):
        if t.kind == PUNCT:
            if t.text == "{":
                depth += 1
            elif t.text == "}":
                depth = max(0, depth - 1)
            continue
        if t.kind != WORD:
            continue
        if depth == 0 and t.text == "package" and package_name is None:
            package_name, _ = _dotted_name(tokens, i + 1)
        elif depth == 0 and t.text == "import":
            j = i + 1
            if j < len(tokens) and tokens[j].text == "static":
                j += 1
            name, _ = _dotted_name(tokens, j)
            if name:
                imports.append(name)
        elif t.text in _CLASS_KEYWORDS:
            prev = tokens[i - 1] if i > 0 else None
            if prev is not None and prev.text == ".":
                continue  # Foo.class
            if t.text == "record" and (i + 2 >= len(tokens) or tokens[i + 2].text not in ("(", "<")):
                continue  # `record` used as an ordinary identifier
            name, ext, body = _class_header(tokens, i + 1, brackets)
            if name is None:
                continue
            class_names.append(name)
            extends_names.extend(ext)
            if body is not None:
                class_bodies.add(body)

    methods, unbalanced = _find_methods(tokens, brackets, class_bodies, len(content))
    fields = _find_field_lines(tokens, class_bodies)

    return JavaLiteFacts(
        package_name=package_name or None,
        imports=tuple(imports),
        class_names=tuple(class_names),
        extends_names=_dedupe(extends_names),
        method_spans=tuple(methods),
        identifiers=_dedupe(t.text for t in tokens if t.is_identifier),
        string_literals=_dedupe(t.text for t in tokens if t.kind == javalex.STRING),
        field_declaration_lines=tuple(fields),
        line_mask=tuple(mask[:n_lines]),
        unbalanced=unbalanced,
        truncated=truncated,
    )


def _enclosing_class_body(tokens, class_bodies):
    """For every token index, whether its innermost enclosing brace is a class body."""
    stack: list[bool] = []
    out = []
    for i, t in enumerate(tokens):
        out.append(bool(stack) and stack[-1])
        if t.kind == PUNCT:
            if t.text == "{":
                stack.append(i in class_bodies)
            elif t.text == "}" and stack:
                stack.pop()
    return out


def _find_methods(tokens, brackets, class_bodies, text_len):
    in_class = _enclosing_class_body(tokens, class_bodies)
    methods = []
    unbalanced = False
    for k, t in enumerate(tokens[:-1]):
        if not t.is_identifier or tokens[k + 1].text != "(":
            continue
        if k == 0:
            continue
        prev = tokens[k - 1]
        if prev.text == "." or prev.text in _NOT_DECL_PREV:
            continue
        if not (prev.kind == WORD or prev.text in (">", "]") or (prev.text in (";", "{", "}") and in_class[k])):
            continue
        close = brackets.get(k + 1)
        if close is None:
            continue
        j = close + 1
        if j < len(tokens) and tokens[j].text == "throws":
            j += 1
            while j < len(tokens) and (tokens[j].kind == WORD or tokens[j].text in ".,<>"):
                j += 1
        if j >= len(tokens) or tokens[j].text != "{":
            continue
        brace = tokens[j]
        end_idx = brackets.get(j)
        if end_idx is None:
            unbalanced = True
            body_end = text_len
        else:
            body_end = tokens[end_idx].end
        methods.append(MethodSpan(t.text, (t.line, brace.line), (brace.start, body_end)))
    return methods, unbalanced


def _find_field_lines(tokens, class_bodies) -> list[int]:
    """Lines of statements directly inside a class body that end with `;` and
    are not method declarations (no `(` before the first `=`)."""
    lines: set[int] = set()
    # Each frame: [is_class_body, statement token list]
    frames: list[list] = []
    for i, t in enumerate(tokens):
        top = frames[-1] if frames else None
        if t.kind == PUNCT and t.text == "{":
            if top is not None and top[0]:
                top[1].append(t)
            frames.append([i in class_bodies, []])
            continue
        if t.kind == PUNCT and t.text == "}":
            if frames:
                frames.pop()
            top = frames[-1] if frames else None
            if top is not None and top[0]:
                # Keep a statement alive across an initializer `{...}`.
                if not any(x.text == "=" for x in top[1]):
                    top[1] = []
            continue
        if top is None or not top[0]:
            continue
        if t.kind == PUNCT and t.text == ";":
            stmt = top[1]
            top[1] = []
            if not stmt:
                continue
            texts = _strip_annotations([x.text for x in stmt])
            eq = texts.index("=") if "=" in texts else len(texts)
            if not texts or "(" in texts[:eq]:
                continue
            lines.update(range(stmt[0].line, t.line + 1))
            continue
        top[1].append(t)
    return sorted(lines)


def _strip_annotations(texts: list[str]) -> list[str]:
    out = []
    i = 0
    while i < len(texts):
        if texts[i] != "@":
            out.append(texts[i])
            i += 1
            continue
        i += 1
        while i < len(texts) and (texts[i] == "." or texts[i - 1] in ("@", ".")):
            i += 1
        if i < len(texts) and texts[i] == "(":
            depth = 0
            while i < len(texts):
                depth += {"(": 1, ")": -1}.get(texts[i], 0)
                i += 1
                if depth == 0:
                    break
    return out


# ---------------------------------------------------------------- index


_CAMEL = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+")


def name_tokens(rel_path: str) -> frozenset[str]:
    """Split a file name on camelCase boundaries, digits and underscores."""
    stem = posixpath.basename(rel_path)
    if stem.endswith(".java"):
        stem = stem[: -len(".java")]
    return frozenset(m.group(0).lower() for m in _CAMEL.finditer(stem))


@dataclass(frozen=True)
class RepoIndex:
    repo_id: str
    root: str
    files: dict[str, tuple[SourceFile, JavaLiteFacts]]
    import_edges: dict[str, tuple[str, ...]]
    dir_index: dict[str, tuple[str, ...]]
    name_token_index: dict[str, tuple[str, ...]]
    class_index: dict[str, tuple[str, ...]]
    skipped: tuple[str, ...] = field(default=())

    def source(self, rel_path: str) -> SourceFile:
        return self.files[rel_path][0]

    def facts(self, rel_path: str) -> JavaLiteFacts:
        return self.files[rel_path][1]

    @property
    def paths(self) -> list[str]:
        return list(self.files)


def _read_one(args):
    repo_id, root, rel, max_bytes = args
    raw = Path(root, rel).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        return rel, None, None
    sf = SourceFile.from_text(repo_id, rel, text)
    return rel, sf, analyze_file(sf, max_bytes)


def _list_java(root: Path) -> list[str]:
    found = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in filenames:
            if name.endswith(".java"):
                rel = Path(dirpath, name).relative_to(root).as_posix()
                found.append(rel)
    return sorted(found)


def scan_repo(root_path, repo_id: str | None = None, max_bytes: int = DEFAULT_MAX_BYTES, jobs: int = 1) -> RepoIndex:
    root = Path(root_path)
    if not root.is_dir() or not os.access(root, os.R_OK | os.X_OK):
        raise RepoScanError(f"not a readable directory: {root}")
    repo_id = repo_id or root.name
    rels = _list_java(root)
    work = [(repo_id, str(root), rel, max_bytes) for rel in rels]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_read_one, work, chunksize=8))
    else:
        results = [_read_one(w) for w in work]

    files: dict[str, tuple[SourceFile, JavaLiteFacts]] = {}
    skipped = []
    for rel, sf, facts in results:
        if sf is None:
            log.warning("skipping undecodable file %s/%s", repo_id, rel)
            skipped.append(rel)
        else:
            files[rel] = (sf, facts)
    return build_index(repo_id, str(root), files, skipped)


def build_index(repo_id: str, root: str, files: dict, skipped=()) -> RepoIndex:
    dir_index: dict[str, list[str]] = defaultdict(list)
    token_index: dict[str, list[str]] = defaultdict(list)
    class_index: dict[str, list[str]] = defaultdict(list)
    for rel, (_, facts) in files.items():
        dir_index[posixpath.dirname(rel)].append(rel)
        for tok in name_tokens(rel):
            token_index[tok].append(rel)
        stem = posixpath.basename(rel)[: -len(".java")]
        primary = facts.class_names[0] if facts.class_names else stem
        class_index[primary].append(rel)
        if stem != primary:
            class_index[stem].append(rel)
    index = RepoIndex(
        repo_id=repo_id,
        root=root,
        files=dict(sorted(files.items())),
        import_edges={},
        dir_index={k: tuple(sorted(v)) for k, v in sorted(dir_index.items())},
        name_token_index={k: tuple(sorted(v)) for k, v in sorted(token_index.items())},
        class_index={k: tuple(sorted(set(v))) for k, v in sorted(class_index.items())},
        skipped=tuple(skipped),
    )
    index.import_edges.update({rel: tuple(resolve_imports(index, rel)) for rel in index.files})
    return index


def _resolve_one(index: RepoIndex, dotted: str) -> list[str]:
    parts = dotted.split(".")
    if parts[-1] == "*":
        pkg_dir = "/".join(parts[:-1])
        return [
            rel
            for d, rels in index.dir_index.items()
            if d == pkg_dir or d.endswith("/" + pkg_dir)
            for rel in rels
        ]
    suffix = "/".join(parts) + ".java"
    hits = [rel for rel in index.files if rel == suffix or rel.endswith("/" + suffix)]
    if hits:
        return hits
    simple = parts[-1] + ".java"
    return [rel for rel in index.files if posixpath.basename(rel) == simple]


def resolve_imports(index: RepoIndex, file: str) -> list[str]:
    facts = index.facts(file)
    found: set[str] = set()
    for dotted in facts.imports:
        hits = _resolve_one(index, dotted)
        if not hits and dotted.count(".") >= 1 and not dotted.endswith("*"):
            # static member import: resolve the owning class
            hits = _resolve_one(index, dotted.rsplit(".", 1)[0])
        found.update(hits)
    found.discard(file)
    return sorted(found)


def similar_name_files(index: RepoIndex, file: str) -> list[str]:
    out: set[str] = set()
    for tok in name_tokens(file):
        out.update(index.name_token_index.get(tok, ()))
    out.discard(file)
    return sorted(out)


def sibling_files(index: RepoIndex, file: str) -> list[str]:
    return [rel for rel in index.dir_index.get(posixpath.dirname(file), ()) if rel != file]


def parent_class_files(index: RepoIndex, file: str) -> list[str]:
    out: list[str] = []
    for name in index.facts(file).extends_names:
        for rel in index.class_index.get(name, ()):
            if rel != file and rel not in out:
                out.append(rel)
    return out


def import_files(index: RepoIndex, file: str) -> list[str]:
    return list(index.import_edges.get(file, ()))
