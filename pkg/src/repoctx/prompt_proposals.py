"""Prompt proposals: (source, context type) rules that extract repository
context for a hole, plus the prior/post contexts of the current file."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from repoctx import repo_model
from repoctx.hole_gen import TargetHole
from repoctx.repo_model import JavaLiteFacts, RepoIndex, SourceFile

SOURCES = ("current", "parent_class", "imports", "sibling", "similar_name")
CONTEXT_TYPES = (
    "prior_lines",
    "post_lines",
    "method_names_and_bodies",
    "method_names",
    "identifiers",
    "string_literals",
    "field_declarations",
)
_CURRENT_ONLY = ("prior_lines", "post_lines")

PRIOR = "current/prior_lines"
POST = "current/post_lines"


class RankingError(ValueError):
    pass


@dataclass(frozen=True)
class PromptProposal:
    source: str
    context_type: str

    def __post_init__(self):
        if self.source not in SOURCES or self.context_type not in CONTEXT_TYPES:
            raise ValueError(f"unknown proposal {self.source}/{self.context_type}")
        if self.context_type in _CURRENT_ONLY and self.source != "current":
            raise ValueError(f"{self.context_type} is only defined for the current file")

    @property
    def name(self) -> str:
        return f"{self.source}/{self.context_type}"

    @classmethod
    def parse(cls, name: str) -> "PromptProposal":
        source, sep, ctype = name.partition("/")
        if not sep:
            raise ValueError(f"malformed proposal name {name!r}")
        return cls(source, ctype)


@dataclass(frozen=True)
class PPC:
    name: str
    text: str
    origin_paths: tuple[str, ...] = ()


def all_proposals() -> list[PromptProposal]:
    out = []
    for src in SOURCES:
        for ctype in CONTEXT_TYPES:
            if ctype in _CURRENT_ONLY and src != "current":
                continue
            out.append(PromptProposal(src, ctype))
    return out


_RANK_TYPES = ("method_names_and_bodies", "method_names", "field_declarations", "string_literals", "identifiers")
_RANK_SOURCES = ("current", "similar_name", "imports", "sibling", "parent_class")


def default_ranking() -> list[PromptProposal]:
    """A fixed stand-in order; real deployments load a ranking file."""
    out = [PromptProposal.parse(POST), PromptProposal.parse(PRIOR)]
    out += [PromptProposal(src, t) for src in _RANK_SOURCES for t in _RANK_TYPES]
    return out


def parse_ranking(text: str) -> list[PromptProposal]:
    names = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            names.append(line)
    out, bad = [], []
    for name in names:
        try:
            out.append(PromptProposal.parse(name))
        except ValueError:
            bad.append(name)
    if bad:
        raise RankingError("unknown proposal names: " + ", ".join(bad))
    return out


def load_ranking(path) -> list[PromptProposal]:
    return parse_ranking(Path(path).read_text(encoding="utf-8"))


def format_ranking(ranking: list[PromptProposal]) -> str:
    return "".join(p.name + "\n" for p in ranking)


# ------------------------------------------------------------ extraction


def _hole_offset(file: SourceFile, hole: TargetHole) -> int:
    return file.line_start(hole.line_idx) + hole.char_start


def prior_ppc(hole: TargetHole, file: SourceFile) -> PPC:
    text = file.content[: _hole_offset(file, hole)]
    return PPC(PRIOR, text, (file.rel_path,) if text else ())


def post_ppc(hole: TargetHole, file: SourceFile) -> PPC:
    nxt = hole.line_idx + 1
    text = file.content[file.line_start(nxt) :] if nxt < len(file.line_spans) else ""
    return PPC(POST, text, (file.rel_path,) if text else ())


@lru_cache(maxsize=32)
def _without_hole(file: SourceFile, line_idx: int, char_start: int) -> tuple[SourceFile, JavaLiteFacts]:
    start = file.line_start(line_idx) + char_start
    end = file.line_spans[line_idx][1]
    masked = SourceFile.from_text(file.repo_id, file.rel_path, file.content[:start] + file.content[end:])
    return masked, repo_model.analyze_file(masked)


def _extract(ctype: str, file: SourceFile, facts: JavaLiteFacts) -> str:
    lines = file.lines
    if ctype == "method_names_and_bodies":
        return "\n".join(file.content[file.line_start(m.signature_lines[0]) : m.body_span[1]] for m in facts.method_spans)
    if ctype == "method_names":
        return "\n".join(
            "\n".join(lines[m.signature_lines[0] : m.signature_lines[1] + 1]) for m in facts.method_spans
        )
    if ctype == "identifiers":
        return " ".join(facts.identifiers)
    if ctype == "string_literals":
        return "\n".join(facts.string_literals)
    if ctype == "field_declarations":
        return "\n".join(lines[i] for i in facts.field_declaration_lines)
    raise ValueError(f"unsupported context type {ctype}")


def source_files(source: str, hole: TargetHole, index: RepoIndex) -> list[str]:
    rel = hole.rel_path
    if source == "current":
        return [rel]
    if source == "imports":
        return repo_model.import_files(index, rel)
    if source == "sibling":
        return repo_model.sibling_files(index, rel)
    if source == "similar_name":
        return repo_model.similar_name_files(index, rel)
    if source == "parent_class":
        return repo_model.parent_class_files(index, rel)
    raise ValueError(source)


def extract_ppc(proposal: PromptProposal, hole: TargetHole, index: RepoIndex) -> PPC:
    current = index.source(hole.rel_path)
    if proposal.context_type == "prior_lines":
        return prior_ppc(hole, current)
    if proposal.context_type == "post_lines":
        return post_ppc(hole, current)

    if proposal.source == "current":
        masked, facts = _without_hole(current, hole.line_idx, hole.char_start)
        text = _extract(proposal.context_type, masked, facts)
        return PPC(proposal.name, text, (hole.rel_path,) if text else ())

    parts, origins = [], []
    for rel in source_files(proposal.source, hole, index):
        sf, facts = index.files[rel]
        text = _extract(proposal.context_type, sf, facts)
        if text:
            parts.append(f"// file: {rel}\n{text}")
            origins.append(rel)
    return PPC(proposal.name, "\n".join(parts), tuple(origins))


def ranked_ppcs(hole: TargetHole, index: RepoIndex, ranking: list[PromptProposal] | None = None) -> list[PPC]:
    ranking = default_ranking() if ranking is None else ranking
    return [extract_ppc(p, hole, index) for p in ranking]
