"""Turning ranked prompt contexts into N fixed-size repo contexts."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from repoctx.hole_gen import TargetHole, delimiter_tokenize, derive_seed
from repoctx.prompt_proposals import PPC, PRIOR

STRATEGIES = ("t_rank", "t_rand", "nt_rank", "nt_prior_last")
PAD = "pad"


class PackingError(ValueError):
    pass


@dataclass(frozen=True)
class PackingConfig:
    strategy: str = "nt_prior_last"
    n_contexts: int = 32
    context_len: int = 768
    include_surrounding: bool = True
    repeat_single: str | None = None
    seed: int = 0
    prefixes: bool = True

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise PackingError(f"unknown strategy {self.strategy!r}; expected one of {', '.join(STRATEGIES)}")
        if self.n_contexts < 1 or self.context_len < 1:
            raise PackingError("n_contexts and context_len must be >= 1")


@dataclass(frozen=True)
class RepoContext:
    slot_index: int
    ppc_name: str
    chunk_text: str
    formatted_text: str
    chunk_token_count: int


@dataclass
class PackedExample:
    hole: TargetHole
    rcs: list[RepoContext]
    target: str
    file_text: str | None = field(default=None, repr=False)

    @property
    def hole_id(self) -> str:
        return self.hole.hole_id


def _token_starts(text: str) -> list[int]:
    """Start offset of every token in `text`; newlines are tokens."""
    starts = []
    pos = 0
    for i, line in enumerate(text.split("\n")):
        if i:
            starts.append(pos - 1)
        starts.extend(pos + off for _, off in delimiter_tokenize(line))
        pos += len(line) + 1
    return starts


def count_tokens(text: str) -> int:
    return len(_token_starts(text))


def chunk_text(text: str, l: int) -> list[str]:
    """Split at token boundaries into pieces of exactly `l` tokens (last may be shorter).

    Pieces concatenate back to `text`; leading whitespace rides with the first piece.
    """
    if l < 1:
        raise PackingError("chunk length must be >= 1")
    starts = _token_starts(text)
    if not starts:
        return []
    cuts = [0] + [starts[i] for i in range(l, len(starts), l)] + [len(text)]
    return [text[a:b] for a, b in zip(cuts, cuts[1:])]


def chunk_ppc(ppc: PPC, l: int) -> list[str]:
    return chunk_text(ppc.text, l)


def format_rc(ppc_name: str, chunk: str, surrounding: str, include_surrounding: bool = True, prefixes: bool = True) -> str:
    parts = [f"rule_name: {ppc_name}", f"rule_context: {chunk}"] if prefixes else [chunk]
    if include_surrounding:
        parts.append(f"hole_context: {surrounding}")
    return "\n".join(parts)


def _slots(pairs: list[tuple[str, str]], hole: TargetHole, config: PackingConfig) -> list[RepoContext]:
    out = []
    for i, (name, chunk) in enumerate(pairs):
        text = format_rc(name, chunk, hole.surrounding_context, config.include_surrounding, config.prefixes)
        out.append(RepoContext(i, name, chunk, text, count_tokens(chunk)))
    return out


def _nt_chunks(ppcs: list[PPC], l: int, limit: int) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    for ppc in ppcs:
        for chunk in chunk_ppc(ppc, l):
            if len(out) == limit:
                return out
            out.append((ppc.name, chunk))
    return out


def _truncated(ppc: PPC, l: int) -> str:
    chunks = chunk_ppc(ppc, l)
    return chunks[0] if chunks else ""


def pack(hole: TargetHole, ranked_ppcs: list[PPC], config: PackingConfig) -> PackedExample:
    n, l = config.n_contexts, config.context_len
    pad = (PAD, "")

    if config.repeat_single is not None:
        match = [p for p in ranked_ppcs if p.name == config.repeat_single]
        if not match:
            raise PackingError(f"unknown proposal for repeat_single: {config.repeat_single!r}")
        ppc = match[0]
        if config.strategy.startswith("t_"):
            pieces = [_truncated(ppc, l)]
        else:
            pieces = chunk_ppc(ppc, l) or [""]
        pairs = [(ppc.name, pieces[i % len(pieces)]) for i in range(n)]
        return PackedExample(hole, _slots(pairs, hole, config), hole.hole_str)

    non_empty = [p for p in ranked_ppcs if p.text]
    if config.strategy in ("t_rank", "t_rand"):
        pairs = [(p.name, _truncated(p, l)) for p in non_empty[:n]]
        pairs += [pad] * (n - len(pairs))
        if config.strategy == "t_rand":
            random.Random(derive_seed(config.seed, hole.hole_id, "t_rand")).shuffle(pairs)
    elif config.strategy == "nt_rank":
        pairs = _nt_chunks(non_empty, l, n)
        pairs += [pad] * (n - len(pairs))
    else:
        prior = next((p for p in non_empty if p.name == PRIOR), None)
        rest = [p for p in non_empty if p.name != PRIOR]
        prior_pairs = [(PRIOR, c) for c in chunk_ppc(prior, l)] if prior else []
        if len(prior_pairs) >= n:
            pairs = prior_pairs[len(prior_pairs) - n :]
        else:
            head = _nt_chunks(rest, l, n - len(prior_pairs))
            pairs = head + [pad] * (n - len(prior_pairs) - len(head)) + prior_pairs
    return PackedExample(hole, _slots(pairs, hole, config), hole.hole_str)
