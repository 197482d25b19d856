"""Lossless delimiter tokenizer and vocabulary for the toy model."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

PAD, BOS, EOS, NEWLINE, UNK = "<pad>", "<bos>", "<eos>", "\n", "<unk>"
SPECIALS = (PAD, BOS, EOS, NEWLINE, UNK)

# Delimiters are single tokens, space runs are one token, so joining the
# tokens back together reproduces the text exactly.
_TOKEN = re.compile(r'[.()\[\]{},:";]| +|\n|[^.()\[\]{},:"; \n]+')


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text)


def detokenize(tokens: Iterable[str]) -> str:
    return "".join(tokens)


@dataclass(frozen=True)
class Vocab:
    itos: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "_stoi", {t: i for i, t in enumerate(self.itos)})

    def __len__(self) -> int:
        return len(self.itos)

    def id(self, token: str) -> int:
        return self._stoi.get(token, self._stoi[UNK])

    @property
    def pad_id(self) -> int:
        return self._stoi[PAD]

    @property
    def bos_id(self) -> int:
        return self._stoi[BOS]

    @property
    def eos_id(self) -> int:
        return self._stoi[EOS]

    @property
    def newline_id(self) -> int:
        return self._stoi[NEWLINE]

    def encode(self, text: str) -> list[int]:
        return [self.id(t) for t in tokenize(text)]

    def decode(self, ids: Iterable[int]) -> str:
        skip = {self.pad_id, self.bos_id, self.eos_id}
        return detokenize(self.itos[i] for i in ids if i not in skip)


def build_vocab(corpus: Iterable[str]) -> Vocab:
    """Specials first, then tokens by descending frequency, ties lexicographic."""
    counts: Counter = Counter()
    for text in corpus:
        counts.update(tokenize(text))
    for s in SPECIALS:
        counts.pop(s, None)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocab(SPECIALS + tuple(t for t, _ in ordered))
