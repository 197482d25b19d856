"""Lexical (Okapi BM25) and embedding (RandomNN) repository retrieval."""

from __future__ import annotations

import math
import random
import zlib
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from repoctx.hole_gen import TargetHole, delimiter_tokenize, derive_seed
from repoctx.repo_model import RepoIndex


def text_tokens(text: str) -> list[str]:
    return [tok for line in text.split("\n") for tok, _ in delimiter_tokenize(line)]


@dataclass(frozen=True)
class ScoredFile:
    rel_path: str
    score: float


@dataclass(frozen=True)
class Chunk:
    rel_path: str
    line_start: int
    line_end: int
    text: str

    @property
    def chunk_id(self) -> str:
        return f"{self.rel_path}:{self.line_start}-{self.line_end}"


class BM25Index:
    """Okapi BM25 over a fixed document set with IDF ln((N-n+.5)/(n+.5)+1).

    Scoring can leave one document out; N, average length and document
    frequencies are then computed as if it were absent.
    """

    def __init__(self, docs: dict[str, list[str]], k1: float = 1.5, b: float = 0.75):
        self.k1 = k1
        self.b = b
        self.tf = {key: Counter(toks) for key, toks in docs.items()}
        self.length = {key: len(toks) for key, toks in docs.items()}
        self.total_len = sum(self.length.values())
        self.df: Counter = Counter()
        for tf in self.tf.values():
            self.df.update(tf.keys())

    def idf(self, term: str, exclude: str | None = None) -> float:
        n_docs = len(self.tf) - (1 if exclude in self.tf else 0)
        n = self.df.get(term, 0)
        if exclude in self.tf and term in self.tf[exclude]:
            n -= 1
        return math.log((n_docs - n + 0.5) / (n + 0.5) + 1.0)

    def scores(self, query: list[str], exclude: str | None = None) -> dict[str, float]:
        keys = [k for k in self.tf if k != exclude]
        if not keys:
            return {}
        total = self.total_len - (self.length[exclude] if exclude in self.length else 0)
        avgdl = total / len(keys)
        out = {k: 0.0 for k in keys}
        if avgdl == 0:
            return out
        for term in query:
            idf = self.idf(term, exclude)
            for k in keys:
                f = self.tf[k].get(term, 0)
                if not f:
                    continue
                norm = self.k1 * (1 - self.b + self.b * self.length[k] / avgdl)
                out[k] += idf * f * (self.k1 + 1) / (f + norm)
        return out


def bm25_index(index: RepoIndex, k1: float = 1.5, b: float = 0.75) -> BM25Index:
    return BM25Index({rel: text_tokens(sf.content) for rel, (sf, _) in index.files.items()}, k1, b)


def bm25_rank(hole: TargetHole, index: RepoIndex, k1: float = 1.5, b: float = 0.75, bm25: BM25Index | None = None) -> list[ScoredFile]:
    """Score every non-current file against the hole's surrounding context."""
    bm25 = bm25 or bm25_index(index, k1, b)
    scores = bm25.scores(text_tokens(hole.surrounding_context), exclude=hole.rel_path)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [ScoredFile(rel, s) for rel, s in ranked]


# ----------------------------------------------------------- RandomNN


class Embedder(Protocol):
    def __call__(self, text: str) -> np.ndarray: ...


def _bucket(token: str, dim: int) -> int:
    return zlib.crc32(token.encode("utf-8")) % dim


def embed_bag(text: str, dim: int = 1024) -> np.ndarray:
    """L2-normalised hashed bag of delimiter tokens."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    vec = np.zeros(dim)
    for tok in text_tokens(text):
        vec[_bucket(tok, dim)] += 1.0
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def repo_chunks(index: RepoIndex, exclude: str | None = None, chunk_lines: int = 10) -> list[Chunk]:
    out = []
    for rel, (sf, _) in index.files.items():
        if rel == exclude:
            continue
        lines = sf.lines
        for start in range(0, len(lines), chunk_lines):
            end = min(start + chunk_lines, len(lines))
            out.append(Chunk(rel, start, end, "\n".join(lines[start:end])))
    return out


def random_nn(
    hole: TargetHole,
    index: RepoIndex,
    k: int,
    chunk_lines: int = 10,
    n_candidates: int = 512,
    seed: int = 0,
    embedder: Callable[[str], np.ndarray] = embed_bag,
) -> list[tuple[Chunk, float]]:
    """Top-k randomly sampled chunks by cosine similarity to the surrounding context."""
    if k > n_candidates:
        raise ValueError("k must not exceed n_candidates")
    pool = repo_chunks(index, hole.rel_path, chunk_lines)
    if len(pool) > n_candidates:
        rng = random.Random(derive_seed(seed, hole.hole_id, "random_nn"))
        pool = [pool[i] for i in sorted(rng.sample(range(len(pool)), n_candidates))]
    query = embedder(hole.surrounding_context)
    scored = [(c, cosine(embedder(c.text), query)) for c in pool]
    scored.sort(key=lambda cs: (-cs[1], cs[0].rel_path, cs[0].line_start))
    return scored[:k]
