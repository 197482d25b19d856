"""Training, greedy decoding and persistence for the toy FiD model."""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from repoctx.fid.model import Batch, ModelConfig, decode_states, encode, init_params, loss_and_grad, param_shapes
from repoctx.fid.vocab import Vocab, build_vocab
from repoctx.hole_gen import derive_seed, generate_holes
from repoctx.packing import PackedExample, PackingConfig, pack
from repoctx.prompt_proposals import ranked_ppcs
from repoctx.repo_model import scan_repo

log = logging.getLogger(__name__)

MAX_NEW_TOKENS = 128
PARAMS_FILE = "params.bin"
MANIFEST_FILE = "params.json"
LOSS_FILE = "loss.csv"


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, value: float):
        super().__init__(f"loss became {value} at step {step}")
        self.step = step


@dataclass(frozen=True)
class ToyExample:
    rc_ids: np.ndarray  # (N, L)
    rc_mask: np.ndarray  # (N, L)
    target_ids: tuple[int, ...]  # without bos/eos
    target: str = ""


def rc_texts(packed: PackedExample) -> list[str]:
    return [rc.formatted_text for rc in packed.rcs]


def to_toy(packed: PackedExample, vocab: Vocab, cfg: ModelConfig) -> ToyExample:
    """Encode a packed example; each RC keeps its last `max_rc_tokens` tokens
    so the hole context at its end survives."""
    texts = rc_texts(packed)
    if len(texts) != cfg.n_contexts:
        raise ValueError(f"example has {len(texts)} contexts, model expects {cfg.n_contexts}")
    L = cfg.max_rc_tokens
    ids = np.full((cfg.n_contexts, L), vocab.pad_id, dtype=np.int64)
    mask = np.zeros((cfg.n_contexts, L), dtype=bool)
    for i, text in enumerate(texts):
        toks = vocab.encode(text)[-L:]
        ids[i, : len(toks)] = toks
        mask[i, : len(toks)] = True
    target = tuple(vocab.encode(packed.target)[: cfg.max_target_tokens])
    return ToyExample(ids, mask, target, packed.target)


def make_batch(examples: list[ToyExample], vocab: Vocab) -> Batch:
    T = max(len(ex.target_ids) for ex in examples) + 1
    B = len(examples)
    tgt_in = np.full((B, T), vocab.pad_id, dtype=np.int64)
    tgt_out = np.full((B, T), vocab.pad_id, dtype=np.int64)
    tgt_mask = np.zeros((B, T), dtype=bool)
    for b, ex in enumerate(examples):
        seq = list(ex.target_ids)
        tgt_in[b, : len(seq) + 1] = [vocab.bos_id, *seq]
        tgt_out[b, : len(seq) + 1] = [*seq, vocab.eos_id]
        tgt_mask[b, : len(seq) + 1] = True
    return Batch(
        np.stack([ex.rc_ids for ex in examples]),
        np.stack([ex.rc_mask for ex in examples]),
        tgt_in,
        tgt_out,
        tgt_mask,
    )


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float = 1e-3, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    losses: list[float] = field(default_factory=list)


def train(
    examples: list[ToyExample],
    cfg: ModelConfig,
    vocab: Vocab,
    steps: int,
    lr: float = 1e-3,
    batch_size: int = 10,
    seed: int = 0,
    init_std: float = 0.02,
) -> TrainResult:
    """Minibatch Adam on teacher-forced cross-entropy.

    Batches walk a fresh seeded shuffle of the data each epoch.
    """
    if not examples:
        raise ValueError("no training examples")
    params = init_params(cfg, seed, init_std)
    opt = Adam(params, lr)
    rng = random.Random(derive_seed(seed, "batches"))
    order: list[int] = []
    losses = []
    for step in range(1, steps + 1):
        if len(order) < min(batch_size, len(examples)):
            perm = list(range(len(examples)))
            rng.shuffle(perm)
            order.extend(perm)
        idx, order = order[:batch_size], order[batch_size:]
        value, grads = loss_and_grad(params, cfg, make_batch([examples[i] for i in idx], vocab))
        if not math.isfinite(value):
            raise TrainingDiverged(step, value)
        opt.step(params, grads)
        losses.append(value)
        if step % 100 == 0:
            log.info("step %d loss %.5f", step, value)
    return TrainResult(params, losses)


@dataclass(frozen=True)
class Completion:
    text: str
    truncated: bool


def greedy_decode(
    params, cfg: ModelConfig, vocab: Vocab, examples: list[ToyExample], max_new_tokens: int = MAX_NEW_TOKENS
) -> list[Completion]:
    """Argmax decoding from bos until eos, a newline, or the token cap."""
    if not examples:
        return []
    max_new_tokens = min(max_new_tokens, cfg.max_target_tokens + 1)
    rc_ids = np.stack([ex.rc_ids for ex in examples])
    rc_mask = np.stack([ex.rc_mask for ex in examples])
    memory, _ = encode(params, cfg, rc_ids, rc_mask)
    mem_mask = rc_mask.reshape(len(examples), -1)
    B = len(examples)
    seqs = np.full((B, 1), vocab.bos_id, dtype=np.int64)
    out: list[list[int]] = [[] for _ in range(B)]
    done = np.zeros(B, dtype=bool)
    for _ in range(max_new_tokens):
        logits, _ = decode_states(params, cfg, memory, mem_mask, seqs, np.ones(seqs.shape, dtype=bool))
        nxt = logits[:, -1, :].argmax(axis=-1)
        for b in np.flatnonzero(~done):
            tok = int(nxt[b])
            if tok in (vocab.eos_id, vocab.newline_id):
                done[b] = True
            else:
                out[b].append(tok)
        if done.all():
            break
        seqs = np.concatenate([seqs, nxt[:, None]], axis=1)
    return [Completion(vocab.decode(ids), not d) for ids, d in zip(out, done)]


# ------------------------------------------------------------ persistence


def save(directory, params, cfg: ModelConfig, vocab: Vocab, losses: list[float] | None = None) -> Path:
    """Flat little-endian float64 blob plus a JSON manifest of shapes."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tensors, offset = [], 0
    with open(directory / PARAMS_FILE, "wb") as fh:
        for name in sorted(params):
            arr = np.ascontiguousarray(params[name], dtype="<f8")
            fh.write(arr.tobytes())
            tensors.append({"name": name, "shape": list(arr.shape), "offset": offset})
            offset += arr.size
    manifest = {"dtype": "<f8", "config": cfg.to_dict(), "vocab": list(vocab.itos), "tensors": tensors}
    (directory / MANIFEST_FILE).write_text(json.dumps(manifest, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    if losses is not None:
        rows = ["step,loss"] + [f"{i},{v!r}" for i, v in enumerate(losses, 1)]
        (directory / LOSS_FILE).write_text("\n".join(rows) + "\n", encoding="utf-8")
    return directory


def load(directory) -> tuple[dict[str, np.ndarray], ModelConfig, Vocab]:
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST_FILE).read_text(encoding="utf-8"))
    cfg = ModelConfig(**manifest["config"])
    flat = np.fromfile(directory / PARAMS_FILE, dtype=manifest["dtype"])
    params = {}
    for t in manifest["tensors"]:
        size = math.prod(t["shape"])
        params[t["name"]] = flat[t["offset"] : t["offset"] + size].reshape(t["shape"]).astype(np.float64)
    expected = param_shapes(cfg)
    if set(params) != set(expected) or any(params[k].shape != s for k, s in expected.items()):
        raise ValueError(f"{directory}: parameter manifest does not match its config")
    return params, cfg, Vocab(tuple(manifest["vocab"]))


class FidProvider:
    """Completion provider backed by a trained toy model."""

    name = "fid"

    def __init__(self, params, cfg: ModelConfig, vocab: Vocab):
        self.params, self.cfg, self.vocab = params, cfg, vocab

    @classmethod
    def load(cls, directory) -> "FidProvider":
        return cls(*load(directory))

    def complete(self, packed: PackedExample) -> str:
        return self.complete_many([packed])[0]

    def complete_many(self, packed: list[PackedExample]) -> list[str]:
        toys = [to_toy(p, self.vocab, self.cfg) for p in packed]
        return [c.text for c in greedy_decode(self.params, self.cfg, self.vocab, toys)]


# ------------------------------------------------------------ toy data


def synthetic_holes(corpus_root, n: int = 50, seed: int = 0, n_contexts: int = 4, context_len: int = 32) -> list[PackedExample]:
    """`n` real holes sampled from every repo under `corpus_root`, packed
    NT-Prior-Last with prompt-proposal contexts."""
    root = Path(corpus_root)
    repos = _repo_roots(root)
    packing = PackingConfig("nt_prior_last", n_contexts, context_len, seed=seed)
    candidates = []
    for repo in repos:
        index = scan_repo(repo, repo.name)
        for hole in generate_holes(index, seed, cap=None):
            candidates.append((hole, index))
    rng = random.Random(derive_seed(seed, "synthetic_holes"))
    chosen = sorted(rng.sample(range(len(candidates)), min(n, len(candidates))))
    out = []
    for i in chosen:
        hole, index = candidates[i]
        out.append(pack(hole, ranked_ppcs(hole, index), packing))
    return out


def _repo_roots(root: Path) -> list[Path]:
    splits = [root / s for s in ("train", "val", "test") if (root / s).is_dir()]
    parents = splits or [root]
    return [p for parent in parents for p in sorted(parent.iterdir()) if p.is_dir()]


def vocab_for(examples: list[PackedExample]) -> Vocab:
    corpus = []
    for ex in examples:
        corpus.extend(rc_texts(ex))
        corpus.append(ex.target)
    return build_vocab(corpus)
