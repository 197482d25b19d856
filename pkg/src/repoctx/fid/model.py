"""Fusion-in-Decoder forward pass, loss and analytic gradients.

Each repo context is encoded on its own (sinusoidal positions restart at 0
for every context), the encoder states are concatenated into one memory of
N*L rows, and the decoder cross-attends over the whole memory. An optional
learned bias over memory positions makes cross-attention order-aware.

Everything is float64. Layers are post-norm: x = LN(x + sublayer(x)).

Shapes: B batch, N contexts, L tokens per context, T target length,
d model width, h heads, V vocabulary.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

LN_EPS = 1e-5
_GELU_C = math.sqrt(2.0 / math.pi)


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 2
    n_enc_layers: int = 1
    n_dec_layers: int = 1
    d_ff: int = 128
    max_rc_tokens: int = 32
    n_contexts: int = 4
    max_target_tokens: int = 128
    cross_position_bias: bool = True

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ShapeError("d_model must be divisible by n_heads")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Batch:
    rc_ids: np.ndarray  # (B, N, L) int
    rc_mask: np.ndarray  # (B, N, L) bool
    tgt_in: np.ndarray  # (B, T) int, bos-shifted
    tgt_out: np.ndarray  # (B, T) int
    tgt_mask: np.ndarray  # (B, T) bool


# ------------------------------------------------------------ parameters


def _layer_shapes(prefix: str, d: int, d_ff: int, attn: tuple[str, ...], norms: tuple[str, ...]):
    shapes = {}
    for a in attn:
        for w in ("wq", "wk", "wv", "wo"):
            shapes[f"{prefix}.{a}.{w}"] = (d, d)
            # no key bias: softmax is shift-invariant, so it would never train
            if w != "wk":
                shapes[f"{prefix}.{a}.b{w[1]}"] = (d,)
    shapes[f"{prefix}.ff.w1"] = (d, d_ff)
    shapes[f"{prefix}.ff.b1"] = (d_ff,)
    shapes[f"{prefix}.ff.w2"] = (d_ff, d)
    shapes[f"{prefix}.ff.b2"] = (d,)
    for n in norms:
        shapes[f"{prefix}.{n}.g"] = (d,)
        shapes[f"{prefix}.{n}.b"] = (d,)
    return shapes


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d = cfg.d_model
    shapes: dict[str, tuple[int, ...]] = {"emb": (cfg.vocab_size, d)}
    for i in range(cfg.n_enc_layers):
        shapes.update(_layer_shapes(f"enc{i}", d, cfg.d_ff, ("sa",), ("ln1", "ln2")))
    for i in range(cfg.n_dec_layers):
        shapes.update(_layer_shapes(f"dec{i}", d, cfg.d_ff, ("sa", "ca"), ("ln1", "ln2", "ln3")))
    shapes["out.w"] = (d, cfg.vocab_size)
    shapes["out.b"] = (cfg.vocab_size,)
    if cfg.cross_position_bias:
        shapes["cross_bias"] = (cfg.n_contexts * cfg.max_rc_tokens,)
    return dict(sorted(shapes.items()))


def init_params(cfg: ModelConfig, seed: int = 0, std: float = 0.02) -> dict[str, np.ndarray]:
    """Normal(0, std) weights, zero biases, unit norm gains."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "g":
            params[name] = np.ones(shape)
        elif leaf.startswith("b") and name != "cross_bias":
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.normal(0.0, std, size=shape)
    return params


def sinusoid(n: int, d: int) -> np.ndarray:
    pos = np.arange(n)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


# ------------------------------------------------------------ primitives


def masked_softmax(s: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over the last axis; masked entries get exactly 0 and fully
    masked rows are all zeros."""
    s = np.where(mask, s, -np.inf)
    m = s.max(axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.where(mask, np.exp(s - m), 0.0)
    z = e.sum(axis=-1, keepdims=True)
    return np.divide(e, z, out=np.zeros_like(e), where=z > 0)


def _ln(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(x.var(axis=-1, keepdims=True) + LN_EPS)
    xhat = (x - mu) * inv
    return xhat * g + b, (xhat, inv, g)


def _ln_back(dy, cache):
    xhat, inv, g = cache
    d = dy.shape[-1]
    dg = (dy * xhat).reshape(-1, d).sum(axis=0)
    db = dy.reshape(-1, d).sum(axis=0)
    gh = dy * g
    dx = inv * (gh - gh.mean(axis=-1, keepdims=True) - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
    return dx, dg, db


def _lin_back(dy, x, w):
    dw = x.reshape(-1, x.shape[-1]).T @ dy.reshape(-1, dy.shape[-1])
    return dy @ w.T, dw, dy.reshape(-1, dy.shape[-1]).sum(axis=0)


def _gelu(u):
    t = np.tanh(_GELU_C * (u + 0.044715 * u**3))
    return 0.5 * u * (1.0 + t), t


def _gelu_back(du_out, u, t):
    return du_out * (0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * u * u))


def _split_heads(x, h):
    B, T, d = x.shape
    return x.reshape(B, T, h, d // h).transpose(0, 2, 1, 3)


def _merge_heads(x):
    B, h, T, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, T, h * dh)


def _mha(p, pre, xq, xkv, mask, h, bias=None):
    dh = xq.shape[-1] // h
    q = _split_heads(xq @ p[f"{pre}.wq"] + p[f"{pre}.bq"], h)
    k = _split_heads(xkv @ p[f"{pre}.wk"], h)
    v = _split_heads(xkv @ p[f"{pre}.wv"] + p[f"{pre}.bv"], h)
    s = q @ k.transpose(0, 1, 3, 2) / math.sqrt(dh)
    if bias is not None:
        s = s + bias
    a = masked_softmax(s, mask[:, None, :, :])
    o = _merge_heads(a @ v)
    out = o @ p[f"{pre}.wo"] + p[f"{pre}.bo"]
    return out, (pre, xq, xkv, q, k, v, a, o, h, bias is not None)


def _mha_back(dout, p, cache, grads):
    pre, xq, xkv, q, k, v, a, o, h, has_bias = cache
    dh = q.shape[-1]
    do, grads[f"{pre}.wo"], grads[f"{pre}.bo"] = _lin_back(dout, o, p[f"{pre}.wo"])
    do = _split_heads(do, h)
    da = do @ v.transpose(0, 1, 3, 2)
    dv = a.transpose(0, 1, 3, 2) @ do
    ds = a * (da - (da * a).sum(axis=-1, keepdims=True))
    dbias = ds.sum(axis=(0, 1, 2)) if has_bias else None
    dq = _merge_heads(ds @ k) / math.sqrt(dh)
    dk = _merge_heads(ds.transpose(0, 1, 3, 2) @ q) / math.sqrt(dh)
    dv = _merge_heads(dv)
    dxq, grads[f"{pre}.wq"], grads[f"{pre}.bq"] = _lin_back(dq, xq, p[f"{pre}.wq"])
    dxk, grads[f"{pre}.wk"], _ = _lin_back(dk, xkv, p[f"{pre}.wk"])
    dxv, grads[f"{pre}.wv"], grads[f"{pre}.bv"] = _lin_back(dv, xkv, p[f"{pre}.wv"])
    return dxq, dxk + dxv, dbias


def _ffn(p, pre, x):
    u = x @ p[f"{pre}.w1"] + p[f"{pre}.b1"]
    g, t = _gelu(u)
    return g @ p[f"{pre}.w2"] + p[f"{pre}.b2"], (pre, x, u, t, g)


def _ffn_back(dy, p, cache, grads):
    pre, x, u, t, g = cache
    dg, grads[f"{pre}.w2"], grads[f"{pre}.b2"] = _lin_back(dy, g, p[f"{pre}.w2"])
    du = _gelu_back(dg, u, t)
    dx, grads[f"{pre}.w1"], grads[f"{pre}.b1"] = _lin_back(du, x, p[f"{pre}.w1"])
    return dx


# ------------------------------------------------------------ model


def _check(cfg: ModelConfig, batch: Batch, params: dict) -> None:
    B, N, L = batch.rc_ids.shape
    if N != cfg.n_contexts or L != cfg.max_rc_tokens:
        raise ShapeError(f"contexts shaped {N}x{L}, model expects {cfg.n_contexts}x{cfg.max_rc_tokens}")
    if batch.rc_mask.shape != batch.rc_ids.shape:
        raise ShapeError("rc_mask must match rc_ids")
    T = batch.tgt_in.shape[1]
    if batch.tgt_in.shape != (B, T) or batch.tgt_out.shape != (B, T) or batch.tgt_mask.shape != (B, T):
        raise ShapeError("target arrays must all be (B, T)")
    if T > cfg.max_target_tokens + 1:
        raise ShapeError(f"target length {T} exceeds {cfg.max_target_tokens + 1}")
    for arr in (batch.rc_ids, batch.tgt_in, batch.tgt_out):
        if arr.size and (arr.min() < 0 or arr.max() >= cfg.vocab_size):
            raise ShapeError("token id out of vocabulary range")
    for name, shape in param_shapes(cfg).items():
        if params[name].shape != shape:
            raise ShapeError(f"param {name} has shape {params[name].shape}, expected {shape}")


def encode(params, cfg: ModelConfig, rc_ids, rc_mask):
    """Encode each context independently; returns (memory (B, N*L, d), caches)."""
    B, N, L = rc_ids.shape
    d = cfg.d_model
    ids = rc_ids.reshape(B * N, L)
    km = rc_mask.reshape(B * N, L)
    x = params["emb"][ids] * math.sqrt(d) + sinusoid(L, d)
    mask = np.broadcast_to(km[:, None, :], (B * N, L, L))
    caches = []
    for i in range(cfg.n_enc_layers):
        pre = f"enc{i}"
        a, c_sa = _mha(params, f"{pre}.sa", x, x, mask, cfg.n_heads)
        x, c_ln1 = _ln(x + a, params[f"{pre}.ln1.g"], params[f"{pre}.ln1.b"])
        f, c_ff = _ffn(params, f"{pre}.ff", x)
        x, c_ln2 = _ln(x + f, params[f"{pre}.ln2.g"], params[f"{pre}.ln2.b"])
        caches.append((c_sa, c_ln1, c_ff, c_ln2))
    return x.reshape(B, N * L, d), (ids, caches)


def decode_states(params, cfg: ModelConfig, memory, mem_mask, tgt_in, tgt_mask):
    """Decoder stack over bos-shifted targets; returns (logits (B, T, V), caches)."""
    B, T = tgt_in.shape
    d = cfg.d_model
    y = params["emb"][tgt_in] * math.sqrt(d) + sinusoid(T, d)
    causal = np.tril(np.ones((T, T), dtype=bool))
    self_mask = causal[None, :, :] & tgt_mask[:, None, :]
    cross_mask = np.broadcast_to(mem_mask[:, None, :], (B, T, mem_mask.shape[1]))
    bias = params.get("cross_bias") if cfg.cross_position_bias else None
    caches = []
    for i in range(cfg.n_dec_layers):
        pre = f"dec{i}"
        a, c_sa = _mha(params, f"{pre}.sa", y, y, self_mask, cfg.n_heads)
        y, c_ln1 = _ln(y + a, params[f"{pre}.ln1.g"], params[f"{pre}.ln1.b"])
        c, c_ca = _mha(params, f"{pre}.ca", y, memory, cross_mask, cfg.n_heads, bias)
        y, c_ln2 = _ln(y + c, params[f"{pre}.ln2.g"], params[f"{pre}.ln2.b"])
        f, c_ff = _ffn(params, f"{pre}.ff", y)
        y, c_ln3 = _ln(y + f, params[f"{pre}.ln3.g"], params[f"{pre}.ln3.b"])
        caches.append((c_sa, c_ln1, c_ca, c_ln2, c_ff, c_ln3))
    logits = y @ params["out.w"] + params["out.b"]
    return logits, (tgt_in, y, caches)


def forward(params, cfg: ModelConfig, batch: Batch, return_cache: bool = False):
    """Logits (B, T, V) for every target position."""
    _check(cfg, batch, params)
    memory, enc_cache = encode(params, cfg, batch.rc_ids, batch.rc_mask)
    mem_mask = batch.rc_mask.reshape(batch.rc_mask.shape[0], -1)
    logits, dec_cache = decode_states(params, cfg, memory, mem_mask, batch.tgt_in, batch.tgt_mask)
    if return_cache:
        return logits, (enc_cache, dec_cache)
    return logits


def attention_maps(params, cfg: ModelConfig, batch: Batch) -> dict[str, np.ndarray]:
    """All attention weight tensors of one forward pass, keyed by layer."""
    _, (enc_cache, dec_cache) = forward(params, cfg, batch, return_cache=True)
    out = {}
    for i, (c_sa, *_rest) in enumerate(enc_cache[1]):
        out[f"enc{i}.sa"] = c_sa[6]
    for i, (c_sa, _, c_ca, *_rest) in enumerate(dec_cache[2]):
        out[f"dec{i}.sa"] = c_sa[6]
        out[f"dec{i}.ca"] = c_ca[6]
    return out


def _xent(logits, labels, mask):
    count = mask.sum()
    if count == 0:
        raise ValueError("example has no non-pad target positions")
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    logp = z - lse
    nll = -np.take_along_axis(logp, labels[..., None], axis=-1)[..., 0]
    value = float((nll * mask).sum() / count)
    dlogits = np.exp(logp)
    np.put_along_axis(dlogits, labels[..., None], np.take_along_axis(dlogits, labels[..., None], axis=-1) - 1.0, axis=-1)
    dlogits *= mask[..., None] / count
    return value, dlogits


def loss(params, cfg: ModelConfig, batch: Batch) -> float:
    """Mean next-token cross-entropy over non-pad target positions."""
    return _xent(forward(params, cfg, batch), batch.tgt_out, batch.tgt_mask)[0]


def loss_and_grad(params, cfg: ModelConfig, batch: Batch) -> tuple[float, dict[str, np.ndarray]]:
    logits, (enc_cache, dec_cache) = forward(params, cfg, batch, return_cache=True)
    value, dlogits = _xent(logits, batch.tgt_out, batch.tgt_mask)
    grads: dict[str, np.ndarray] = {}
    d = cfg.d_model
    scale = math.sqrt(d)

    tgt_in, y, dec_caches = dec_cache
    dy, grads["out.w"], grads["out.b"] = _lin_back(dlogits, y, params["out.w"])
    B, NL = batch.rc_mask.shape[0], batch.rc_mask.shape[1] * batch.rc_mask.shape[2]
    dmem = np.zeros((B, NL, d))
    dbias = np.zeros(NL) if cfg.cross_position_bias else None
    for i in reversed(range(cfg.n_dec_layers)):
        pre = f"dec{i}"
        c_sa, c_ln1, c_ca, c_ln2, c_ff, c_ln3 = dec_caches[i]
        dy, grads[f"{pre}.ln3.g"], grads[f"{pre}.ln3.b"] = _ln_back(dy, c_ln3)
        dy = dy + _ffn_back(dy, params, c_ff, grads)
        dy, grads[f"{pre}.ln2.g"], grads[f"{pre}.ln2.b"] = _ln_back(dy, c_ln2)
        dq, dkv, db = _mha_back(dy, params, c_ca, grads)
        dy = dy + dq
        dmem += dkv
        if db is not None:
            dbias += db
        dy, grads[f"{pre}.ln1.g"], grads[f"{pre}.ln1.b"] = _ln_back(dy, c_ln1)
        dq, dkv, _ = _mha_back(dy, params, c_sa, grads)
        dy = dy + dq + dkv
    demb = np.zeros_like(params["emb"])
    np.add.at(demb, tgt_in, dy * scale)
    if dbias is not None:
        grads["cross_bias"] = dbias

    ids, enc_caches = enc_cache
    dx = dmem.reshape(ids.shape[0], ids.shape[1], d)
    for i in reversed(range(cfg.n_enc_layers)):
        pre = f"enc{i}"
        c_sa, c_ln1, c_ff, c_ln2 = enc_caches[i]
        dx, grads[f"{pre}.ln2.g"], grads[f"{pre}.ln2.b"] = _ln_back(dx, c_ln2)
        dx = dx + _ffn_back(dx, params, c_ff, grads)
        dx, grads[f"{pre}.ln1.g"], grads[f"{pre}.ln1.b"] = _ln_back(dx, c_ln1)
        dq, dkv, _ = _mha_back(dx, params, c_sa, grads)
        dx = dx + dq + dkv
    np.add.at(demb, ids, dx * scale)
    grads["emb"] = demb
    return value, dict(sorted(grads.items()))
