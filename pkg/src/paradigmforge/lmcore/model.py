"""Decoder-only transformer in numpy with a hand-written backward pass.

Pre-norm residual blocks, learned positional embeddings, causal attention,
tanh-GELU feed-forward, and a weight-tied output projection. The backward
pass mirrors the forward cache exactly and is validated against central
finite differences over every parameter (see ``grad_check``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

GELU_A = 0.044715
GELU_C = math.sqrt(2.0 / math.pi)
LN_EPS = 1e-5


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 4
    n_heads: int = 4
    d_model: int = 128
    d_ff: int = 512
    vocab_size: int = 8192
    context_length: int = 256
    dropout: float = 0.0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ModelError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    def to_json(self) -> dict:
        return {
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "d_model": self.d_model,
            "d_ff": self.d_ff,
            "vocab_size": self.vocab_size,
            "context_length": self.context_length,
            "dropout": self.dropout,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "ModelConfig":
        return cls(**raw)


def init_params(cfg: ModelConfig, seed: int, dtype=np.float32) -> dict[str, np.ndarray]:
    """GPT-2-style init: N(0, 0.02), residual projections scaled by 1/sqrt(2L)."""
    gen = np.random.Generator(np.random.PCG64(seed))
    std = 0.02
    resid_std = std / math.sqrt(2 * cfg.n_layers)

    def normal(shape, scale):
        return gen.normal(0.0, scale, size=shape).astype(dtype)

    params: dict[str, np.ndarray] = {
        "wte": normal((cfg.vocab_size, cfg.d_model), std),
        "wpe": normal((cfg.context_length, cfg.d_model), std),
        "lnf.g": np.ones(cfg.d_model, dtype=dtype),
        "lnf.b": np.zeros(cfg.d_model, dtype=dtype),
    }
    for i in range(cfg.n_layers):
        params[f"h{i}.ln1.g"] = np.ones(cfg.d_model, dtype=dtype)
        params[f"h{i}.ln1.b"] = np.zeros(cfg.d_model, dtype=dtype)
        params[f"h{i}.attn.wqkv"] = normal((cfg.d_model, 3 * cfg.d_model), std)
        params[f"h{i}.attn.bqkv"] = np.zeros(3 * cfg.d_model, dtype=dtype)
        params[f"h{i}.attn.wo"] = normal((cfg.d_model, cfg.d_model), resid_std)
        params[f"h{i}.attn.bo"] = np.zeros(cfg.d_model, dtype=dtype)
        params[f"h{i}.ln2.g"] = np.ones(cfg.d_model, dtype=dtype)
        params[f"h{i}.ln2.b"] = np.zeros(cfg.d_model, dtype=dtype)
        params[f"h{i}.mlp.w1"] = normal((cfg.d_model, cfg.d_ff), std)
        params[f"h{i}.mlp.b1"] = np.zeros(cfg.d_ff, dtype=dtype)
        params[f"h{i}.mlp.w2"] = normal((cfg.d_ff, cfg.d_model), resid_std)
        params[f"h{i}.mlp.b2"] = np.zeros(cfg.d_model, dtype=dtype)
    return params


def zero_params(cfg: ModelConfig, dtype=np.float32) -> dict[str, np.ndarray]:
    """All-zero parameters; the model then outputs a uniform distribution."""
    params = init_params(cfg, seed=0, dtype=dtype)
    return {name: np.zeros_like(value) for name, value in params.items()}


def _layernorm_fwd(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv)


def _layernorm_bwd(dy, g, cache):
    xhat, inv = cache
    dg = (dy * xhat).sum(axis=(0, 1))
    db = dy.sum(axis=(0, 1))
    dxhat = dy * g
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dg, db


def _gelu_fwd(x):
    # x**3 spelled as multiplies: numpy's pow falls off its fast path for
    # negative bases, which is ~20x slower on real activations.
    u = x * x
    u *= GELU_A
    u += 1.0
    u *= x
    u *= GELU_C
    t = np.tanh(u)
    y = t + 1.0
    y *= 0.5
    y *= x
    return y, t


def _gelu_bwd(dy, x, t):
    du = x * x
    du *= 3.0 * GELU_A
    du += 1.0
    du *= GELU_C
    inner = 1.0 - t * t
    inner *= x
    inner *= du
    inner += 1.0 + t
    inner *= 0.5
    inner *= dy
    return inner


def _split_heads(x, n_heads):
    b, t, d = x.shape
    return x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    return x.transpose(0, 2, 1, 3).reshape(x.shape[0], x.shape[2], -1)


def forward(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    ids: np.ndarray,
    want_cache: bool = False,
    dropout_rng: np.random.Generator | None = None,
):
    """Logits [B, T, V]; with ``want_cache`` also the backward cache.

    Position i attends to positions <= i only; the mask is -inf before the
    row softmax, so future positions contribute exactly zero. Dropout on the
    residual branches is active only when cfg.dropout > 0 and a generator is
    supplied (training); evaluation forwards never drop.
    """
    ids = np.asarray(ids)
    if ids.ndim == 1:
        ids = ids[None, :]
    B, T = ids.shape
    if T > cfg.context_length:
        raise ModelError(f"sequence length {T} exceeds context length {cfg.context_length}")
    if ids.min() < 0 or ids.max() >= cfg.vocab_size:
        raise ModelError("token id out of range for the model vocabulary")

    dtype = params["wte"].dtype
    drop = cfg.dropout if (cfg.dropout > 0.0 and dropout_rng is not None) else 0.0

    def make_dropout_mask(shape):
        if drop == 0.0:
            return None
        keep = (dropout_rng.random(shape) >= drop).astype(dtype)
        return keep / (1.0 - drop)

    x = params["wte"][ids] + params["wpe"][:T][None, :, :]
    mask = np.tril(np.ones((T, T), dtype=bool))[None, None, :, :]
    # Additive causal mask: exp underflows to exactly 0.0 for masked slots,
    # so future positions contribute nothing, bit for bit.
    neg_mask = np.where(mask[0, 0], dtype.type(0), dtype.type(-np.inf))
    scale = 1.0 / math.sqrt(cfg.head_dim)
    layer_caches = []

    for i in range(cfg.n_layers):
        p = lambda name: params[f"h{i}.{name}"]  # noqa: E731
        h, ln1_cache = _layernorm_fwd(x, p("ln1.g"), p("ln1.b"))
        qkv = h @ p("attn.wqkv") + p("attn.bqkv")
        q, k, v = np.split(qkv, 3, axis=-1)
        q = _split_heads(q, cfg.n_heads) * dtype.type(scale)
        k = _split_heads(k, cfg.n_heads)
        v = _split_heads(v, cfg.n_heads)
        att = np.matmul(q, k.transpose(0, 1, 3, 2))
        att += neg_mask
        att -= att.max(axis=-1, keepdims=True)
        np.exp(att, out=att)
        att /= att.sum(axis=-1, keepdims=True)
        A = att
        ctx = np.matmul(A, v)
        merged = _merge_heads(ctx)
        attn_out = merged @ p("attn.wo") + p("attn.bo")
        attn_mask = make_dropout_mask(attn_out.shape)
        if attn_mask is not None:
            attn_out = attn_out * attn_mask
        x = x + attn_out

        h2, ln2_cache = _layernorm_fwd(x, p("ln2.g"), p("ln2.b"))
        u1 = h2 @ p("mlp.w1") + p("mlp.b1")
        gelu_out, tanh_cache = _gelu_fwd(u1)
        mlp_out = gelu_out @ p("mlp.w2") + p("mlp.b2")
        mlp_mask = make_dropout_mask(mlp_out.shape)
        if mlp_mask is not None:
            mlp_out = mlp_out * mlp_mask
        x = x + mlp_out

        if want_cache:
            layer_caches.append(
                dict(
                    ln1=ln1_cache, h=h, q=q, k=k, v=v, A=A, merged=merged,
                    ln2=ln2_cache, h2=h2, u1=u1, t=tanh_cache, gelu=gelu_out,
                    attn_mask=attn_mask, mlp_mask=mlp_mask,
                )
            )

    xf, lnf_cache = _layernorm_fwd(x, params["lnf.g"], params["lnf.b"])
    logits = xf @ params["wte"].T

    if not want_cache:
        return logits
    cache = dict(ids=ids, layers=layer_caches, xf=xf, lnf=lnf_cache, mask=mask,
                 scale=scale, dtype=dtype)
    return logits, cache


def loss_and_dlogits(logits: np.ndarray, targets: np.ndarray):
    """Mean token-level cross-entropy and its gradient w.r.t. the logits."""
    targets = np.asarray(targets)
    if targets.ndim == 1:
        targets = targets[None, :]
    B, T, V = logits.shape
    if targets.shape != (B, T):
        raise ModelError(f"targets shape {targets.shape} does not match logits {(B, T)}")
    n = B * T
    flat_targets = targets.reshape(n)
    rows = np.arange(n)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    z = exp.sum(axis=-1, keepdims=True)
    picked = shifted.reshape(n, V)[rows, flat_targets] - np.log(z.reshape(n))
    loss = -picked.mean()
    # exp becomes the gradient in place: softmax minus one-hot, mean-scaled.
    exp /= z
    dlogits = exp.reshape(n, V)
    dlogits[rows, flat_targets] -= 1.0
    dlogits /= n
    return float(loss), dlogits.reshape(B, T, V)


def loss(logits: np.ndarray, targets: np.ndarray) -> float:
    return loss_and_dlogits(logits, targets)[0]


def backward(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    cache: dict,
    dlogits: np.ndarray,
) -> dict[str, np.ndarray]:
    """Gradients for every parameter given d(loss)/d(logits)."""
    ids = cache["ids"]
    B, T = ids.shape
    d = cfg.d_model
    grads = {name: np.zeros_like(value) for name, value in params.items()}

    xf = cache["xf"]
    flat_dlogits = dlogits.reshape(B * T, -1)
    grads["wte"] += flat_dlogits.T @ xf.reshape(B * T, d)
    dxf = dlogits @ params["wte"]
    dx, dg, db = _layernorm_bwd(dxf, params["lnf.g"], cache["lnf"])
    grads["lnf.g"] += dg
    grads["lnf.b"] += db

    scale = cache["scale"]
    for i in reversed(range(cfg.n_layers)):
        c = cache["layers"][i]
        p = lambda name: params[f"h{i}.{name}"]  # noqa: E731
        g = lambda name: grads[f"h{i}.{name}"]  # noqa: E731

        # MLP sublayer (residual: dx flows through unchanged plus branch).
        dmlp_out = dx if c["mlp_mask"] is None else dx * c["mlp_mask"]
        g("mlp.w2")[...] += c["gelu"].reshape(B * T, -1).T @ dmlp_out.reshape(B * T, d)
        g("mlp.b2")[...] += dmlp_out.sum(axis=(0, 1))
        dgelu = dmlp_out @ p("mlp.w2").T
        du1 = _gelu_bwd(dgelu, c["u1"], c["t"])
        g("mlp.w1")[...] += c["h2"].reshape(B * T, d).T @ du1.reshape(B * T, -1)
        g("mlp.b1")[...] += du1.sum(axis=(0, 1))
        dh2 = du1 @ p("mlp.w1").T
        dres, dg2, db2 = _layernorm_bwd(dh2, p("ln2.g"), c["ln2"])
        g("ln2.g")[...] += dg2
        g("ln2.b")[...] += db2
        dx = dx + dres

        # Attention sublayer.
        dattn_out = dx if c["attn_mask"] is None else dx * c["attn_mask"]
        g("attn.wo")[...] += c["merged"].reshape(B * T, d).T @ dattn_out.reshape(B * T, d)
        g("attn.bo")[...] += dattn_out.sum(axis=(0, 1))
        dmerged = dattn_out @ p("attn.wo").T
        dctx = _split_heads(dmerged, cfg.n_heads)
        A, v, q, k = c["A"], c["v"], c["q"], c["k"]
        dA = np.matmul(dctx, v.transpose(0, 1, 3, 2))
        dv = np.matmul(A.transpose(0, 1, 3, 2), dctx)
        # Softmax backward, in place on dA: ds = A * (dA - rowsum(dA * A)).
        rowsum = np.einsum("bhij,bhij->bhi", dA, A)[..., None]
        dA -= rowsum
        dA *= A
        ds = dA
        # Cached q is pre-scaled by 1/sqrt(hd): dk needs no extra factor,
        # d(raw q) does.
        dq = np.matmul(ds, k) * scale
        dk = np.matmul(ds.transpose(0, 1, 3, 2), q)
        dqkv = np.empty((B, T, 3 * d), dtype=dx.dtype)
        dqkv[:, :, :d] = _merge_heads(dq)
        dqkv[:, :, d : 2 * d] = _merge_heads(dk)
        dqkv[:, :, 2 * d :] = _merge_heads(dv)
        g("attn.wqkv")[...] += c["h"].reshape(B * T, d).T @ dqkv.reshape(B * T, 3 * d)
        g("attn.bqkv")[...] += dqkv.sum(axis=(0, 1))
        dh = dqkv @ p("attn.wqkv").T
        dres, dg1, db1 = _layernorm_bwd(dh, p("ln1.g"), c["ln1"])
        g("ln1.g")[...] += dg1
        g("ln1.b")[...] += db1
        dx = dx + dres

    # Embeddings: scatter-add token grads, sum position grads over the batch.
    np.add.at(grads["wte"], ids.reshape(-1), dx.reshape(B * T, d))
    grads["wpe"][:T] += dx.sum(axis=0)
    return grads


def loss_and_grads(params, cfg, ids, targets):
    logits, cache = forward(params, cfg, ids, want_cache=True)
    value, dlogits = loss_and_dlogits(logits, targets)
    return value, backward(params, cfg, cache, dlogits)


def sequence_logprob(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    token_ids: Sequence[int],
) -> float:
    """Sum over positions of ln P(token_i | tokens_<i).

    ``token_ids`` must already start with BOS; the evaluator-facing text
    wrapper lives next to the tokenizer-aware scorer.
    """
    ids = np.asarray(token_ids, dtype=np.int64)
    if ids.size < 2:
        raise ModelError("need at least BOS plus one token to score")
    if ids.size - 1 > cfg.context_length:
        raise ModelError(
            f"sequence of {ids.size - 1} tokens exceeds context length "
            f"{cfg.context_length}"
        )
    logits = forward(params, cfg, ids[None, :-1])
    shifted = logits - logits.max(axis=-1, keepdims=True)
    logprobs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    rows = logprobs[0, np.arange(ids.size - 1), ids[1:]]
    return float(rows.sum())


def batched_sequence_logprobs(
    params: dict[str, np.ndarray],
    cfg: ModelConfig,
    sequences: Sequence[Sequence[int]],
) -> list[float]:
    """Score many BOS-prefixed sequences with one padded forward per batch."""
    if not sequences:
        return []
    lengths = [len(s) for s in sequences]
    for n in lengths:
        if n < 2:
            raise ModelError("need at least BOS plus one token to score")
        if n - 1 > cfg.context_length:
            raise ModelError(
                f"sequence of {n - 1} tokens exceeds context length "
                f"{cfg.context_length}"
            )
    T = max(lengths) - 1
    batch = np.zeros((len(sequences), T), dtype=np.int64)
    for row, seq in enumerate(sequences):
        batch[row, : len(seq) - 1] = seq[:-1]
    logits = forward(params, cfg, batch)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    logprobs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = []
    for row, seq in enumerate(sequences):
        n = len(seq)
        targets = np.asarray(seq[1:], dtype=np.int64)
        out.append(float(logprobs[row, np.arange(n - 1), targets].sum()))
    return out


def grad_check(
    cfg: ModelConfig,
    ids: np.ndarray,
    targets: np.ndarray,
    seed: int = 0,
    h: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    The analytic gradient under test runs in double precision exactly as
    deployed. The finite-difference reference is evaluated in extended
    precision (80-bit on x86): double-precision loss evaluations carry
    ~1e-11 of roundoff through the h=1e-5 divider, which would swamp the
    comparison for near-zero gradient entries. Checks every parameter;
    intended for tiny models (<= ~10k parameters).
    """
    params = init_params(cfg, seed=seed, dtype=np.float64)
    _, grads = loss_and_grads(params, cfg, ids, targets)

    params_ld = {name: value.astype(np.longdouble) for name, value in params.items()}
    targets_flat = np.asarray(targets).reshape(-1)
    h_ld = np.longdouble(h)

    def loss_ld() -> np.longdouble:
        logits = forward(params_ld, cfg, ids)
        b, t, v = logits.shape
        shifted = logits - logits.max(axis=-1, keepdims=True)
        z = np.exp(shifted).sum(axis=-1, keepdims=True)
        logprobs = (shifted - np.log(z)).reshape(b * t, v)
        return -(logprobs[np.arange(b * t), targets_flat]).mean()

    worst = 0.0
    for name, value in params_ld.items():
        flat = value.reshape(-1)
        gflat = grads[name].reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + h_ld
            up = loss_ld()
            flat[idx] = original - h_ld
            down = loss_ld()
            flat[idx] = original
            numeric = float((up - down) / (2 * h_ld))
            analytic = float(gflat[idx])
            denom = max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst


def count_params(params: dict[str, np.ndarray]) -> int:
    return sum(v.size for v in params.values())
