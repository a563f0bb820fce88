"""Trainable text encoder: per-token vectors plus a pooled vector.

A small transformer implemented directly in numpy with analytic gradients
(checked against finite differences in the test suite). Double precision
by default so runs are bit-reproducible; a float32 mode exists behind the
config for speed experiments.

Layout per sequence of N token ids:

    x = embed[ids] + pos[:N]          -> input layernorm
    repeat L times:
        x = LN1(x + selfattention(x))  (multi-head, scaled dot product,
                                        padded key positions masked out)
        x = LN2(x + ffn(x))            (gelu)
    pooled = mean over unmasked rows

The same parameters encode dialog contexts and schema node texts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import SequenceTooLong, ShapeMismatch
from .text import TokenSeq, Vocab
from .util import derive_rng, load_tensors, save_tensors, stable_token_hash

LN_EPS = 1e-6


@dataclass(frozen=True)
class EncoderConfig:
    dim: int = 64
    layers: int = 2
    heads: int = 4
    ffn_dim: int = 0  # 0 means 4 * dim
    max_positions: int = 256
    dtype: str = "float64"

    def __post_init__(self):
        if self.dim % self.heads != 0:
            raise ValueError(f"dim {self.dim} not divisible by heads {self.heads}")

    @property
    def hidden_ffn(self) -> int:
        return self.ffn_dim or 4 * self.dim


@dataclass(frozen=True)
class EncodedSequence:
    matrix: np.ndarray  # (N, d) per-token vectors
    pooled: np.ndarray  # (d,) masked mean of rows
    mask: np.ndarray  # (N,) bool, True = real token

    def __len__(self) -> int:
        return self.matrix.shape[0]


@dataclass
class EncoderParams:
    config: EncoderConfig
    vocab: Vocab
    tensors: dict[str, np.ndarray]

    def token_ids(self, seq: TokenSeq) -> np.ndarray:
        return np.array([self.vocab.id_of(t) for t in seq.tokens], dtype=np.int64)


@dataclass
class GradientBundle:
    tensors: dict[str, np.ndarray]

    def add_(self, other: "GradientBundle") -> "GradientBundle":
        for k, v in other.tensors.items():
            self.tensors[k] += v
        return self

    def scale_(self, factor: float) -> "GradientBundle":
        for v in self.tensors.values():
            v *= factor
        return self


def _tensor_shapes(config: EncoderConfig, vocab_size: int) -> dict[str, tuple[int, ...]]:
    d, f = config.dim, config.hidden_ffn
    shapes: dict[str, tuple[int, ...]] = {
        "embed": (vocab_size, d),
        "pos": (config.max_positions, d),
        "ln_in.g": (d,),
        "ln_in.b": (d,),
    }
    for i in range(config.layers):
        p = f"l{i}."
        shapes.update(
            {
                p + "wq": (d, d), p + "bq": (d,),
                p + "wk": (d, d), p + "bk": (d,),
                p + "wv": (d, d), p + "bv": (d,),
                p + "wo": (d, d), p + "bo": (d,),
                p + "ln1.g": (d,), p + "ln1.b": (d,),
                p + "w1": (d, f), p + "b1": (f,),
                p + "w2": (f, d), p + "b2": (d,),
                p + "ln2.g": (d,), p + "ln2.b": (d,),
            }
        )
    return shapes


def init_params(config: EncoderConfig, vocab: Vocab, seed: int) -> EncoderParams:
    rng = derive_rng(seed, "encoder-init")
    dtype = np.dtype(config.dtype)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in _tensor_shapes(config, len(vocab)).items():
        if name.endswith(".g"):
            tensors[name] = np.ones(shape, dtype=dtype)
        elif name.endswith((".b", "bq", "bk", "bv", "bo", "b1", "b2")):
            tensors[name] = np.zeros(shape, dtype=dtype)
        elif name == "embed":
            tensors[name] = rng.normal(0.0, 0.1, shape).astype(dtype)
        elif name == "pos":
            tensors[name] = rng.normal(0.0, 0.02, shape).astype(dtype)
        else:
            fan_in, fan_out = shape
            std = np.sqrt(2.0 / (fan_in + fan_out))
            tensors[name] = rng.normal(0.0, std, shape).astype(dtype)
    return EncoderParams(config=config, vocab=vocab, tensors=tensors)


def zeros_like_grads(params: EncoderParams) -> GradientBundle:
    return GradientBundle({k: np.zeros_like(v) for k, v in params.tensors.items()})


def _layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xn = xc * inv
    return xn * g + b, (xn, inv)


def _layer_norm_backward(dy: np.ndarray, cache, g: np.ndarray):
    xn, inv = cache
    dg = (dy * xn).sum(axis=0)
    db = dy.sum(axis=0)
    dxn = dy * g
    # dx = inv * (dxn - mean(dxn) - xn * mean(dxn * xn)), row-wise
    m1 = dxn.mean(axis=-1, keepdims=True)
    m2 = (dxn * xn).mean(axis=-1, keepdims=True)
    dx = inv * (dxn - m1 - xn * m2)
    return dx, dg, db


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / np.sqrt(2.0))) + x * np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward_with_cache(params: EncoderParams, ids: np.ndarray, mask: np.ndarray):
    """Forward pass keeping every intermediate needed by the backward pass."""
    cfg = params.config
    t = params.tensors
    n = ids.shape[0]
    if n > cfg.max_positions:
        raise SequenceTooLong(f"sequence length {n} exceeds max_positions {cfg.max_positions}")
    d, heads = cfg.dim, cfg.heads
    dh = d // heads
    cache: dict = {"ids": ids, "mask": mask, "n": n}

    if n == 0 or not mask.any():
        out = np.zeros((n, d), dtype=t["embed"].dtype)
        cache["empty"] = True
        return out, np.zeros(d, dtype=t["embed"].dtype), cache
    cache["empty"] = False

    x0 = t["embed"][ids] + t["pos"][:n]
    x, ln_in_cache = _layer_norm(x0, t["ln_in.g"], t["ln_in.b"])
    cache["ln_in"] = ln_in_cache
    key_bias = np.where(mask, 0.0, -np.inf)  # (n,) broadcast over query rows

    layers = []
    for i in range(cfg.layers):
        p = f"l{i}."
        lc: dict = {"x_in": x}
        q = x @ t[p + "wq"] + t[p + "bq"]
        k = x @ t[p + "wk"] + t[p + "bk"]
        v = x @ t[p + "wv"] + t[p + "bv"]
        qh = q.reshape(n, heads, dh).transpose(1, 0, 2)  # (H, n, dh)
        kh = k.reshape(n, heads, dh).transpose(1, 0, 2)
        vh = v.reshape(n, heads, dh).transpose(1, 0, 2)
        scores = qh @ kh.transpose(0, 2, 1) / np.sqrt(dh)  # (H, n, n)
        scores = scores + key_bias[None, None, :]
        alpha = _softmax_rows(scores)
        ctx = alpha @ vh  # (H, n, dh)
        merged = ctx.transpose(1, 0, 2).reshape(n, d)
        attn_out = merged @ t[p + "wo"] + t[p + "bo"]
        lc.update(q=q, k=k, v=v, alpha=alpha, merged=merged)
        res1 = x + attn_out
        x, ln1_cache = _layer_norm(res1, t[p + "ln1.g"], t[p + "ln1.b"])
        lc["ln1"] = ln1_cache
        lc["x_mid"] = x
        pre = x @ t[p + "w1"] + t[p + "b1"]
        act = _gelu(pre)
        ffn_out = act @ t[p + "w2"] + t[p + "b2"]
        lc.update(pre=pre, act=act)
        res2 = x + ffn_out
        x, ln2_cache = _layer_norm(res2, t[p + "ln2.g"], t[p + "ln2.b"])
        lc["ln2"] = ln2_cache
        layers.append(lc)
    cache["layers"] = layers

    n_real = int(mask.sum())
    pooled = x[mask].mean(axis=0) if n_real else np.zeros(d, dtype=x.dtype)
    cache["x_final"] = x
    return x, pooled, cache


def backward_from_cache(
    params: EncoderParams,
    cache: dict,
    upstream: np.ndarray,
    pooled_upstream: np.ndarray | None = None,
) -> GradientBundle:
    """Gradients of sum(upstream * output) + pooled term w.r.t. all tensors."""
    cfg = params.config
    t = params.tensors
    grads = zeros_like_grads(params)
    g = grads.tensors
    if cache["empty"]:
        return grads
    n = cache["n"]
    ids, mask = cache["ids"], cache["mask"]
    d, heads = cfg.dim, cfg.heads
    dh = d // heads

    dx = np.array(upstream, dtype=t["embed"].dtype, copy=True)
    if dx.shape != cache["x_final"].shape:
        raise ShapeMismatch(f"upstream shape {dx.shape} != output shape {cache['x_final'].shape}")
    if pooled_upstream is not None:
        n_real = int(mask.sum())
        if n_real:
            dx[mask] += np.asarray(pooled_upstream, dtype=dx.dtype) / n_real

    for i in reversed(range(cfg.layers)):
        p = f"l{i}."
        lc = cache["layers"][i]
        dres2, dg2, db2 = _layer_norm_backward(dx, lc["ln2"], t[p + "ln2.g"])
        g[p + "ln2.g"] += dg2
        g[p + "ln2.b"] += db2
        d_ffn_out = dres2
        g[p + "w2"] += lc["act"].T @ d_ffn_out
        g[p + "b2"] += d_ffn_out.sum(axis=0)
        dact = d_ffn_out @ t[p + "w2"].T
        dpre = dact * _gelu_grad(lc["pre"])
        g[p + "w1"] += lc["x_mid"].T @ dpre
        g[p + "b1"] += dpre.sum(axis=0)
        dx_mid = dres2 + dpre @ t[p + "w1"].T

        dres1, dg1, db1 = _layer_norm_backward(dx_mid, lc["ln1"], t[p + "ln1.g"])
        g[p + "ln1.g"] += dg1
        g[p + "ln1.b"] += db1
        d_attn_out = dres1
        g[p + "wo"] += lc["merged"].T @ d_attn_out
        g[p + "bo"] += d_attn_out.sum(axis=0)
        dmerged = d_attn_out @ t[p + "wo"].T
        dctx = dmerged.reshape(n, heads, dh).transpose(1, 0, 2)  # (H, n, dh)

        alpha = lc["alpha"]
        vh = lc["v"].reshape(n, heads, dh).transpose(1, 0, 2)
        dalpha = dctx @ vh.transpose(0, 2, 1)  # (H, n, n)
        dvh = alpha.transpose(0, 2, 1) @ dctx
        # softmax rows backward
        dscores = alpha * (dalpha - (dalpha * alpha).sum(axis=-1, keepdims=True))
        dscores /= np.sqrt(dh)
        qh = lc["q"].reshape(n, heads, dh).transpose(1, 0, 2)
        kh = lc["k"].reshape(n, heads, dh).transpose(1, 0, 2)
        dqh = dscores @ kh
        dkh = dscores.transpose(0, 2, 1) @ qh
        dq = dqh.transpose(1, 0, 2).reshape(n, d)
        dk = dkh.transpose(1, 0, 2).reshape(n, d)
        dv = dvh.transpose(1, 0, 2).reshape(n, d)

        x_in = lc["x_in"]
        g[p + "wq"] += x_in.T @ dq
        g[p + "bq"] += dq.sum(axis=0)
        g[p + "wk"] += x_in.T @ dk
        g[p + "bk"] += dk.sum(axis=0)
        g[p + "wv"] += x_in.T @ dv
        g[p + "bv"] += dv.sum(axis=0)
        dx = dres1 + dq @ t[p + "wq"].T + dk @ t[p + "wk"].T + dv @ t[p + "wv"].T

    dx0, dg_in, db_in = _layer_norm_backward(dx, cache["ln_in"], t["ln_in.g"])
    g["ln_in.g"] += dg_in
    g["ln_in.b"] += db_in
    np.add.at(g["embed"], ids, dx0)
    g["pos"][:n] += dx0
    return grads


def encode(params: EncoderParams, seq: TokenSeq, pad_to: int | None = None) -> EncodedSequence:
    """Deterministic forward pass. pad_to appends masked padding positions."""
    ids = params.token_ids(seq)
    n = len(ids)
    total = max(n, pad_to or 0)
    ids_full = np.zeros(total, dtype=np.int64)
    ids_full[:n] = ids
    mask = np.zeros(total, dtype=bool)
    mask[:n] = True
    matrix, pooled, _ = forward_with_cache(params, ids_full, mask)
    return EncodedSequence(matrix=matrix, pooled=pooled, mask=mask)


def backward(
    params: EncoderParams,
    seq: TokenSeq,
    upstream: np.ndarray,
    pooled_upstream: np.ndarray | None = None,
    pad_to: int | None = None,
) -> GradientBundle:
    """Analytic parameter gradients for one sequence, given per-token upstream."""
    ids = params.token_ids(seq)
    n = len(ids)
    total = max(n, pad_to or 0)
    ids_full = np.zeros(total, dtype=np.int64)
    ids_full[:n] = ids
    mask = np.zeros(total, dtype=bool)
    mask[:n] = True
    _, _, cache = forward_with_cache(params, ids_full, mask)
    up = np.asarray(upstream)
    if up.shape[0] == n and total != n:
        padded = np.zeros((total, up.shape[1]), dtype=up.dtype)
        padded[:n] = up
        up = padded
    return backward_from_cache(params, cache, up, pooled_upstream)


def hashed_encode(seed: int, seq: TokenSeq, dim: int = 16, pad_to: int | None = None) -> EncodedSequence:
    """Parameter-free deterministic encoder for tests.

    Each token's vector is a pure function of (token string, seed): entries
    uniform in [-1, 1], identical wherever the token appears.
    """
    n = len(seq.tokens)
    total = max(n, pad_to or 0)
    matrix = np.zeros((total, dim), dtype=np.float64)
    for i, tok in enumerate(seq.tokens):
        rng = np.random.Generator(np.random.PCG64(stable_token_hash(tok, seed)))
        matrix[i] = rng.uniform(-1.0, 1.0, dim)
    mask = np.zeros(total, dtype=bool)
    mask[:n] = True
    pooled = matrix[:n].mean(axis=0) if n else np.zeros(dim)
    return EncodedSequence(matrix=matrix, pooled=pooled, mask=mask)


def save_params(path: str, params: EncoderParams) -> None:
    meta = {
        "kind": "encoder-params",
        "config": {
            "dim": params.config.dim,
            "layers": params.config.layers,
            "heads": params.config.heads,
            "ffn_dim": params.config.ffn_dim,
            "max_positions": params.config.max_positions,
            "dtype": params.config.dtype,
        },
        "vocab": params.vocab.tokens,
    }
    save_tensors(path, params.tensors, meta)


def load_params(path: str) -> EncoderParams:
    tensors, meta = load_tensors(path)
    if meta.get("kind") != "encoder-params":
        raise ValueError(f"{path} is not an encoder checkpoint")
    cfg = EncoderConfig(**meta["config"])
    vocab = Vocab(meta["vocab"][2:])
    expected = _tensor_shapes(cfg, len(vocab))
    for name, shape in expected.items():
        if name not in tensors or tuple(tensors[name].shape) != shape:
            raise ValueError(f"checkpoint tensor {name} has wrong shape")
    return EncoderParams(config=cfg, vocab=vocab, tensors=tensors)
