"""Toy transformer encoder-decoder over joint source embeddings.

Single-sentence forward/backward with hand-derived gradients (no autodiff
tape).  Pre-norm residual blocks, sinusoidal positions, greedy decoding.
float32 for training; convert to float64 for gradient checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .joint_embedding import JointEmbeddingParams, embed_source_sequence, joint_embed_backward
from .numerics import AdamState, LrSchedule, adam_step, noam_lr, softmax
from .pipeline import BOS, EOS, EncodedSentence

LN_EPS = 1e-5
NEG_INF = -1e9


class ModelError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


@dataclass
class ModelConfig:
    src_vocab_size: int
    tgt_vocab_size: int
    pinyin_size: int
    layers: int = 2
    heads: int = 4
    model_dim: int = 64
    ff_dim: int = 256
    dropout: float = 0.1
    label_smoothing: float = 0.1
    max_len: int = 256
    beta: float = 0.95
    char_level: bool = False
    scale_after_mix: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.model_dim % self.heads != 0:
            raise ModelError(
                f"model_dim {self.model_dim} not divisible by heads {self.heads}"
            )
        if not 0 <= self.dropout < 1:
            raise ModelError("dropout must be in [0, 1)")


def sinusoidal_positions(max_len: int, dim: int, dtype=np.float32) -> np.ndarray:
    pos = np.arange(max_len)[:, None].astype(np.float64)
    i = np.arange(0, dim, 2).astype(np.float64)
    angles = pos / np.power(10000.0, i / dim)
    pe = np.zeros((max_len, dim), dtype=np.float64)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe.astype(dtype)


def _init_params(cfg: ModelConfig, dtype=np.float32) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    d, ff = cfg.model_dim, cfg.ff_dim
    bound = d ** -0.5

    def mat(*shape):
        return rng.uniform(-bound, bound, size=shape).astype(dtype)

    p: dict[str, np.ndarray] = {
        "src.word": mat(cfg.src_vocab_size, d),
        "src.pinyin": mat(cfg.pinyin_size, d),
        "tgt.emb": mat(cfg.tgt_vocab_size, d),
        "out.w": mat(d, cfg.tgt_vocab_size),
        "out.b": np.zeros(cfg.tgt_vocab_size, dtype=dtype),
    }

    def add_ln(prefix):
        p[f"{prefix}.g"] = np.ones(d, dtype=dtype)
        p[f"{prefix}.b"] = np.zeros(d, dtype=dtype)

    def add_attn(prefix):
        for w in ("wq", "wk", "wv", "wo"):
            p[f"{prefix}.{w}"] = mat(d, d)

    def add_ffn(prefix):
        p[f"{prefix}.w1"] = mat(d, ff)
        p[f"{prefix}.b1"] = np.zeros(ff, dtype=dtype)
        p[f"{prefix}.w2"] = mat(ff, d)
        p[f"{prefix}.b2"] = np.zeros(d, dtype=dtype)

    for i in range(cfg.layers):
        add_ln(f"enc{i}.ln1")
        add_attn(f"enc{i}.att")
        add_ln(f"enc{i}.ln2")
        add_ffn(f"enc{i}.ff")
        add_ln(f"dec{i}.ln1")
        add_attn(f"dec{i}.self")
        add_ln(f"dec{i}.ln2")
        add_attn(f"dec{i}.cross")
        add_ln(f"dec{i}.ln3")
        add_ffn(f"dec{i}.ff")
    add_ln("enc.lnf")
    add_ln("dec.lnf")
    return p


# --- layer kernels -----------------------------------------------------------


def _layernorm_fwd(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv, g)


def _layernorm_bwd(dy, cache):
    xhat, inv, g = cache
    dg = (dy * xhat).sum(axis=0)
    db = dy.sum(axis=0)
    dxhat = dy * g
    mean_dxhat = dxhat.mean(axis=-1, keepdims=True)
    mean_dxhat_xhat = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)
    return dx, dg, db


def _split_heads(x, heads):
    m, d = x.shape
    return x.reshape(m, heads, d // heads).transpose(1, 0, 2)


def _merge_heads(x):
    h, m, dk = x.shape
    return x.transpose(1, 0, 2).reshape(m, h * dk)


def _attn_fwd(xq, xkv, p, prefix, heads, mask):
    wq, wk, wv, wo = (p[f"{prefix}.{w}"] for w in ("wq", "wk", "wv", "wo"))
    q = _split_heads(xq @ wq, heads)
    k = _split_heads(xkv @ wk, heads)
    v = _split_heads(xkv @ wv, heads)
    scale = q.shape[-1] ** -0.5
    scores = (q @ k.transpose(0, 2, 1)) * scale
    if mask is not None:
        scores = scores + mask
    probs = softmax(scores, axis=-1)
    ctx = probs @ v
    merged = _merge_heads(ctx)
    out = merged @ wo
    return out, (xq, xkv, q, k, v, probs, merged, scale, prefix, heads)


def _attn_bwd(dout, cache, p, grads):
    xq, xkv, q, k, v, probs, merged, scale, prefix, heads = cache
    wq, wk, wv, wo = (p[f"{prefix}.{w}"] for w in ("wq", "wk", "wv", "wo"))
    grads[f"{prefix}.wo"] += merged.T @ dout
    dmerged = dout @ wo.T
    dctx = _split_heads(dmerged, heads)
    dprobs = dctx @ v.transpose(0, 2, 1)
    dv = probs.transpose(0, 2, 1) @ dctx
    dscores = probs * (dprobs - np.sum(dprobs * probs, axis=-1, keepdims=True))
    dscores *= scale
    dq = dscores @ k
    dk = dscores.transpose(0, 2, 1) @ q
    dq_m, dk_m, dv_m = _merge_heads(dq), _merge_heads(dk), _merge_heads(dv)
    grads[f"{prefix}.wq"] += xq.T @ dq_m
    grads[f"{prefix}.wk"] += xkv.T @ dk_m
    grads[f"{prefix}.wv"] += xkv.T @ dv_m
    dxq = dq_m @ wq.T
    dxkv = dk_m @ wk.T + dv_m @ wv.T
    return dxq, dxkv


def _ffn_fwd(x, p, prefix):
    h = x @ p[f"{prefix}.w1"] + p[f"{prefix}.b1"]
    a = np.maximum(h, 0.0)
    out = a @ p[f"{prefix}.w2"] + p[f"{prefix}.b2"]
    return out, (x, h, a, prefix)


def _ffn_bwd(dout, cache, p, grads):
    x, h, a, prefix = cache
    grads[f"{prefix}.w2"] += a.T @ dout
    grads[f"{prefix}.b2"] += dout.sum(axis=0)
    da = dout @ p[f"{prefix}.w2"].T
    dh = da * (h > 0)
    grads[f"{prefix}.w1"] += x.T @ dh
    grads[f"{prefix}.b1"] += dh.sum(axis=0)
    return dh @ p[f"{prefix}.w1"].T


def _ln_sublayer_bwd(dx_res, fwd_bwd, ln_cache, ln_prefix, drop_mask, grads):
    """Backward through `x = x + drop(f(ln(x)))` given d(x_out)."""
    dsub = dx_res * drop_mask if drop_mask is not None else dx_res
    dln_out = fwd_bwd(dsub)
    dx_ln, dg, db = _layernorm_bwd(dln_out, ln_cache)
    grads[f"{ln_prefix}.g"] += dg
    grads[f"{ln_prefix}.b"] += db
    return dx_res + dx_ln


class TranslationModel:
    """Parameters plus configuration; checkpoint round-trips bit-exactly."""

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray] | None = None,
                 dtype=np.float32):
        self.config = config
        self.dtype = dtype
        self.params = params if params is not None else _init_params(config, dtype)
        self.positions = sinusoidal_positions(config.max_len + 2, config.model_dim, dtype)

    # -- construction helpers ------------------------------------------------

    def astype(self, dtype) -> "TranslationModel":
        params = {k: v.astype(dtype) for k, v in self.params.items()}
        return TranslationModel(self.config, params, dtype)

    @property
    def embedding_params(self) -> JointEmbeddingParams:
        return JointEmbeddingParams(
            word_table=self.params["src.word"],
            pinyin_table=self.params["src.pinyin"],
            beta=self.config.beta,
        )

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    # -- forward -------------------------------------------------------------

    def forward(self, encoded_src: EncodedSentence, tgt_prefix: list[int],
                train: bool = False, drop_rng: np.random.Generator | None = None):
        """Next-token logits for every position of the target prefix.

        Returns (logits [m x V_tgt], cache) where cache feeds backward().
        """
        cfg = self.config
        p = self.params
        n = len(encoded_src.token_ids)
        m = len(tgt_prefix)
        if n == 0:
            raise ModelError("empty source sentence")
        if m == 0:
            raise ModelError("empty target prefix")
        if n > cfg.max_len or m > cfg.max_len:
            raise ModelError(f"sequence length exceeds max_len={cfg.max_len}")

        rate = cfg.dropout if train else 0.0
        if rate > 0 and drop_rng is None:
            raise ModelError("training-mode forward needs a dropout rng")

        def drop(x):
            if rate == 0:
                return x, None
            y, mask = numerics.dropout(x, rate, drop_rng)
            return y, mask

        scale = math.sqrt(cfg.model_dim)
        # Source embedding: Eq-style mix, then sqrt(d) scaling and positions.
        mixed = embed_source_sequence(encoded_src, self.embedding_params)
        src_x = (mixed * scale if cfg.scale_after_mix else mixed) + self.positions[:n]
        src_x, src_drop = drop(src_x)

        enc_caches = []
        x = src_x
        for i in range(cfg.layers):
            h1, ln1c = _layernorm_fwd(x, p[f"enc{i}.ln1.g"], p[f"enc{i}.ln1.b"])
            a, attc = _attn_fwd(h1, h1, p, f"enc{i}.att", cfg.heads, None)
            a, am = drop(a)
            x = x + a
            h2, ln2c = _layernorm_fwd(x, p[f"enc{i}.ln2.g"], p[f"enc{i}.ln2.b"])
            f, ffc = _ffn_fwd(h2, p, f"enc{i}.ff")
            f, fm = drop(f)
            x = x + f
            enc_caches.append((ln1c, attc, am, ln2c, ffc, fm))
        enc_out, enc_lnf_c = _layernorm_fwd(x, p["enc.lnf.g"], p["enc.lnf.b"])

        tgt_x = p["tgt.emb"][tgt_prefix] * scale + self.positions[:m]
        tgt_x, tgt_drop = drop(tgt_x)
        causal = np.triu(np.full((m, m), NEG_INF, dtype=x.dtype), k=1)[None, :, :]

        dec_caches = []
        y = tgt_x
        for i in range(cfg.layers):
            h1, ln1c = _layernorm_fwd(y, p[f"dec{i}.ln1.g"], p[f"dec{i}.ln1.b"])
            a, selfc = _attn_fwd(h1, h1, p, f"dec{i}.self", cfg.heads, causal)
            a, am = drop(a)
            y = y + a
            h2, ln2c = _layernorm_fwd(y, p[f"dec{i}.ln2.g"], p[f"dec{i}.ln2.b"])
            c, crossc = _attn_fwd(h2, enc_out, p, f"dec{i}.cross", cfg.heads, None)
            c, cm = drop(c)
            y = y + c
            h3, ln3c = _layernorm_fwd(y, p[f"dec{i}.ln3.g"], p[f"dec{i}.ln3.b"])
            f, ffc = _ffn_fwd(h3, p, f"dec{i}.ff")
            f, fm = drop(f)
            y = y + f
            dec_caches.append((ln1c, selfc, am, ln2c, crossc, cm, ln3c, ffc, fm))
        dec_out, dec_lnf_c = _layernorm_fwd(y, p["dec.lnf.g"], p["dec.lnf.b"])
        logits = dec_out @ p["out.w"] + p["out.b"]

        cache = {
            "encoded_src": encoded_src,
            "tgt_prefix": list(tgt_prefix),
            "src_drop": src_drop,
            "tgt_drop": tgt_drop,
            "enc_caches": enc_caches,
            "enc_lnf_c": enc_lnf_c,
            "dec_caches": dec_caches,
            "dec_lnf_c": dec_lnf_c,
            "dec_out": dec_out,
            "scale": scale,
        }
        return logits, cache

    # -- backward ------------------------------------------------------------

    def backward(self, cache, dlogits: np.ndarray,
                 grads: dict[str, np.ndarray] | None = None) -> dict[str, np.ndarray]:
        """Accumulate gradients of all parameters given d(loss)/d(logits)."""
        cfg = self.config
        p = self.params
        if grads is None:
            grads = self.zero_grads()

        dec_out = cache["dec_out"]
        grads["out.w"] += dec_out.T @ dlogits
        grads["out.b"] += dlogits.sum(axis=0)
        ddec_out = dlogits @ p["out.w"].T

        dy, dg, db = _layernorm_bwd(ddec_out, cache["dec_lnf_c"])
        grads["dec.lnf.g"] += dg
        grads["dec.lnf.b"] += db

        denc_out = np.zeros_like(cache["enc_lnf_c"][0])
        for i in reversed(range(cfg.layers)):
            ln1c, selfc, am, ln2c, crossc, cm, ln3c, ffc, fm = cache["dec_caches"][i]
            dy = _ln_sublayer_bwd(
                dy, lambda d: _ffn_bwd(d, ffc, p, grads), ln3c, f"dec{i}.ln3", fm, grads
            )
            dsub = dy * cm if cm is not None else dy
            dh2, dkv = _attn_bwd(dsub, crossc, p, grads)
            denc_out += dkv
            dx_ln, dg, db = _layernorm_bwd(dh2, ln2c)
            grads[f"dec{i}.ln2.g"] += dg
            grads[f"dec{i}.ln2.b"] += db
            dy = dy + dx_ln
            dsub = dy * am if am is not None else dy
            dh1q, dh1kv = _attn_bwd(dsub, selfc, p, grads)
            dx_ln, dg, db = _layernorm_bwd(dh1q + dh1kv, ln1c)
            grads[f"dec{i}.ln1.g"] += dg
            grads[f"dec{i}.ln1.b"] += db
            dy = dy + dx_ln

        dtgt_x = dy if cache["tgt_drop"] is None else dy * cache["tgt_drop"]
        scale = cache["scale"]
        np.add.at(grads["tgt.emb"], cache["tgt_prefix"], dtgt_x * scale)

        dx, dg, db = _layernorm_bwd(denc_out, cache["enc_lnf_c"])
        grads["enc.lnf.g"] += dg
        grads["enc.lnf.b"] += db
        for i in reversed(range(cfg.layers)):
            ln1c, attc, am, ln2c, ffc, fm = cache["enc_caches"][i]
            dx = _ln_sublayer_bwd(
                dx, lambda d: _ffn_bwd(d, ffc, p, grads), ln2c, f"enc{i}.ln2", fm, grads
            )
            dsub = dx * am if am is not None else dx
            dq, dkv = _attn_bwd(dsub, attc, p, grads)
            dx_ln, dg, db = _layernorm_bwd(dq + dkv, ln1c)
            grads[f"enc{i}.ln1.g"] += dg
            grads[f"enc{i}.ln1.b"] += db
            dx = dx + dx_ln

        dsrc_x = dx if cache["src_drop"] is None else dx * cache["src_drop"]
        dmixed = dsrc_x * scale if cfg.scale_after_mix else dsrc_x
        wg, pg = joint_embed_backward(cache["encoded_src"], self.embedding_params, dmixed)
        grads["src.word"] += wg
        grads["src.pinyin"] += pg
        return grads

    # -- losses and decoding -------------------------------------------------

    def loss_and_grads(self, encoded_src: EncodedSentence, tgt_ids: list[int],
                       train: bool = False, drop_rng=None,
                       grads: dict[str, np.ndarray] | None = None):
        """Teacher-forced smoothed-CE loss (summed) and parameter gradients.

        Returns (loss_sum, grads, n_target_tokens); callers normalize.
        """
        if len(tgt_ids) < 2:
            raise ModelError("target must contain at least <bos> and one token")
        prefix = tgt_ids[:-1]
        targets = np.array(tgt_ids[1:], dtype=np.int64)
        logits, cache = self.forward(encoded_src, prefix, train=train, drop_rng=drop_rng)
        loss, dlogits = numerics.label_smoothed_ce_rows(
            logits, targets, self.config.label_smoothing
        )
        grads = self.backward(cache, dlogits, grads)
        return loss, grads, len(targets)

    def greedy_decode(self, encoded_src: EncodedSentence, max_len: int | None = None) -> list[int]:
        """Argmax decoding from <bos> until <eos> or the length bound.

        Returns target ids without <bos>/<eos>.
        """
        limit = min(max_len or self.config.max_len, self.config.max_len) - 1
        prefix = [BOS]
        out: list[int] = []
        for _ in range(limit):
            logits, _ = self.forward(encoded_src, prefix, train=False)
            nxt = int(np.argmax(logits[-1]))
            if nxt == EOS:
                break
            out.append(nxt)
            prefix.append(nxt)
        return out


def build_model(config: ModelConfig, dtype=np.float32) -> TranslationModel:
    """Deterministic initialization from config.seed."""
    return TranslationModel(config, dtype=dtype)


def train_model(
    model: TranslationModel,
    examples: list[tuple[EncodedSentence, list[int]]],
    steps: int,
    batch_size: int,
    sched: LrSchedule | None = None,
    seed: int = 0,
    adam: AdamState | None = None,
) -> list[float]:
    """Minibatch teacher-forced training; returns the per-step loss curve.

    Deterministic given (model seed, data, seed).  Aborts on non-finite loss.
    """
    if not examples:
        raise TrainingError("no training examples")
    sched = sched or LrSchedule(factor=2.0, model_dim=model.config.model_dim,
                                warmup_steps=400)
    adam = adam or AdamState()
    rng = np.random.default_rng(seed)
    drop_rng = np.random.default_rng(seed + 1)
    curve: list[float] = []
    train_mode = model.config.dropout > 0
    for step in range(1, steps + 1):
        idx = rng.choice(len(examples), size=min(batch_size, len(examples)), replace=False)
        grads = model.zero_grads()
        total_loss = 0.0
        total_tokens = 0
        for j in idx:
            src, tgt = examples[int(j)]
            loss, grads, ntok = model.loss_and_grads(
                src, tgt, train=train_mode, drop_rng=drop_rng, grads=grads
            )
            total_loss += loss
            total_tokens += ntok
        if not math.isfinite(total_loss):
            raise TrainingError(
                f"non-finite loss at step {step} (lr={noam_lr(step, sched):.3g})"
            )
        inv = 1.0 / total_tokens
        for g in grads.values():
            g *= inv
        adam_step(model.params, grads, adam, noam_lr(step, sched))
        curve.append(total_loss * inv)
    return curve
