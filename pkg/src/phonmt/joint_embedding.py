"""Joint textual-phonetic source embeddings.

A token's embedding is the convex mix (1-beta) * word_row + beta * pron_vec,
where pron_vec is the average of the embeddings of the token's pronunciation
units.  beta=0 is textual-only, beta=1 phonetic-only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pipeline import EncodedSentence


class EmbeddingError(ValueError):
    pass


@dataclass
class JointEmbeddingParams:
    word_table: np.ndarray  # V x d
    pinyin_table: np.ndarray  # P x d, row 0 is <unk>
    beta: float

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise EmbeddingError(f"beta must be in [0,1], got {self.beta}")
        if self.word_table.shape[1] != self.pinyin_table.shape[1]:
            raise EmbeddingError("word and pinyin tables must share the embedding width")

    @property
    def dim(self) -> int:
        return self.word_table.shape[1]


def embed_pronunciation_seq(seq, params: JointEmbeddingParams) -> np.ndarray:
    """Average of the syllable embedding rows of ``seq``."""
    if len(seq) == 0:
        raise EmbeddingError("cannot embed an empty pronunciation sequence")
    p = params.pinyin_table.shape[0]
    for sid in seq:
        if not 0 <= sid < p:
            raise EmbeddingError(f"syllable id {sid} out of range (inventory size {p})")
    return params.pinyin_table[list(seq)].mean(axis=0)


def joint_embed_token(token_id: int, seq, params: JointEmbeddingParams) -> np.ndarray:
    """(1-beta) * word_row + beta * averaged pronunciation embedding."""
    if not 0 <= token_id < params.word_table.shape[0]:
        raise EmbeddingError(f"token id {token_id} out of range")
    # Endpoints are returned bit-exactly, not via 0*x arithmetic.
    if params.beta == 0.0:
        return params.word_table[token_id].copy()
    pron = embed_pronunciation_seq(seq, params)
    if params.beta == 1.0:
        return pron
    return (1.0 - params.beta) * params.word_table[token_id] + params.beta * pron


def embed_source_sequence(encoded: EncodedSentence, params: JointEmbeddingParams) -> np.ndarray:
    """Stack of joint embeddings, one row per source position."""
    if encoded.pron_seqs is None or len(encoded.pron_seqs) != len(encoded.token_ids):
        raise EmbeddingError("encoded sentence must carry one pronunciation per token")
    n = len(encoded.token_ids)
    out = np.empty((n, params.dim), dtype=params.word_table.dtype)
    for i, (tid, seq) in enumerate(zip(encoded.token_ids, encoded.pron_seqs)):
        out[i] = joint_embed_token(tid, seq, params)
    return out


def joint_embed_backward(
    encoded: EncodedSentence, params: JointEmbeddingParams, grad: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of embed_source_sequence w.r.t. both tables.

    Word row a accumulates (1-beta) * g_i over positions holding token a;
    pinyin row s accumulates (beta / l_i) * g_i once per occurrence of s in
    position i's length-l_i sequence.
    """
    n = len(encoded.token_ids)
    if grad.shape != (n, params.dim):
        raise EmbeddingError(f"upstream grad shape {grad.shape} != ({n}, {params.dim})")
    word_grad = np.zeros_like(params.word_table)
    pinyin_grad = np.zeros_like(params.pinyin_table)
    beta = params.beta
    for i, (tid, seq) in enumerate(zip(encoded.token_ids, encoded.pron_seqs)):
        g = grad[i]
        if beta < 1.0:
            word_grad[tid] += (1.0 - beta) * g
        if beta > 0.0:
            share = (beta / len(seq)) * g
            for sid in seq:
                pinyin_grad[sid] += share
    return word_grad, pinyin_grad
