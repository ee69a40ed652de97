"""End-to-end glue: corpus preparation for training and a sentence translator.

Char-level mode BPE-disables the source side (every word split into
characters) and keeps the target side word-level, so homophone noise can
never change source segmentation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lexicon import Lexicon, syllable_inventory
from .model import ModelConfig, TranslationModel, build_model
from .noise import ParallelCorpus, sentence_rng
from .pipeline import (
    CONTINUATION,
    BpeModel,
    EncodedSentence,
    SentenceTooLongError,
    Vocab,
    build_vocab,
    encode_sentence,
    learn_bpe,
    segment_sentence,
)


@dataclass
class PreparedData:
    examples: list[tuple[EncodedSentence, list[int]]]
    src_vocab: Vocab
    tgt_vocab: Vocab
    src_bpe: BpeModel | None
    tgt_bpe: BpeModel | None
    skipped: int  # over-length pairs dropped


def prepare_training(
    corpus: ParallelCorpus,
    lexicon: Lexicon,
    seed: int,
    char_level: bool = True,
    bpe_merges: int = 0,
    src_vocab_size: int = 10000,
    tgt_vocab_size: int = 10000,
    max_len: int = 256,
) -> PreparedData:
    """Segment, build vocabularies, and numericalize a parallel corpus.

    Pronunciations are attached with per-sentence rngs derived from ``seed``
    so preparation is reproducible.
    """
    if char_level:
        src_bpe: BpeModel | None = BpeModel([])
        tgt_bpe: BpeModel | None = None
    elif bpe_merges > 0:
        src_bpe = learn_bpe(corpus.src, bpe_merges)
        tgt_bpe = learn_bpe(corpus.tgt, bpe_merges)
    else:
        src_bpe = tgt_bpe = None

    src_seg = [" ".join(segment_sentence(s.split(), src_bpe)) for s in corpus.src]
    tgt_seg = [" ".join(segment_sentence(s.split(), tgt_bpe)) for s in corpus.tgt]
    src_vocab = build_vocab(src_seg, src_vocab_size)
    tgt_vocab = build_vocab(tgt_seg, tgt_vocab_size)

    examples = []
    skipped = 0
    for i, (s, t) in enumerate(zip(corpus.src, corpus.tgt)):
        rng = sentence_rng(seed, i, tag="pron")
        try:
            enc_src = encode_sentence(
                s.split(), src_bpe, src_vocab, lexicon, rng, "source", max_len
            )
            enc_tgt = encode_sentence(
                t.split(), tgt_bpe, tgt_vocab, None, None, "target", max_len
            )
        except SentenceTooLongError:
            skipped += 1
            continue
        examples.append((enc_src, enc_tgt.token_ids))
    return PreparedData(examples, src_vocab, tgt_vocab, src_bpe, tgt_bpe, skipped)


def model_config_for(
    prepared: PreparedData,
    lexicon: Lexicon,
    beta: float,
    seed: int,
    char_level: bool = True,
    **overrides,
) -> ModelConfig:
    return ModelConfig(
        src_vocab_size=prepared.src_vocab.size,
        tgt_vocab_size=prepared.tgt_vocab.size,
        pinyin_size=len(syllable_inventory(lexicon)),
        beta=beta,
        char_level=char_level,
        seed=seed,
        **overrides,
    )


def join_subwords(tokens: list[str]) -> str:
    """Undo the ``@@`` continuation convention when rendering text."""
    return (" ".join(tokens)).replace(CONTINUATION + " ", "")


@dataclass
class Translator:
    """Greedy sentence translator over a trained model.

    Callable on a list of raw source sentences; pronunciation rngs are
    derived per line from ``pron_seed`` so translation is deterministic.
    """

    model: TranslationModel
    src_vocab: Vocab
    tgt_vocab: Vocab
    lexicon: Lexicon
    src_bpe: BpeModel | None
    pron_seed: int = 0

    def __call__(self, sentences: list[str]) -> list[str]:
        out = []
        for i, line in enumerate(sentences):
            rng = sentence_rng(self.pron_seed, i, tag="pron")
            enc = encode_sentence(
                line.split(), self.src_bpe, self.src_vocab, self.lexicon,
                rng, "source", self.model.config.max_len,
            )
            ids = self.model.greedy_decode(enc)
            out.append(join_subwords(self.tgt_vocab.decode(ids)))
        return out
