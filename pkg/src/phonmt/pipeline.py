"""Subword pipeline: BPE learning/application, vocabulary, numericalization.

Subwords carry an ``@@`` continuation suffix in text form (all but the last
piece of a word); the marker is stripped before pronunciation lookup.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from random import Random

from .lexicon import Lexicon, PronunciationSeq, pronounce

CONTINUATION = "@@"

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ["<pad>", "<bos>", "<eos>", "<unk>"]


class PipelineError(ValueError):
    pass


class SentenceTooLongError(PipelineError):
    def __init__(self, length: int, max_len: int):
        super().__init__(f"sentence has {length} subwords, limit is {max_len}")
        self.length = length
        self.max_len = max_len


@dataclass
class BpeModel:
    """Ordered merge list; order is learning order (priority)."""

    merges: list[tuple[str, str]]

    @property
    def num_merges(self) -> int:
        return len(self.merges)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for left, right in self.merges:
                f.write(f"{left} {right}\n")

    @classmethod
    def load(cls, path) -> "BpeModel":
        merges = []
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                parts = line.rstrip("\n").split(" ")
                if len(parts) != 2:
                    raise PipelineError(f"{path}:{lineno}: malformed merge line")
                merges.append((parts[0], parts[1]))
        return cls(merges)


def _pair_counts(words: dict[tuple[str, ...], int]) -> Counter:
    counts: Counter = Counter()
    for symbols, freq in words.items():
        for pair in zip(symbols, symbols[1:]):
            counts[pair] += freq
    return counts


def _merge_word(symbols: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    left, right = pair
    out: list[str] = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == left and symbols[i + 1] == right:
            out.append(left + right)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def learn_bpe(corpus: list[str], num_merges: int) -> BpeModel:
    """Greedy BPE over the corpus word-frequency dictionary.

    Each step merges the most frequent adjacent symbol pair (ties broken
    lexicographically by pair) and stops early when no pair occurs twice.
    """
    if num_merges < 0:
        raise PipelineError("num_merges must be >= 0")
    word_freq = Counter(tok for line in corpus for tok in line.split())
    if not word_freq:
        raise PipelineError("cannot learn BPE from an empty corpus")
    words = {tuple(word): freq for word, freq in word_freq.items()}
    merges: list[tuple[str, str]] = []
    for _ in range(num_merges):
        counts = _pair_counts(words)
        if not counts:
            break
        best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        pair, freq = best
        if freq < 2:
            break
        merges.append(pair)
        words = {_merge_word(sym, pair): f for sym, f in words.items()}
    return BpeModel(merges)


def apply_bpe(word: str, model: BpeModel) -> list[str]:
    """Split a word into subwords by applying merges in priority order.

    The concatenation of the result always reconstructs the input word.
    """
    if not word:
        return []
    rank = {pair: i for i, pair in enumerate(model.merges)}
    symbols = list(word)
    while len(symbols) > 1:
        pairs = [(rank.get((a, b)), i) for i, (a, b) in enumerate(zip(symbols, symbols[1:]))]
        candidates = [(r, i) for r, i in pairs if r is not None]
        if not candidates:
            break
        best_rank = min(r for r, _ in candidates)
        merged = _merge_word(tuple(symbols), model.merges[best_rank])
        symbols = list(merged)
    return symbols


def mark_continuations(subwords: list[str]) -> list[str]:
    """Append the ``@@`` marker to every non-final subword of one word."""
    return [s + CONTINUATION for s in subwords[:-1]] + subwords[-1:]


def strip_marker(subword: str) -> str:
    return subword[: -len(CONTINUATION)] if subword.endswith(CONTINUATION) else subword


def segment_sentence(tokens: list[str], model: BpeModel | None) -> list[str]:
    """BPE-split each token, emitting marked subwords.

    ``model=None`` means word-level: tokens pass through unchanged.  A model
    with zero merges is character-level.
    """
    if model is None:
        return list(tokens)
    out: list[str] = []
    for tok in tokens:
        out.extend(mark_continuations(apply_bpe(tok, model)))
    return out


@dataclass
class Vocab:
    tokens: list[str]
    id_of: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.tokens)

    def encode(self, token: str) -> int:
        return self.id_of.get(token, UNK)

    def decode(self, ids: list[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for tok in self.tokens:
                f.write(tok + "\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, encoding="utf-8") as f:
            tokens = [line.rstrip("\n") for line in f]
        if tokens[: len(RESERVED)] != RESERVED:
            raise PipelineError(f"{path}: vocab file missing reserved tokens")
        return cls(tokens, {t: i for i, t in enumerate(tokens)})


def build_vocab(corpus: list[str], max_size: int) -> Vocab:
    """Reserved tokens first, then subwords by descending frequency
    (ties lexicographic), truncated to ``max_size``."""
    if max_size < 5:
        raise PipelineError("max_size must be >= 5 (reserved tokens plus one)")
    freq = Counter(tok for line in corpus for tok in line.split())
    for tok in RESERVED:
        freq.pop(tok, None)
    if not freq:
        raise PipelineError("cannot build a vocabulary from an empty corpus")
    ordered = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    tokens = RESERVED + [t for t, _ in ordered[: max_size - len(RESERVED)]]
    return Vocab(tokens, {t: i for i, t in enumerate(tokens)})


def subword_pronunciation(subword: str, lexicon: Lexicon, rng: Random) -> PronunciationSeq:
    """Pronounce a subword (marker stripped), same rule order as full words."""
    return pronounce(strip_marker(subword), lexicon, rng)


@dataclass
class EncodedSentence:
    """Numericalized sentence; source side carries one pronunciation per subword."""

    token_ids: list[int]
    pron_seqs: list[PronunciationSeq] | None = None

    def __post_init__(self):
        if self.pron_seqs is not None and len(self.pron_seqs) != len(self.token_ids):
            raise PipelineError(
                f"{len(self.token_ids)} token ids but {len(self.pron_seqs)} pronunciation seqs"
            )


def encode_sentence(
    tokens: list[str],
    bpe: BpeModel | None,
    vocab: Vocab,
    lexicon: Lexicon | None,
    rng: Random | None,
    side: str,
    max_len: int = 256,
) -> EncodedSentence:
    """BPE-split, map to vocab ids, and (source side) attach pronunciations.

    Target sentences are wrapped in <bos>/<eos>.  Sentences longer than
    ``max_len`` subwords are rejected.
    """
    if side not in ("source", "target"):
        raise PipelineError(f"side must be 'source' or 'target', got {side!r}")
    subwords = segment_sentence(tokens, bpe)
    if len(subwords) > max_len:
        raise SentenceTooLongError(len(subwords), max_len)
    ids = [vocab.encode(s) for s in subwords]
    if side == "target":
        return EncodedSentence([BOS] + ids + [EOS])
    if lexicon is None or rng is None:
        raise PipelineError("source-side encoding requires a lexicon and an rng")
    prons = [subword_pronunciation(s, lexicon, rng) for s in subwords]
    return EncodedSentence(ids, prons)
