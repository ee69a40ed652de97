"""Homophone tables, noisy test-set construction, and training-set augmentation.

All randomness flows through explicitly seeded generators; per-sentence
generators are derived from (seed, line index) so serial and parallel
processing produce identical corpora.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random

from .lexicon import UNK_ID, Lexicon, PronunciationSeq


class NoiseError(ValueError):
    pass


def pron_key(lexicon: Lexicon, seq: PronunciationSeq) -> str:
    """Canonical string key for a pronunciation: syllables joined by '|'."""
    return "|".join(lexicon.seq_text(seq))


@dataclass
class HomophoneTable:
    """Groups of words sharing a toneless pinyin-sequence key.

    Words with multiple pronunciations belong to multiple groups; words whose
    only pronunciation is <unk> appear in no group.
    """

    groups: dict[str, tuple[str, ...]]
    word_keys: dict[str, list[str]] = field(default_factory=dict)

    def keys_of(self, word: str) -> list[str]:
        return self.word_keys.get(word, [])

    def has_homophones(self, word: str) -> bool:
        return any(len(self.groups[k]) >= 2 for k in self.keys_of(word))

    def alternatives(self, word: str, key: str) -> list[str]:
        return [w for w in self.groups.get(key, ()) if w != word]


@dataclass
class NoiseConfig:
    replace_prob: float
    seed: int
    mode: str = "test-set"  # "test-set" | "augmentation"

    def __post_init__(self):
        if not 0.0 <= self.replace_prob <= 1.0:
            raise NoiseError(f"replace_prob must be in [0,1], got {self.replace_prob}")


def build_homophone_table(lexicon: Lexicon, vocab=None) -> HomophoneTable:
    """Group lexicon words (optionally restricted to ``vocab``) by pronunciation key."""
    allowed = set(vocab) if vocab is not None else None
    raw: dict[str, set[str]] = {}
    word_keys: dict[str, list[str]] = {}
    for word, prons in lexicon.entries.items():
        if allowed is not None and word not in allowed:
            continue
        for seq in prons:
            if seq == (UNK_ID,):
                continue
            key = pron_key(lexicon, seq)
            raw.setdefault(key, set()).add(word)
            keys = word_keys.setdefault(word, [])
            if key not in keys:
                keys.append(key)
    groups = {k: tuple(sorted(ws)) for k, ws in raw.items()}
    return HomophoneTable(groups=groups, word_keys=word_keys)


def homophone_ratio(table: HomophoneTable, vocab) -> float:
    """Fraction of vocab words that belong to some group of size >= 2."""
    vocab = list(vocab)
    if not vocab:
        raise NoiseError("homophone_ratio over an empty vocabulary")
    n = sum(1 for w in vocab if table.has_homophones(w))
    return n / len(vocab)


def noisify_sentence(
    tokens: list[str], table: HomophoneTable, cfg: NoiseConfig, rng: Random
) -> tuple[list[str], int]:
    """Left-to-right scan replacing homophone-bearing tokens with probability
    ``cfg.replace_prob``.  Replacements are drawn uniformly from the token's
    group (keyed by a pronunciation drawn at replacement time), excluding the
    token itself.  Output length always equals input length.
    """
    out: list[str] = []
    replaced = 0
    for tok in tokens:
        keys = [k for k in table.keys_of(tok) if len(table.groups[k]) >= 2]
        if keys and rng.random() < cfg.replace_prob:
            key = keys[0] if len(keys) == 1 else rng.choice(keys)
            out.append(rng.choice(table.alternatives(tok, key)))
            replaced += 1
        else:
            out.append(tok)
    return out, replaced


def sentence_rng(seed: int, index: int, tag: str = "") -> Random:
    # str seeding hashes via sha512 internally: stable across runs and platforms.
    return Random(f"{seed}:{tag}:{index}")


def make_noisy_testset(
    corpus: list[str], table: HomophoneTable, replace_prob: float, seed: int
) -> list[str]:
    """Noisify every sentence with an rng derived from (seed, line index).

    Pure function of (corpus, prob, seed): repeated runs are identical.
    """
    cfg = NoiseConfig(replace_prob=replace_prob, seed=seed, mode="test-set")
    out = []
    for i, line in enumerate(corpus):
        noisy, _ = noisify_sentence(line.split(), table, cfg, sentence_rng(seed, i))
        out.append(" ".join(noisy))
    return out


@dataclass
class ParallelCorpus:
    """Line-aligned source/target sentence pairs."""

    src: list[str]
    tgt: list[str]

    def __post_init__(self):
        if len(self.src) != len(self.tgt):
            raise NoiseError(
                f"parallel corpus misaligned: {len(self.src)} source vs {len(self.tgt)} target lines"
            )

    def __len__(self) -> int:
        return len(self.src)


def _noisify_pair(src_line, table, cfg, seed, idx):
    """Noisify one source sentence, requiring >= 1 actual replacement.

    Retries with fresh derived rngs up to 10 times; returns None on failure
    (caller resamples a different pair).
    """
    tokens = src_line.split()
    for attempt in range(10):
        rng = sentence_rng(seed, idx, tag=f"aug{attempt}")
        noisy, count = noisify_sentence(tokens, table, cfg, rng)
        if count >= 1:
            return " ".join(noisy)
    return None


def augment_corpus(
    corpus: ParallelCorpus,
    table: HomophoneTable,
    ratio: float,
    replace_prob: float,
    seed: int,
) -> ParallelCorpus:
    """Append round(ratio*N) noisified copies of uniformly sampled pairs.

    Originals are preserved verbatim as a prefix; each appended source differs
    from its origin in at least one token (target side unchanged).
    """
    if ratio < 0:
        raise NoiseError(f"augmentation ratio must be >= 0, got {ratio}")
    n = len(corpus)
    if n == 0:
        raise NoiseError("cannot augment an empty corpus")
    target_count = round(ratio * n)
    if target_count == 0:
        return ParallelCorpus(list(corpus.src), list(corpus.tgt))
    if not any(len(ws) >= 2 for ws in table.groups.values()):
        raise NoiseError("homophone table has no groups of size >= 2; cannot create noise")

    cfg = NoiseConfig(replace_prob=replace_prob, seed=seed, mode="augmentation")
    picker = Random(f"{seed}:pick")
    indices: list[int] = []
    # Full passes without replacement; cycle when ratio > 1.
    while len(indices) < target_count:
        chunk = min(n, target_count - len(indices))
        indices.extend(picker.sample(range(n), chunk))

    new_src, new_tgt = list(corpus.src), list(corpus.tgt)
    used = set()
    for slot, idx in enumerate(indices):
        noisy = _noisify_pair(corpus.src[idx], table, cfg, seed, idx)
        if noisy is None:
            # Pair has no replaceable token (or repeatedly drew none);
            # resample among pairs not yet tried in this slot's fallback.
            for alt in picker.sample(range(n), n):
                if alt == idx or alt in used:
                    continue
                noisy = _noisify_pair(corpus.src[alt], table, cfg, seed, alt)
                if noisy is not None:
                    idx = alt
                    break
            else:
                raise NoiseError("no pair in the corpus admits a homophone replacement")
        if noisy is None:
            raise NoiseError("no pair in the corpus admits a homophone replacement")
        used.add(idx)
        new_src.append(noisy)
        new_tgt.append(corpus.tgt[idx])
    return ParallelCorpus(new_src, new_tgt)
