"""Synthetic desk-scale translation task with controlled homophony.

Source sentences are sequences of single CJK-range characters; the target is
a deterministic per-syllable token mapping, so homophones share a target
word.  Training sentences use only the primary character of each homophone
pair; the alternates enter via noise or augmentation, which makes textual-only
models fragile and phonetic models robust by construction.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from random import Random

from .lexicon import Lexicon, load_lexicon
from .noise import HomophoneTable, ParallelCorpus, build_homophone_table

_CONSONANTS = "b d g k l m n p s t z".split()
_VOWELS = "a e i o u".split()


def _syllable_pool() -> list[str]:
    return [c + v for c in _CONSONANTS for v in _VOWELS]


@dataclass
class SyntheticTask:
    lexicon: Lexicon
    table: HomophoneTable
    train: ParallelCorpus
    heldout: ParallelCorpus
    primaries: list[str]
    alternates: list[str]
    target_of: dict[str, str]  # syllable -> target token


def _write_lexicon(tmp_path, lines: list[str]) -> Lexicon:
    with open(tmp_path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    return load_lexicon(tmp_path)


def make_synthetic_task(
    n_pairs: int = 500,
    n_heldout: int = 100,
    n_groups: int = 25,
    n_singles: int = 15,
    min_len: int = 4,
    max_len: int = 8,
    seed: int = 0,
    workdir=None,
) -> SyntheticTask:
    """Build lexicon, homophone table, and train/held-out parallel corpora.

    ``n_groups`` homophone pairs (two characters per syllable) plus
    ``n_singles`` characters with unique syllables.
    """
    import tempfile
    import os

    pool = _syllable_pool()
    if n_groups + n_singles > len(pool):
        raise ValueError("syllable pool exhausted; reduce n_groups/n_singles")
    group_syls = pool[:n_groups]
    single_syls = pool[n_groups : n_groups + n_singles]

    primaries, alternates = [], []
    lex_lines = []
    target_of = {}
    for j, syl in enumerate(group_syls):
        prim = chr(0x4E00 + 2 * j)
        alt = chr(0x4E00 + 2 * j + 1)
        primaries.append(prim)
        alternates.append(alt)
        lex_lines.append(f"{prim}\t{syl}")
        lex_lines.append(f"{alt}\t{syl}")
        target_of[syl] = f"w{syl}"
    singles = []
    for j, syl in enumerate(single_syls):
        ch = chr(0x5000 + j)
        singles.append(ch)
        lex_lines.append(f"{ch}\t{syl}")
        target_of[syl] = f"w{syl}"

    if workdir is None:
        workdir = tempfile.mkdtemp(prefix="phonmt-synth-")
    lex_path = os.path.join(workdir, "synthetic_lexicon.tsv")
    lexicon = _write_lexicon(lex_path, lex_lines)
    table = build_homophone_table(lexicon)

    char_syl = {}
    for j, syl in enumerate(group_syls):
        char_syl[primaries[j]] = syl
        char_syl[alternates[j]] = syl
    for j, syl in enumerate(single_syls):
        char_syl[singles[j]] = syl
    source_alphabet = primaries + singles

    rng = Random(seed)

    def sample_corpus(count: int) -> ParallelCorpus:
        src, tgt = [], []
        for _ in range(count):
            length = rng.randint(min_len, max_len)
            chars = [rng.choice(source_alphabet) for _ in range(length)]
            src.append(" ".join(chars))
            tgt.append(" ".join(target_of[char_syl[c]] for c in chars))
        return ParallelCorpus(src, tgt)

    train = sample_corpus(n_pairs)
    heldout = sample_corpus(n_heldout)
    return SyntheticTask(lexicon, table, train, heldout, primaries, alternates, target_of)


def reference_translation(task: SyntheticTask, src_line: str) -> str:
    """Ground-truth target for any source line over the task alphabet."""
    out = []
    for ch in src_line.split():
        seq = task.lexicon.entries[ch][0]
        syl = task.lexicon.seq_text(seq)[0]
        out.append(task.target_of[syl])
    return " ".join(out)
