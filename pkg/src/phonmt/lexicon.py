"""Pronunciation lexicon: loading, tone stripping, and pronunciation assignment.

A lexicon maps surface forms (characters or multi-character words) to one or
more toneless pinyin syllable sequences.  Tokens without any known
pronunciation get the reserved unit ``<unk>``.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from random import Random

UNK_SYLLABLE = "<unk>"
UNK_ID = 0

# Pinyin tone diacritics -> base vowel.  u-umlaut romanizes to "v" so that
# syllable text stays ASCII.
_DIACRITIC_MAP = {}
for _base, _variants in [
    ("a", "āáǎà"),
    ("o", "ōóǒò"),
    ("e", "ēéěè"),
    ("i", "īíǐì"),
    ("u", "ūúǔù"),
    ("v", "ǖǘǚǜü"),
    ("e", "ê"),
    ("n", "ń ň ǹ".replace(" ", "")),
]:
    for _ch in _variants:
        _DIACRITIC_MAP[_ch] = _base

_TRAILING_TONE = re.compile(r"[1-5]$")

_SYLLABLE_TEXT = re.compile(r"^[a-z]+$")


class LexiconError(ValueError):
    """Raised for malformed lexicon files."""


@dataclass(frozen=True)
class Syllable:
    """One pronunciation unit: a dense id plus its toneless pinyin text."""

    id: int
    text: str


# A pronunciation is an ordered tuple of syllable ids, always nonempty.
PronunciationSeq = tuple[int, ...]


@dataclass
class Lexicon:
    """Immutable after load; safe to share across threads."""

    entries: dict[str, list[PronunciationSeq]]
    syllables: list[Syllable] = field(default_factory=list)
    syllable_ids: dict[str, int] = field(default_factory=dict)

    @property
    def inventory_size(self) -> int:
        return len(self.syllables)

    def syllable_text(self, sid: int) -> str:
        return self.syllables[sid].text

    def seq_text(self, seq: PronunciationSeq) -> list[str]:
        return [self.syllables[sid].text for sid in seq]


def strip_tone(raw: str) -> str:
    """Strip tone marks from one pinyin syllable.

    Removes a trailing tone digit (1-5) and maps tone-diacritic vowels to
    their base vowels; result is lowercase.  Unknown characters pass through
    untouched (validated later at inventory construction).
    """
    normalized = unicodedata.normalize("NFC", raw.lower())
    out = [_DIACRITIC_MAP.get(ch, ch) for ch in normalized]
    return _TRAILING_TONE.sub("", "".join(out))


def _build_inventory(texts: set[str]) -> tuple[list[Syllable], dict[str, int]]:
    ordered = [UNK_SYLLABLE] + sorted(t for t in texts if t != UNK_SYLLABLE)
    syllables = [Syllable(i, t) for i, t in enumerate(ordered)]
    return syllables, {s.text: s.id for s in syllables}


def load_lexicon(path) -> Lexicon:
    """Load a TSV lexicon: ``surface<TAB>syl1 syl2 ...`` per line.

    Tones (digits or diacritics) are stripped on ingestion.  Repeated lines
    with the same surface form encode multiple pronunciations; exact duplicate
    (surface, pronunciation) pairs are dropped.  ``#`` starts a comment line.
    """
    raw_entries: dict[str, list[tuple[str, ...]]] = {}
    texts: set[str] = set()
    n_data_lines = 0
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise LexiconError(
                    f"{path}:{lineno}: expected 'surface<TAB>pronunciation', got {line!r}"
                )
            surface, pron_field = parts
            syls = tuple(strip_tone(s) for s in pron_field.split())
            if not surface or not syls:
                raise LexiconError(f"{path}:{lineno}: empty surface or pronunciation")
            for syl in syls:
                if not _SYLLABLE_TEXT.match(syl):
                    raise LexiconError(
                        f"{path}:{lineno}: invalid syllable {syl!r} (lowercase ASCII only)"
                    )
            n_data_lines += 1
            prons = raw_entries.setdefault(surface, [])
            if syls not in prons:
                prons.append(syls)
            texts.update(syls)
    if n_data_lines == 0:
        raise LexiconError(f"{path}: no lexicon entries")
    syllables, syllable_ids = _build_inventory(texts)
    entries = {
        surface: [tuple(syllable_ids[t] for t in seq) for seq in prons]
        for surface, prons in raw_entries.items()
    }
    return Lexicon(entries=entries, syllables=syllables, syllable_ids=syllable_ids)


def load_default_lexicon() -> Lexicon:
    """Load the Mandarin lexicon shipped with the package."""
    ref = resources.files("phonmt.data").joinpath("mandarin_lexicon.tsv")
    with resources.as_file(ref) as path:
        return load_lexicon(path)


def pronounce(token: str, lexicon: Lexicon, rng: Random) -> PronunciationSeq:
    """Assign a pronunciation to ``token``.

    Rule order: (1) direct lexicon lookup, picking uniformly among multiple
    pronunciations; (2) if every character of the token is in the lexicon,
    the concatenation of per-character pronunciations; (3) otherwise
    ``(<unk>,)``.  Deterministic given the rng state.
    """
    if not token:
        raise ValueError("cannot pronounce an empty token")
    prons = lexicon.entries.get(token)
    if prons is not None:
        return prons[0] if len(prons) == 1 else tuple(rng.choice(prons))
    if len(token) > 1 and all(ch in lexicon.entries for ch in token):
        out: list[int] = []
        for ch in token:
            out.extend(pronounce(ch, lexicon, rng))
        return tuple(out)
    return (UNK_ID,)


def syllable_inventory(lexicon: Lexicon) -> list[Syllable]:
    """The full ordered syllable inventory, ``<unk>`` first."""
    return list(lexicon.syllables)
