"""Homophone-robust toy NMT: joint textual-phonetic embeddings, a pinyin
noise pipeline, and a BLEU-based robustness harness."""

__version__ = "0.1.0"
