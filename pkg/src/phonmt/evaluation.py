"""Evaluation: corpus-level multi-reference 4-gram BLEU (multi-bleu.perl
semantics), clean-vs-noisy robustness reports, and pinyin-embedding
nearest-neighbor export.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .joint_embedding import JointEmbeddingParams
from .lexicon import Lexicon

MAX_NGRAM = 4


class EvaluationError(ValueError):
    pass


@dataclass
class BleuScore:
    bleu: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    hyp_len: int
    ref_len: int

    def __str__(self) -> str:
        p = "/".join(f"{x * 100:.1f}" for x in self.precisions)
        return (
            f"BLEU = {self.bleu:.2f}, {p} "
            f"(BP={self.brevity_penalty:.3f}, hyp_len={self.hyp_len}, ref_len={self.ref_len})"
        )


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_multi_ref(
    hypotheses: list[str],
    references: list[list[str]],
    case_insensitive: bool = True,
) -> BleuScore:
    """Corpus-level 4-gram BLEU with per-sentence max-clipping over references.

    Effective reference length is the closest reference length per sentence
    (ties broken toward the shorter); BP = min(1, exp(1 - ref/hyp)); no
    smoothing, so a zero precision at any populated n-gram order yields
    BLEU 0.  Orders the corpus is too short to populate are excluded from
    the geometric mean, so an exact short match still scores 100.
    """
    if not hypotheses:
        raise EvaluationError("empty hypothesis corpus")
    if not references:
        raise EvaluationError("need at least one reference set")
    for ref_set in references:
        if len(ref_set) != len(hypotheses):
            raise EvaluationError(
                f"reference set has {len(ref_set)} lines, hypotheses have {len(hypotheses)}"
            )

    matched = [0] * MAX_NGRAM
    total = [0] * MAX_NGRAM
    hyp_len = 0
    ref_len = 0
    for i, hyp_line in enumerate(hypotheses):
        if case_insensitive:
            hyp_line = hyp_line.lower()
        hyp = hyp_line.split()
        refs = [
            (r[i].lower() if case_insensitive else r[i]).split() for r in references
        ]
        hyp_len += len(hyp)
        ref_len += min((abs(len(r) - len(hyp)), len(r)) for r in refs)[1]
        for n in range(1, MAX_NGRAM + 1):
            hyp_counts = _ngrams(hyp, n)
            max_ref: Counter = Counter()
            for r in refs:
                for gram, c in _ngrams(r, n).items():
                    if c > max_ref[gram]:
                        max_ref[gram] = c
            total[n - 1] += max(len(hyp) - n + 1, 0)
            matched[n - 1] += sum(min(c, max_ref[gram]) for gram, c in hyp_counts.items())

    precisions = tuple(
        (matched[k] / total[k]) if total[k] > 0 else 0.0 for k in range(MAX_NGRAM)
    )
    if hyp_len == 0:
        bp = 0.0
    else:
        bp = min(1.0, math.exp(1.0 - ref_len / hyp_len))
    # Orders with no hypothesis n-grams at all (corpus shorter than n) are
    # excluded from the geometric mean; a zero precision at any populated
    # order still zeroes the score (no smoothing).
    populated = [k for k in range(MAX_NGRAM) if total[k] > 0]
    if populated and all(matched[k] > 0 for k in populated):
        log_sum = sum(math.log(matched[k] / total[k]) for k in populated)
        score = bp * math.exp(log_sum / MAX_NGRAM) * 100.0
    else:
        score = 0.0
    return BleuScore(score, precisions, bp, hyp_len, ref_len)


@dataclass
class TestSet:
    """One evaluation set: source sentences, references, noise provenance."""

    name: str
    sources: list[str]
    references: list[list[str]]
    replace_prob: float = 0.0
    seed: int | None = None


@dataclass
class RobustnessReport:
    """BLEU per (model, test set), with deltas against the clean set."""

    clean_name: str
    set_names: list[str]
    provenance: dict[str, tuple[float, int | None]]
    scores: dict[str, dict[str, BleuScore]] = field(default_factory=dict)

    def delta(self, model_label: str, set_name: str) -> float:
        row = self.scores[model_label]
        return row[set_name].bleu - row[self.clean_name].bleu

    def to_table(self) -> str:
        width = max(len(label) for label in self.scores) + 2
        head = "model".ljust(width) + "".join(n.rjust(14) for n in self.set_names)
        lines = [head, "-" * len(head)]
        for label, row in self.scores.items():
            cells = "".join(f"{row[n].bleu:14.2f}" for n in self.set_names)
            lines.append(label.ljust(width) + cells)
        lines.append("")
        for name in self.set_names:
            prob, seed = self.provenance[name]
            lines.append(f"# {name}: replace_prob={prob} seed={seed}")
        return "\n".join(lines)

    def to_tsv(self) -> str:
        lines = ["model\ttest_set\treplace_prob\tseed\tbleu\tdelta_vs_clean"]
        for label, row in self.scores.items():
            for name in self.set_names:
                prob, seed = self.provenance[name]
                lines.append(
                    f"{label}\t{name}\t{prob}\t{seed}\t"
                    f"{row[name].bleu:.4f}\t{self.delta(label, name):.4f}"
                )
        return "\n".join(lines) + "\n"

    def save(self, out_dir) -> None:
        """Write report.tsv, report.txt, and a grouped-bar figure report.png."""
        import os

        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.tsv"), "w", encoding="utf-8") as f:
            f.write(self.to_tsv())
        with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as f:
            f.write(self.to_table() + "\n")
        self.render_figure(os.path.join(out_dir, "report.png"))

    def render_figure(self, path) -> None:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        labels = list(self.scores)
        x = np.arange(len(self.set_names))
        width = 0.8 / max(len(labels), 1)
        fig, ax = plt.subplots(figsize=(7, 4))
        for k, label in enumerate(labels):
            vals = [self.scores[label][n].bleu for n in self.set_names]
            ax.bar(x + k * width, vals, width, label=label)
        ax.set_xticks(x + width * (len(labels) - 1) / 2)
        ax.set_xticklabels(self.set_names)
        ax.set_ylabel("BLEU")
        ax.set_title("Translation quality on clean and homophone-noised sets")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)


def robustness_report(
    translators: dict[str, "callable"],
    clean_set: TestSet,
    noisy_sets: list[TestSet],
    case_insensitive: bool = True,
) -> RobustnessReport:
    """Decode every set with every translator and tabulate BLEU plus deltas.

    ``translators`` maps a label (e.g. "beta=0.95") to a callable taking a
    list of source sentences and returning a list of hypothesis sentences.
    """
    all_sets = [clean_set] + list(noisy_sets)
    report = RobustnessReport(
        clean_name=clean_set.name,
        set_names=[s.name for s in all_sets],
        provenance={s.name: (s.replace_prob, s.seed) for s in all_sets},
    )
    for label, translate in translators.items():
        row = {}
        for ts in all_sets:
            hyps = translate(ts.sources)
            row[ts.name] = bleu_multi_ref(hyps, ts.references, case_insensitive)
        report.scores[label] = row
    return report


def nearest_syllables(
    params: JointEmbeddingParams, lexicon: Lexicon, query: str, k: int
) -> list[tuple[str, float]]:
    """Top-k pinyin-table neighbors of ``query`` by cosine similarity.

    The query itself is excluded; ties break by syllable id.
    """
    if query not in lexicon.syllable_ids:
        raise EvaluationError(f"unknown syllable {query!r}")
    p = params.pinyin_table.shape[0]
    if not 1 <= k < p:
        raise EvaluationError(f"k must be in [1, {p - 1}]")
    qid = lexicon.syllable_ids[query]
    table = params.pinyin_table.astype(np.float64)
    qvec = table[qid]
    norms = np.linalg.norm(table, axis=1) * (np.linalg.norm(qvec) + 1e-12) + 1e-12
    sims = table @ qvec / norms
    order = sorted(
        (i for i in range(p) if i != qid), key=lambda i: (-sims[i], i)
    )
    return [(lexicon.syllable_text(i), float(sims[i])) for i in order[:k]]
