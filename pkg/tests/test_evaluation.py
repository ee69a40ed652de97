import numpy as np
import pytest

from phonmt.evaluation import (
    EvaluationError,
    bleu_multi_ref,
    nearest_syllables,
    robustness_report,
)
from phonmt.evaluation import TestSet as EvalSet
from phonmt.joint_embedding import JointEmbeddingParams
from phonmt.lexicon import load_lexicon


class TestBleu:
    def test_identity_is_100(self):
        hyps = ["the cat sat", "a b c d"]
        assert bleu_multi_ref(hyps, [list(hyps)]).bleu == pytest.approx(100.0)

    def test_hand_counted_fixture(self):
        score = bleu_multi_ref(["a b c d e"], [["a b c d f"]])
        assert score.precisions == pytest.approx((4 / 5, 3 / 4, 2 / 3, 1 / 2))
        assert score.brevity_penalty == 1.0
        assert score.bleu == pytest.approx(66.8740304976422, abs=1e-6)

    def test_multi_reference_clipping(self):
        score = bleu_multi_ref(["a b"], [["a b"], ["x y"]])
        assert score.bleu == pytest.approx(100.0)

    def test_zero_fourgram_gives_zero(self):
        # 4-grams exist but none match: no smoothing, so BLEU is 0
        score = bleu_multi_ref(["a b c d"], [["a b c e"]])
        assert score.bleu == 0.0

    def test_short_corpus_skips_empty_orders(self):
        # a 3-token identical corpus has no 4-grams; that order is excluded
        score = bleu_multi_ref(["a b c"], [["a b c"]])
        assert score.bleu == pytest.approx(100.0)

    def test_brevity_penalty(self):
        score = bleu_multi_ref(["a b c d"], [["a b c d e f g h"]])
        assert score.brevity_penalty == pytest.approx(np.exp(1 - 8 / 4))

    def test_closest_ref_length_tie_prefers_shorter(self):
        score = bleu_multi_ref(["a b c"], [["a b"], ["a b c d"]])
        assert score.ref_len == 2

    def test_permutation_invariant(self):
        hyps = ["a b c d e", "f g h i j", "a b x y z"]
        refs = [["a b c d f", "f g h i j", "a a a a a"]]
        fwd = bleu_multi_ref(hyps, refs)
        rev = bleu_multi_ref(hyps[::-1], [refs[0][::-1]])
        assert fwd.bleu == pytest.approx(rev.bleu)

    def test_duplicate_reference_never_decreases(self):
        hyps = ["a b c d e"]
        base = bleu_multi_ref(hyps, [["a b c d f"]])
        doubled = bleu_multi_ref(hyps, [["a b c d f"], ["a b c d f"]])
        assert doubled.bleu >= base.bleu

    def test_case_insensitive_default(self):
        assert bleu_multi_ref(["A B C D"], [["a b c d"]]).bleu == pytest.approx(100.0)
        assert bleu_multi_ref(
            ["A B C D"], [["a b c d"]], case_insensitive=False
        ).bleu == 0.0

    def test_misaligned_references_rejected(self):
        with pytest.raises(EvaluationError):
            bleu_multi_ref(["a", "b"], [["a"]])

    def test_empty_corpus_rejected(self):
        with pytest.raises(EvaluationError):
            bleu_multi_ref([], [[]])


class TestNearestSyllables:
    def _params(self, table):
        return JointEmbeddingParams(
            word_table=np.zeros((2, table.shape[1]), dtype=np.float32),
            pinyin_table=table.astype(np.float32),
            beta=1.0,
        )

    def _lexicon(self, write_lexicon):
        # inventory: <unk>, hao, you, yu  (ids 0..3)
        return load_lexicon(write_lexicon("有\tyou3\n与\tyu3\n好\thao3\n"))

    def test_duplicate_row_is_top_neighbor(self, write_lexicon):
        lex = self._lexicon(write_lexicon)
        table = np.array([[0.0, 1], [1, 0], [1, 0], [0, 1]])
        result = nearest_syllables(self._params(table), lex, "hao", 2)
        assert result[0] == ("you", pytest.approx(1.0))

    def test_orthogonal_rows_zero_similarity_id_order(self, write_lexicon):
        lex = self._lexicon(write_lexicon)
        table = np.eye(4)
        result = nearest_syllables(self._params(table), lex, "you", 3)
        assert [s for s, _ in result] == ["<unk>", "hao", "yu"]
        assert all(sim == pytest.approx(0.0) for _, sim in result)

    def test_unknown_query_rejected(self, write_lexicon):
        lex = self._lexicon(write_lexicon)
        with pytest.raises(EvaluationError):
            nearest_syllables(self._params(np.eye(4)), lex, "zzz", 2)

    def test_k_bound(self, write_lexicon):
        lex = self._lexicon(write_lexicon)
        with pytest.raises(EvaluationError):
            nearest_syllables(self._params(np.eye(4)), lex, "you", 4)


class TestRobustnessReport:
    def _identity_translator(self, sentences):
        return list(sentences)

    def _sets(self):
        src = ["a b c d e", "f g h i j"]
        clean = EvalSet("clean", src, [list(src)], 0.0, None)
        noisy = EvalSet("noisy0", src, [list(src)], 0.0, 7)  # prob-0 noise
        return clean, noisy

    def test_prob_zero_noisy_equals_clean(self):
        clean, noisy = self._sets()
        report = robustness_report({"identity": self._identity_translator}, clean, [noisy])
        assert report.scores["identity"]["noisy0"].bleu == report.scores["identity"]["clean"].bleu
        assert report.delta("identity", "noisy0") == 0.0

    def test_repeated_evaluation_identical(self):
        clean, noisy = self._sets()
        kwargs = dict(clean_set=clean, noisy_sets=[noisy])
        a = robustness_report({"m": self._identity_translator}, **kwargs)
        b = robustness_report({"m": self._identity_translator}, **kwargs)
        assert a.to_tsv() == b.to_tsv()

    def test_provenance_recorded(self):
        clean, noisy = self._sets()
        report = robustness_report({"m": self._identity_translator}, clean, [noisy])
        assert report.provenance["noisy0"] == (0.0, 7)
        assert "replace_prob" in report.to_tsv().splitlines()[0]

    def test_save_writes_tsv_table_and_figure(self, tmp_path):
        clean, noisy = self._sets()
        report = robustness_report({"m": self._identity_translator}, clean, [noisy])
        out = tmp_path / "report"
        report.save(out)
        for name in ("report.tsv", "report.txt", "report.png"):
            assert (out / name).exists() and (out / name).stat().st_size > 0
