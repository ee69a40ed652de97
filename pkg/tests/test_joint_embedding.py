import numpy as np
import pytest

from phonmt.joint_embedding import (
    EmbeddingError,
    JointEmbeddingParams,
    embed_pronunciation_seq,
    embed_source_sequence,
    joint_embed_backward,
    joint_embed_token,
)
from phonmt.numerics import finite_diff_check
from phonmt.pipeline import EncodedSentence


def make_params(beta, v=6, p=5, d=4, seed=0, dtype=np.float32):
    rng = np.random.default_rng(seed)
    return JointEmbeddingParams(
        word_table=rng.normal(size=(v, d)).astype(dtype),
        pinyin_table=rng.normal(size=(p, d)).astype(dtype),
        beta=beta,
    )


class TestPronunciationEmbedding:
    def test_singleton_is_the_row(self):
        params = make_params(0.5)
        assert np.array_equal(embed_pronunciation_seq((2,), params), params.pinyin_table[2])

    def test_two_syllables_average(self):
        params = make_params(0.5)
        expected = (params.pinyin_table[1] + params.pinyin_table[3]) / 2
        assert np.allclose(embed_pronunciation_seq((1, 3), params), expected)

    def test_repeated_row_average_is_row(self):
        params = make_params(0.5)
        out = embed_pronunciation_seq((4, 4, 4), params)
        assert np.allclose(out, params.pinyin_table[4])

    def test_empty_seq_rejected(self):
        with pytest.raises(EmbeddingError):
            embed_pronunciation_seq((), make_params(0.5))

    def test_out_of_range_id_rejected(self):
        with pytest.raises(EmbeddingError):
            embed_pronunciation_seq((99,), make_params(0.5))


class TestJointEmbedToken:
    def test_beta_zero_is_word_row_bit_exact(self):
        params = make_params(0.0)
        out = joint_embed_token(2, (1,), params)
        assert out.tobytes() == params.word_table[2].tobytes()

    def test_beta_one_is_pron_embedding_bit_exact(self):
        params = make_params(1.0)
        out = joint_embed_token(2, (3,), params)
        assert out.tobytes() == params.pinyin_table[3].tobytes()

    def test_best_beta_mix(self):
        params = JointEmbeddingParams(
            word_table=np.array([[1.0, 0.0]]),
            pinyin_table=np.array([[0.0, 1.0]]),
            beta=0.95,
        )
        assert np.allclose(joint_embed_token(0, (0,), params), [0.05, 0.95])

    def test_affine_in_beta(self):
        rng = np.random.default_rng(3)
        w = rng.normal(size=(4, 6))
        p = rng.normal(size=(3, 6))
        seq = (0, 2)
        at = {
            b: joint_embed_token(1, seq, JointEmbeddingParams(w, p, b))
            for b in (0.0, 0.37, 1.0)
        }
        expected = at[0.0] + 0.37 * (at[1.0] - at[0.0])
        assert np.allclose(at[0.37], expected, rtol=1e-12)

    def test_invalid_beta_rejected(self):
        with pytest.raises(EmbeddingError):
            make_params(1.5)


class TestEmbedSourceSequence:
    def test_empty_sentence_gives_0xd(self):
        params = make_params(0.5, d=4)
        out = embed_source_sequence(EncodedSentence([], []), params)
        assert out.shape == (0, 4)

    def test_identical_positions_identical_rows(self):
        params = make_params(0.5)
        enc = EncodedSentence([2, 2, 2], [(1, 3)] * 3)
        out = embed_source_sequence(enc, params)
        assert np.array_equal(out[0], out[1]) and np.array_equal(out[1], out[2])

    def test_beta_one_homophone_swap_bit_exact(self):
        # two sentences differing only in token ids, same pronunciation seqs
        params = make_params(1.0)
        pron = [(2,), (1, 4), (0,)]
        a = embed_source_sequence(EncodedSentence([0, 1, 2], pron), params)
        b = embed_source_sequence(EncodedSentence([5, 3, 4], pron), params)
        assert a.tobytes() == b.tobytes()

    def test_length_mismatch_rejected(self):
        params = make_params(0.5)
        enc = EncodedSentence([1], [(0,)])
        enc.pron_seqs = []
        with pytest.raises(EmbeddingError):
            embed_source_sequence(enc, params)


class TestBackward:
    def _encoded(self):
        return EncodedSentence([1, 3, 1], [(0, 2), (4,), (2, 2, 1)])

    def test_beta_zero_no_pinyin_gradient(self):
        params = make_params(0.0, dtype=np.float64)
        g = np.ones((3, 4))
        wg, pg = joint_embed_backward(self._encoded(), params, g)
        assert np.all(pg == 0)
        assert np.any(wg != 0)

    def test_beta_one_no_word_gradient(self):
        params = make_params(1.0, dtype=np.float64)
        wg, pg = joint_embed_backward(self._encoded(), params, np.ones((3, 4)))
        assert np.all(wg == 0)
        assert np.any(pg != 0)

    def test_repeated_syllable_multiplicity(self):
        params = make_params(0.6, dtype=np.float64)
        g = np.zeros((3, 4))
        g[2] = 1.0  # only the third position, seq (2,2,1) of length 3
        _, pg = joint_embed_backward(self._encoded(), params, g)
        assert np.allclose(pg[2], 2 * 0.6 / 3 * np.ones(4))
        assert np.allclose(pg[1], 0.6 / 3 * np.ones(4))

    @pytest.mark.parametrize("beta", [0.0, 0.3, 0.95, 1.0])
    def test_matches_finite_differences(self, beta):
        rng = np.random.default_rng(7)
        enc = self._encoded()
        upstream = rng.normal(size=(3, 4))
        base = make_params(beta, dtype=np.float64)

        def loss_fn(params):
            jp = JointEmbeddingParams(params["word"], params["pinyin"], beta)
            out = embed_source_sequence(enc, jp)
            wg, pg = joint_embed_backward(enc, jp, upstream)
            return float(np.sum(out * upstream)), {"word": wg, "pinyin": pg}

        err = finite_diff_check(
            loss_fn,
            {"word": base.word_table.copy(), "pinyin": base.pinyin_table.copy()},
            probes=100,
            h=1e-4,
            seed=1,
        )
        assert err < 1e-4

    def test_shape_mismatch_rejected(self):
        params = make_params(0.5)
        with pytest.raises(EmbeddingError):
            joint_embed_backward(self._encoded(), params, np.ones((2, 4)))
