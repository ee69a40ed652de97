from random import Random

import pytest
from hypothesis import given, settings, strategies as st

from phonmt.lexicon import UNK_ID, load_lexicon
from phonmt.pipeline import (
    BOS,
    EOS,
    RESERVED,
    UNK,
    BpeModel,
    EncodedSentence,
    PipelineError,
    SentenceTooLongError,
    Vocab,
    apply_bpe,
    build_vocab,
    encode_sentence,
    learn_bpe,
    mark_continuations,
    segment_sentence,
    strip_marker,
    subword_pronunciation,
)


class TestLearnBpe:
    def test_zero_merges(self):
        assert learn_bpe(["a b c"], 0).merges == []

    def test_single_merge_abab(self):
        # pair ("a","b") occurs twice inside "abab"; everything else once
        model = learn_bpe(["abab"], 1)
        assert model.merges == [("a", "b")]

    def test_stops_when_no_pair_repeats(self):
        model = learn_bpe(["abc"], 100)
        assert model.merges == []

    def test_tie_break_lexicographic(self):
        # "ab" and "cd" both occur twice; ("a","b") < ("c","d")
        model = learn_bpe(["ab cd ab cd"], 1)
        assert model.merges == [("a", "b")]

    def test_empty_corpus_rejected(self):
        with pytest.raises(PipelineError):
            learn_bpe(["", "  "], 10)

    def test_deterministic(self):
        corpus = ["the cat sat on the mat", "the cat ran"] * 3
        assert learn_bpe(corpus, 30).merges == learn_bpe(corpus, 30).merges

    def test_round_trip_reconstructs_repeated_words(self):
        # each distinct word appears twice so its pair chain is learnable
        words = [f"w{i}x{i % 7}" for i in range(100)]
        corpus = [" ".join(words), " ".join(words)]
        model = learn_bpe(corpus, 2000)
        assert all(apply_bpe(w, model) == [w] for w in words)


class TestApplyBpe:
    def test_single_merge(self):
        assert apply_bpe("abc", BpeModel([("a", "b")])) == ["ab", "c"]

    def test_empty_merge_list_splits_chars(self):
        assert apply_bpe("abc", BpeModel([])) == ["a", "b", "c"]

    def test_chained_merges_recover_word(self):
        model = BpeModel([("a", "b"), ("ab", "c")])
        assert apply_bpe("abc", model) == ["abc"]

    def test_priority_order_respected(self):
        # ("b","c") learned first, so "abc" -> a + bc even though ("a","b") exists
        model = BpeModel([("b", "c"), ("a", "b")])
        assert apply_bpe("abc", model) == ["a", "bc"]

    @given(st.text(alphabet="abcd", min_size=1, max_size=12))
    @settings(max_examples=80, deadline=None)
    def test_concatenation_reconstructs_word(self, word):
        model = learn_bpe(["abab abcd dcba bbcc"] * 2, 6)
        assert "".join(apply_bpe(word, model)) == word

    def test_markers(self):
        assert mark_continuations(["ab", "c"]) == ["ab@@", "c"]
        assert mark_continuations(["abc"]) == ["abc"]
        assert strip_marker("ab@@") == "ab"
        assert strip_marker("abc") == "abc"

    def test_segment_sentence_word_level_passthrough(self):
        assert segment_sentence(["foo", "bar"], None) == ["foo", "bar"]


class TestBuildVocab:
    def test_frequency_order_with_reserved_prefix(self):
        vocab = build_vocab(["a a b"], 6)
        assert vocab.tokens == RESERVED + ["a", "b"]

    def test_truncation_and_unk_mapping(self):
        vocab = build_vocab(["a a b b c"], 6)
        assert vocab.size == 6
        assert vocab.encode("c") == UNK

    def test_round_trip_identity(self):
        vocab = build_vocab(["x y z"], 10)
        ids = [vocab.encode(t) for t in ["x", "y", "z"]]
        assert vocab.decode(ids) == ["x", "y", "z"]

    def test_small_max_size_rejected(self):
        with pytest.raises(PipelineError):
            build_vocab(["a"], 4)

    def test_empty_corpus_rejected(self):
        with pytest.raises(PipelineError):
            build_vocab(["", ""], 10)

    def test_save_load(self, tmp_path):
        vocab = build_vocab(["a a b"], 6)
        path = tmp_path / "vocab.txt"
        vocab.save(path)
        loaded = Vocab.load(path)
        assert loaded.tokens == vocab.tokens and loaded.id_of == vocab.id_of


class TestBpeModelIO:
    def test_save_load(self, tmp_path):
        model = learn_bpe(["abab abab"], 3)
        path = tmp_path / "bpe.txt"
        model.save(path)
        assert BpeModel.load(path).merges == model.merges

    def test_malformed_file_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("a b c\n", encoding="utf-8")
        with pytest.raises(PipelineError):
            BpeModel.load(path)


class TestSubwordPronunciation:
    def test_lexicon_word(self, tiny_lexicon):
        seq = subword_pronunciation("中国", tiny_lexicon, Random(0))
        assert tiny_lexicon.seq_text(seq) == ["zhong", "guo"]

    def test_single_char(self, tiny_lexicon):
        seq = subword_pronunciation("中", tiny_lexicon, Random(0))
        assert tiny_lexicon.seq_text(seq) == ["zhong"]

    def test_symbol_gets_unk(self, tiny_lexicon):
        assert subword_pronunciation("@-@", tiny_lexicon, Random(0)) == (UNK_ID,)

    def test_marker_stripped_before_lookup(self, tiny_lexicon):
        marked = subword_pronunciation("中@@", tiny_lexicon, Random(0))
        assert tiny_lexicon.seq_text(marked) == ["zhong"]


class TestEncodeSentence:
    @pytest.fixture()
    def setup(self, tiny_lexicon):
        bpe = BpeModel([])  # char-level source
        vocab = build_vocab(["中 国 很 好"], 20)
        return bpe, vocab, tiny_lexicon

    def test_source_lengths_match(self, setup):
        bpe, vocab, lex = setup
        enc = encode_sentence(["中国"], bpe, vocab, lex, Random(0), "source")
        assert len(enc.token_ids) == len(enc.pron_seqs) == 2

    def test_oov_subword_keeps_real_pronunciation(self, setup):
        bpe, vocab, lex = setup
        enc = encode_sentence(["有"], bpe, vocab, lex, Random(0), "source")
        assert enc.token_ids == [UNK]
        assert lex.seq_text(enc.pron_seqs[0]) == ["you"]

    def test_target_wrapped_in_bos_eos(self, setup):
        _, vocab, _ = setup
        enc = encode_sentence(["中", "好"], None, vocab, None, None, "target")
        assert enc.token_ids[0] == BOS and enc.token_ids[-1] == EOS
        assert enc.pron_seqs is None

    def test_over_length_rejected(self, setup):
        bpe, vocab, lex = setup
        with pytest.raises(SentenceTooLongError) as err:
            encode_sentence(["中"] * 257, bpe, vocab, lex, Random(0), "source", max_len=256)
        assert err.value.length == 257

    def test_max_length_accepted(self, setup):
        bpe, vocab, lex = setup
        enc = encode_sentence(["中"] * 256, bpe, vocab, lex, Random(0), "source", max_len=256)
        assert len(enc.token_ids) == 256

    def test_bad_side_rejected(self, setup):
        bpe, vocab, lex = setup
        with pytest.raises(PipelineError):
            encode_sentence(["中"], bpe, vocab, lex, Random(0), "both")

    def test_mismatched_pron_count_rejected(self):
        with pytest.raises(PipelineError):
            EncodedSentence([1, 2], [(0,)])
