# tests/unit/test_tokenizer.py
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.core.tokenizer.bpe import (
    BOS_ID,
    EOS_ID,
    SPECIAL_TOKENS,
    UNK_ID,
    WORD_MARKER,
    BpeTokenizer,
    Vocabulary,
    train_bpe,
)
from src.utils.errors import StorageError, TokenIndexError, TokenizerError, TrainingError
from tests.helpers import SMALL_CORPUS

ALPHABET = sorted(set("".join(SMALL_CORPUS)) - {" "})
in_alphabet = st.text(alphabet=ALPHABET + [" "], max_size=40)


class TestTrainBpe:
    """Test merge learning on hand-checkable corpora."""

    def test_most_frequent_pair_merges_first(self):
        vocabulary, merges = train_bpe(["aaab"], target_vocab=8)
        assert merges[0] == ("a", "a")
        assert len(vocabulary) <= 8

    def test_no_budget_means_no_merges(self):
        # alphabet {a, b, marker} plus four specials
        vocabulary, merges = train_bpe(["aaab"], target_vocab=7)
        assert merges == []
        assert len(vocabulary) == 7

    def test_frequent_pair_precedes_rare_ones(self):
        _, merges = train_bpe(["ab", "ab", "cd"], target_vocab=20)
        first_cd = next(i for i, pair in enumerate(merges) if "c" in pair or "d" in pair)
        assert merges.index(("a", "b")) < first_cd

    def test_ties_break_lexicographically(self):
        # ("a","b") and ("b", marker) both occur twice
        _, merges = train_bpe(["ab", "ab"], target_vocab=9)
        assert merges[0] == ("a", "b")

    def test_specials_lead_the_vocabulary(self):
        vocabulary, merges = train_bpe(SMALL_CORPUS, target_vocab=40)
        assert tuple(vocabulary.id_to_piece[:4]) == SPECIAL_TOKENS
        products = {left + right for left, right in merges}
        assert not products & set(SPECIAL_TOKENS)

    def test_vocabulary_is_a_bijection(self):
        vocabulary, _ = train_bpe(SMALL_CORPUS, target_vocab=40)
        for i, piece in enumerate(vocabulary.id_to_piece):
            assert vocabulary.piece_to_id[piece] == i

    def test_alphabet_includes_marker(self):
        vocabulary, _ = train_bpe(["ab"], target_vocab=7)
        assert WORD_MARKER in vocabulary

    def test_empty_corpus(self):
        with pytest.raises(TrainingError):
            train_bpe([], target_vocab=10)

    def test_target_below_alphabet(self):
        with pytest.raises(TokenizerError):
            train_bpe(["abcdef"], target_vocab=6)

    def test_duplicate_pieces_rejected(self):
        with pytest.raises(TokenizerError):
            Vocabulary(list(SPECIAL_TOKENS) + ["a", "a"])


class TestEncodeDecode:
    def setup_method(self):
        self.tokenizer = BpeTokenizer.train(SMALL_CORPUS, target_vocab=40)

    def test_empty_string(self):
        assert self.tokenizer.encode("") == []
        assert self.tokenizer.decode([]) == ""

    def test_hand_run_merges(self):
        tokenizer = BpeTokenizer.train(["aaab"], target_vocab=8)
        assert tokenizer.pieces(tokenizer.encode("aaab")) == ["aa", "a", "b", WORD_MARKER]

    def test_no_bos_or_eos_added(self):
        ids = self.tokenizer.encode("hello")
        assert BOS_ID not in ids and EOS_ID not in ids

    def test_specials_are_stripped(self):
        ids = self.tokenizer.encode("hello")
        assert self.tokenizer.decode([BOS_ID] + ids + [EOS_ID]) == self.tokenizer.decode(ids)

    def test_unknown_characters_map_to_unk(self):
        assert UNK_ID in self.tokenizer.encode("xyz")

    def test_literal_marker_in_text_maps_to_unk(self):
        tokenizer = BpeTokenizer.train(["ab\u2581c", "abc"], target_vocab=12)
        ids = tokenizer.encode("ab\u2581c")
        assert ids.count(UNK_ID) == 1
        assert tokenizer.decode(ids) == "abc"
        assert "b\u2581" not in tokenizer.vocabulary

    def test_out_of_range_id(self):
        with pytest.raises(TokenIndexError):
            self.tokenizer.decode([self.tokenizer.vocab_size])

    def test_training_strings_round_trip(self):
        for line in SMALL_CORPUS:
            assert self.tokenizer.decode(self.tokenizer.encode(line)) == line

    def test_encode_independent_of_call_order(self):
        forward = [self.tokenizer.encode(s) for s in SMALL_CORPUS]
        fresh = BpeTokenizer.train(SMALL_CORPUS, target_vocab=40)
        backward = [fresh.encode(s) for s in reversed(SMALL_CORPUS)]
        assert forward == list(reversed(backward))

    @settings(max_examples=1000, deadline=None)
    @given(in_alphabet)
    def test_round_trip_fuzz(self, text):
        assert self.tokenizer.decode(self.tokenizer.encode(text)) == text


class TestSerialization:
    def setup_method(self):
        self.tokenizer = BpeTokenizer.train(SMALL_CORPUS, target_vocab=40)

    def test_text_format_header(self):
        first = self.tokenizer.to_text().split("\n")[0]
        assert first == f"desk-trocr-bpe v1 {self.tokenizer.vocab_size}"

    def test_save_and_load(self, tmp_path):
        path = self.tokenizer.save(tmp_path / "tok" / "tokenizer.txt")
        loaded = BpeTokenizer.load(path)
        assert loaded.vocabulary.id_to_piece == self.tokenizer.vocabulary.id_to_piece
        assert loaded.merges == self.tokenizer.merges
        assert loaded.sha256() == self.tokenizer.sha256()

    def test_tabs_and_newlines_are_escaped(self):
        tokenizer = BpeTokenizer.train(["a\tb a\\b", "a\tb"], target_vocab=14)
        reloaded = BpeTokenizer.from_text(tokenizer.to_text())
        assert reloaded.vocabulary.id_to_piece == tokenizer.vocabulary.id_to_piece
        assert reloaded.encode("a\tb") == tokenizer.encode("a\tb")

    def test_bad_header(self):
        with pytest.raises(TokenizerError):
            BpeTokenizer.from_text("something else\n")

    def test_wrong_version(self):
        with pytest.raises(TokenizerError):
            BpeTokenizer.from_text("desk-trocr-bpe v9 4\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(StorageError):
            BpeTokenizer.load(tmp_path / "absent.txt")

    @settings(max_examples=1000, deadline=None)
    @given(in_alphabet)
    def test_reloaded_encodes_identically(self, text):
        reloaded = BpeTokenizer.from_text(self.tokenizer.to_text())
        assert reloaded.encode(text) == self.tokenizer.encode(text)
