# tests/unit/test_beam_search.py
import numpy as np
import pytest

from src.core.search.beam_search import (
    RestrictedVocabulary,
    SearchConfig,
    beam_search,
    exhaustive_search,
    greedy,
    length_normalizer,
)
from src.core.tokenizer.bpe import BOS_ID, EOS_ID
from src.utils.errors import ConfigError
from tests.helpers import ScriptedStepModel, ToyStepModel


class TestGreedy:
    def test_follows_script_until_eos(self):
        result = greedy(None, ScriptedStepModel([5, 6, EOS_ID], vocab=8), max_len=10)
        assert result.tokens == [5, 6]
        assert not result.truncated
        assert result.score == pytest.approx(0.0, abs=1e-6)

    def test_eos_first_gives_empty_output(self):
        result = greedy(None, ScriptedStepModel([EOS_ID], vocab=8), max_len=10)
        assert result.tokens == []
        assert not result.truncated

    def test_stops_at_max_len(self):
        result = greedy(None, ScriptedStepModel([5, 6, 7, EOS_ID], vocab=8), max_len=2)
        assert result.tokens == [5, 6]
        assert result.truncated

    def test_ties_resolve_to_lowest_id(self):
        class Flat(ScriptedStepModel):
            def step(self, state, tokens):
                rows, state = super().step(state, tokens)
                return np.full_like(rows, -np.log(self.vocab)), state

        result = greedy(None, Flat([0], vocab=6), max_len=3)
        assert result.tokens == [0, 0, 0]

    def test_zero_max_len(self):
        with pytest.raises(ConfigError):
            greedy(None, ScriptedStepModel([EOS_ID], vocab=4), max_len=0)


class TestBeamSearch:
    def test_scripted_sequence_ranks_first(self):
        hyps = beam_search(None, ScriptedStepModel([4, 5, EOS_ID], vocab=8), SearchConfig(beam=3, max_len=8))
        assert hyps[0].tokens == [4, 5]
        assert hyps[0].finished
        assert hyps[0].ids[0] == BOS_ID and hyps[0].ids[-1] == EOS_ID

    def test_eos_first_gives_empty_output(self):
        hyps = beam_search(None, ScriptedStepModel([EOS_ID], vocab=8), SearchConfig(beam=4, max_len=8))
        assert hyps[0].tokens == []

    def test_width_one_equals_greedy(self):
        for seed in range(100):
            model = ToyStepModel(vocab=7, seed=seed)
            expected = greedy(None, model, max_len=6)
            best = beam_search(None, model, SearchConfig(beam=1, max_len=6))[0]
            assert best.tokens == expected.tokens
            assert best.score == pytest.approx(expected.score, abs=1e-12)
            assert best.finished == (not expected.truncated)

    def test_exhaustive_width_finds_the_optimum(self):
        vocab, max_len = 6, 4
        for seed in range(100):
            model = ToyStepModel(vocab=vocab, seed=seed)
            optimum = exhaustive_search(None, model, max_len)
            best = beam_search(None, model, SearchConfig(beam=vocab ** max_len, max_len=max_len))[0]
            assert best.score == pytest.approx(optimum.score, abs=1e-9)
            assert best.ids == optimum.ids

    def test_exhaustive_width_dominates_narrow_beams(self):
        vocab, max_len = 6, 4
        for seed in range(20):
            model = ToyStepModel(vocab=vocab, seed=seed)
            top = beam_search(None, model, SearchConfig(beam=vocab ** max_len, max_len=max_len))[0].score
            for width in (1, 2, 3, 5, 10):
                narrow = beam_search(None, model, SearchConfig(beam=width, max_len=max_len))[0].score
                assert top >= narrow - 1e-12

    def test_wider_beam_usually_scores_higher(self):
        improved = 0
        for seed in range(50):
            model = ToyStepModel(vocab=8, seed=1000 + seed)
            narrow = beam_search(None, model, SearchConfig(beam=1, max_len=6))[0].score
            wide = beam_search(None, model, SearchConfig(beam=4, max_len=6))[0].score
            improved += wide >= narrow - 1e-12
        assert improved >= 45

    def test_results_are_sorted_and_bounded(self):
        for seed in range(20):
            hyps = beam_search(None, ToyStepModel(vocab=7, seed=seed), SearchConfig(beam=5, max_len=6))
            assert 1 <= len(hyps) <= 5
            scores = [h.normalized_score for h in hyps]
            assert scores == sorted(scores, reverse=True)
            for hyp in hyps:
                assert hyp.finished == (hyp.ids[-1] == EOS_ID)
                assert EOS_ID not in hyp.tokens

    def test_unfinished_hypotheses_stop_at_max_len(self):
        hyps = beam_search(None, ScriptedStepModel([5], vocab=8), SearchConfig(beam=2, max_len=3))
        assert hyps[0].tokens == [5, 5, 5]
        assert not hyps[0].finished

    def test_length_penalty_sets_normalized_score(self):
        config = SearchConfig(beam=3, max_len=5, length_penalty=1.0)
        for hyp in beam_search(None, ToyStepModel(vocab=6, seed=3), config):
            assert hyp.normalized_score == pytest.approx(hyp.score / length_normalizer(hyp.length, 1.0))


class TestLengthNormalizer:
    def test_no_penalty(self):
        assert length_normalizer(17, 0.0) == 1.0

    def test_gnmt_form(self):
        assert length_normalizer(7, 1.0) == pytest.approx(2.0)
        assert length_normalizer(1, 2.0) == pytest.approx(1.0)


class TestRestrictedVocabulary:
    def test_masks_ids_beyond_limit(self):
        model = RestrictedVocabulary(ScriptedStepModel([9, EOS_ID], vocab=10), limit=8)
        result = greedy(None, model, max_len=4)
        assert all(token < 8 for token in result.tokens)

    def test_limit_at_vocab_is_transparent(self):
        inner = ToyStepModel(vocab=6, seed=2)
        state = inner.start(None)
        expected, _ = inner.step(state, [BOS_ID])
        masked, _ = RestrictedVocabulary(inner, limit=6).step(inner.start(None), [BOS_ID])
        np.testing.assert_array_equal(masked, expected)

    def test_beam_never_emits_masked_ids(self):
        model = RestrictedVocabulary(ToyStepModel(vocab=9, seed=4), limit=5)
        for hyp in beam_search(None, model, SearchConfig(beam=4, max_len=5)):
            assert max(hyp.ids) < 5


class TestSearchConfig:
    @pytest.mark.parametrize("kwargs", [{"beam": 0}, {"max_len": 0}, {"length_penalty": -0.5}])
    def test_invalid_values(self, kwargs):
        with pytest.raises(ConfigError):
            SearchConfig(**kwargs).validate()

    def test_defaults_are_valid(self):
        config = SearchConfig().validate()
        assert (config.beam, config.max_len, config.length_penalty) == (10, 64, 0.0)
