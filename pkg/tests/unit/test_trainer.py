# tests/unit/test_trainer.py
import math

import numpy as np
import pytest

from src.core.autodiff import no_grad
from src.core.model.model import VisionEncoderDecoder
from src.core.tokenizer.bpe import BOS_ID, EOS_ID, PAD_ID
from src.core.training.optimizer import Adam, clip_grad_norm, global_grad_norm
from src.core.training.trainer import (
    BatchProducer,
    TrainingConfig,
    batch_loss,
    collate,
    make_training_pair,
    recognize_greedy,
    run_training,
    train_step,
)
from src.data.augment import AugmentPolicy
from src.data.images import ImageTensor
from src.data.textgen import GlyphFont, render
from src.utils.errors import ConfigError, InputError, TrainingError
from tests.helpers import micro_config

WORDS = ["hello", "total", "cash", "ink"]


def _image(seed: int) -> ImageTensor:
    return ImageTensor(np.random.default_rng(seed).random((1, 8, 16)))


def _snapshot(model):
    return {name: p.data.copy() for name, p in model.named_parameters()}


def _word_samples():
    font = GlyphFont()
    return [(render(word, font), word) for word in WORDS]


class TestTrainingPairs:
    def test_right_shift(self):
        pair = make_training_pair([5, 6, 7])
        assert pair.decoder_input == [BOS_ID, 5, 6, 7]
        assert pair.labels == [5, 6, 7, EOS_ID]

    def test_empty_target(self):
        pair = make_training_pair([])
        assert pair.decoder_input == [BOS_ID]
        assert pair.labels == [EOS_ID]

    def test_special_ids_rejected(self):
        with pytest.raises(InputError):
            make_training_pair([5, EOS_ID, 6])

    def test_collate_pads_to_longest(self):
        inputs, labels = collate([make_training_pair([5]), make_training_pair([5, 6, 7])])
        assert inputs.shape == labels.shape == (2, 4)
        assert inputs[0].tolist() == [BOS_ID, 5, PAD_ID, PAD_ID]
        assert labels[0].tolist() == [5, EOS_ID, PAD_ID, PAD_ID]
        assert labels[1].tolist() == [5, 6, 7, EOS_ID]


class TestBatchLoss:
    def test_padding_does_not_change_the_loss(self):
        model = VisionEncoderDecoder(micro_config(layers=2), seed=1)
        short = (_image(0), [5, 6])
        long = (_image(1), [7, 8, 9, 10, 11])
        alone_short = batch_loss(model, [short]).item()
        alone_long = batch_loss(model, [long]).item()
        together = batch_loss(model, [short, long]).item()
        expected = (3 * alone_short + 6 * alone_long) / 9
        assert together == pytest.approx(expected, abs=1e-12)

    def test_initial_loss_is_near_uniform(self):
        model = VisionEncoderDecoder(micro_config(), seed=2)
        loss = batch_loss(model, [(_image(i), [4 + i, 5 + i]) for i in range(4)]).item()
        assert abs(loss - math.log(12)) < 0.1 * math.log(12)

    def test_empty_batch(self, micro_model):
        with pytest.raises(InputError):
            batch_loss(micro_model, [])


class TestBatchLossGradient:
    """Test backprop through the whole model against central differences."""

    STEP = 1e-5

    @pytest.mark.parametrize("seed", range(3))
    def test_sampled_entries_of_every_parameter(self, seed):
        model = VisionEncoderDecoder(micro_config(layers=2), seed=seed)
        # uneven targets, so the shorter row carries ignored PAD labels
        batch = [(_image(seed), [5, 6]), (_image(seed + 50), [7, 8, 9, 10, 11])]
        params = dict(model.named_parameters())
        for param in params.values():
            param.zero_grad()
        batch_loss(model, batch).backward()

        rng = np.random.default_rng([seed, 17])
        with no_grad():
            for name, param in params.items():
                flat = param.data.reshape(-1)
                for index in rng.choice(flat.size, size=min(3, flat.size), replace=False):
                    original = flat[index]
                    flat[index] = original + self.STEP
                    plus = batch_loss(model, batch).item()
                    flat[index] = original - self.STEP
                    minus = batch_loss(model, batch).item()
                    flat[index] = original
                    numeric = (plus - minus) / (2 * self.STEP)
                    analytic = 0.0 if param.grad is None else param.grad.reshape(-1)[index]
                    assert abs(analytic - numeric) <= 1e-4 * max(1.0, abs(numeric)), (name, index)


class TestTrainStep:
    def test_zero_learning_rate_leaves_parameters(self):
        model = VisionEncoderDecoder(micro_config(), seed=3)
        before = _snapshot(model)
        optimizer = Adam(model.named_parameters(), lr=0.0)
        train_step([(_image(0), [5, 6])], model, optimizer)
        for name, value in _snapshot(model).items():
            np.testing.assert_array_equal(value, before[name])
        assert optimizer.state.step == 1

    def test_update_moves_parameters(self):
        model = VisionEncoderDecoder(micro_config(), seed=3)
        before = _snapshot(model)
        train_step([(_image(0), [5, 6])], model, Adam(model.named_parameters(), lr=1e-2))
        after = _snapshot(model)
        assert any(not np.array_equal(after[name], before[name]) for name in before)

    def test_overfits_a_single_pair(self):
        model = VisionEncoderDecoder(micro_config(layers=2), seed=4)
        optimizer = Adam(model.named_parameters(), lr=1e-2)
        batch = [(_image(5), [5, 9, 7])]
        losses = [train_step(batch, model, optimizer) for _ in range(200)]
        assert losses[-1] < 0.05
        assert recognize_greedy(model, batch[0][0], max_len=8) == [5, 9, 7]

    def test_non_finite_loss_raises_without_update(self):
        model = VisionEncoderDecoder(micro_config(), seed=5)
        model.decoder.output_proj.weight.data[0, 0] = np.nan
        before = _snapshot(model)
        optimizer = Adam(model.named_parameters(), lr=1e-2)
        with pytest.raises(TrainingError) as excinfo:
            train_step([(_image(0), [5, 6])], model, optimizer)
        assert excinfo.value.details["step"] == 1
        for name, value in _snapshot(model).items():
            np.testing.assert_array_equal(value, before[name])


class TestOptimizer:
    def test_warmup_ramps_linearly(self):
        model = VisionEncoderDecoder(micro_config(), seed=0)
        optimizer = Adam(model.named_parameters(), lr=1e-3, warmup_steps=4)
        assert [optimizer.current_lr(s) for s in (1, 2, 4, 5, 100)] == pytest.approx(
            [2.5e-4, 5e-4, 1e-3, 1e-3, 1e-3]
        )

    def test_clipping_bounds_the_global_norm(self):
        model = VisionEncoderDecoder(micro_config(), seed=0)
        params = model.parameters()
        for p in params:
            p.grad = np.full_like(p.data, 3.0)
        before = clip_grad_norm(params, 1.0)
        assert before > 1.0
        assert global_grad_norm(params) == pytest.approx(1.0, rel=1e-9)


class TestTrainingConfig:
    @pytest.mark.parametrize("kwargs", [
        {"epochs": 0}, {"batch_size": 0}, {"lr": -1.0}, {"max_grad_norm": 0.0},
        {"label_smoothing": 1.0}, {"warmup_fraction": 1.5},
    ])
    def test_invalid_values(self, kwargs):
        with pytest.raises(ConfigError):
            TrainingConfig(**kwargs).validate()

    def test_bad_import_rule(self):
        with pytest.raises(ConfigError):
            TrainingConfig(import_rules=[{"source": "decoder."}]).validate()


class TestBatchProducer:
    def test_epoch_order_is_a_seeded_permutation(self):
        samples = [(_image(i), [5]) for i in range(10)]
        producer = BatchProducer(samples, TrainingConfig(epochs=2, batch_size=3), seed=9, policy=None)
        first = producer.epoch_order(0)
        assert sorted(first.tolist()) == list(range(10))
        again = BatchProducer(samples, TrainingConfig(epochs=2, batch_size=3), seed=9, policy=None)
        np.testing.assert_array_equal(again.epoch_order(0), first)

    def test_yields_every_sample_each_epoch(self):
        samples = [(_image(i), [5 + i]) for i in range(7)]
        producer = BatchProducer(samples, TrainingConfig(epochs=2, batch_size=3), seed=1, policy=None)
        batches = list(producer)
        assert len(batches) == 6
        for epoch in (0, 1):
            targets = sorted(t[0] for e, _, batch in batches if e == epoch for _, t in batch)
            assert targets == [5 + i for i in range(7)]
        assert [last for _, last, _ in batches] == [False, False, True] * 2


class TestRunTraining:
    def _config(self, **overrides):
        values = dict(epochs=2, batch_size=2, lr=3e-3, warmup_fraction=0.0, val_max_len=8, prefetch=2)
        values.update(overrides)
        return TrainingConfig(**values)

    def test_same_seed_same_checkpoint(self, small_tokenizer):
        config = micro_config(vocab=small_tokenizer.vocab_size)
        runs = [
            run_training(self._config(), config, small_tokenizer, _word_samples(), seed=5, augment=AugmentPolicy())
            for _ in range(2)
        ]
        assert runs[0].loss_history == runs[1].loss_history
        assert runs[0].checkpoint.to_bytes() == runs[1].checkpoint.to_bytes()

    def test_different_seed_differs(self, small_tokenizer):
        config = micro_config(vocab=small_tokenizer.vocab_size)
        a = run_training(self._config(epochs=1), config, small_tokenizer, _word_samples(), seed=1)
        b = run_training(self._config(epochs=1), config, small_tokenizer, _word_samples(), seed=2)
        assert a.loss_history != b.loss_history

    def test_history_and_best_checkpoint(self, small_tokenizer):
        config = micro_config(vocab=small_tokenizer.vocab_size)
        result = run_training(self._config(), config, small_tokenizer, _word_samples(), seed=3)
        assert len(result.loss_history) == 4
        assert [step for step, _ in result.val_history] == [0, 2, 4]
        assert result.best_cer == min(value for _, value in result.val_history)
        assert result.checkpoint.training_step == result.best_step
        assert result.checkpoint.tokenizer_sha256 == small_tokenizer.sha256()

    def test_max_steps_caps_the_run(self, small_tokenizer):
        config = micro_config(vocab=small_tokenizer.vocab_size)
        result = run_training(self._config(max_steps=3), config, small_tokenizer, _word_samples(), seed=3)
        assert len(result.loss_history) == 3

    def test_stage_chaining_starts_from_previous_weights(self, small_tokenizer):
        config = micro_config(vocab=small_tokenizer.vocab_size)
        first = run_training(self._config(epochs=1), config, small_tokenizer, _word_samples(), seed=6)
        second = run_training(self._config(epochs=1, lr=0.0), config, small_tokenizer, _word_samples(),
                              seed=7, init_checkpoint=first.checkpoint)
        assert second.import_report.randomly_initialized == []
        for name, value in first.checkpoint.params.items():
            np.testing.assert_array_equal(second.checkpoint.params[name], value)
        # stage two starts where stage one's kept checkpoint left off
        assert second.val_history[0] == (0, first.best_cer)
        assert first.best_cer in [cer for _, cer in first.val_history]
        assert all(cer == first.best_cer for _, cer in second.val_history)

    def test_decoder_narrower_than_tokenizer(self, small_tokenizer):
        with pytest.raises(ConfigError):
            run_training(self._config(), micro_config(vocab=8), small_tokenizer, _word_samples())

    def test_empty_training_set(self, small_tokenizer):
        with pytest.raises(TrainingError):
            run_training(self._config(), micro_config(vocab=40), small_tokenizer, [])
