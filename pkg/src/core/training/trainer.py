# src/core/training/trainer.py
"""
Teacher-forced training loop.

The decoder reads [BOS] + target and is scored against target + [EOS];
PAD positions carry no loss. Epoch order, augmentation draws and weight
initialisation all derive from the run seed, so a background data thread
never changes the result.
"""

import math
import queue
import threading
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ...data.augment import AugmentPolicy
from ...data.images import ImageTensor
from ...evaluation.metrics import cer
from ...storage.checkpoint_storage import Checkpoint
from ...utils.errors import ConfigError, InputError, TrainingError
from ...utils.logging import logger
from ...utils.seeding import derive_seed, make_rng
from ...utils.validators import validate_fraction, validate_positive_int
from ..autodiff import ops
from ..model.config import ModelConfig
from ..model.model import VisionEncoderDecoder
from ..model.weight_import import ImportReport, MappingRule, identity_rules, import_partial
from ..search.beam_search import RestrictedVocabulary, greedy
from ..tokenizer.bpe import BOS_ID, EOS_ID, NUM_SPECIAL, PAD_ID, BpeTokenizer
from .optimizer import Adam, clip_grad_norm, max_abs_grad

Batch = Sequence[Tuple[ImageTensor, Sequence[int]]]


@dataclass
class TrainingPair:
    decoder_input: List[int]
    labels: List[int]


def make_training_pair(target: Sequence[int]) -> TrainingPair:
    """Right-shift a target: input [BOS] + target, labels target + [EOS]."""
    target = [int(t) for t in target]
    specials = [t for t in target if t < NUM_SPECIAL]
    if specials:
        raise InputError(f"training target contains special token ids {specials}", token_ids=specials)
    return TrainingPair([BOS_ID] + target, target + [EOS_ID])


def collate(pairs: Sequence[TrainingPair]) -> Tuple[np.ndarray, np.ndarray]:
    """PAD-extend every pair to the batch's longest; returns ([B, T] inputs, [B, T] labels)."""
    length = max(len(p.decoder_input) for p in pairs)
    inputs = np.full((len(pairs), length), PAD_ID, dtype=np.int64)
    labels = np.full((len(pairs), length), PAD_ID, dtype=np.int64)
    for row, pair in enumerate(pairs):
        inputs[row, :len(pair.decoder_input)] = pair.decoder_input
        labels[row, :len(pair.labels)] = pair.labels
    return inputs, labels


def batch_loss(model: VisionEncoderDecoder, batch: Batch, label_smoothing: float = 0.0,
               rng: Optional[np.random.Generator] = None):
    """Mean cross-entropy over the non-PAD label positions of a batch."""
    if not batch:
        raise InputError("training batch is empty")
    images = [image for image, _ in batch]
    inputs, labels = collate([make_training_pair(target) for _, target in batch])
    logits = model(images, inputs, rng)
    return ops.cross_entropy(logits, labels, ignore_id=PAD_ID, label_smoothing=label_smoothing)


def train_step(batch: Batch, model: VisionEncoderDecoder, optimizer: Adam,
               rng: Optional[np.random.Generator] = None, label_smoothing: float = 0.0,
               max_grad_norm: float = 1.0) -> float:
    """
    One forward/backward/update.

    Returns:
        Mean loss over non-PAD label positions

    Raises:
        TrainingError: the loss or gradient is not finite; parameters are left untouched
    """
    model.train()
    optimizer.zero_grad()
    loss = batch_loss(model, batch, label_smoothing, rng)
    loss.backward()
    value = loss.item()
    params = [p for _, p in optimizer.params]
    step = optimizer.state.step + 1
    grad_norm = clip_grad_norm(params, max_grad_norm)
    if not math.isfinite(value) or not math.isfinite(grad_norm):
        largest = max_abs_grad(params)
        logger.error(f"Non-finite loss {value} at step {step}, max |grad| {largest}")
        raise TrainingError(
            f"non-finite loss {value} at step {step} (max |grad| {largest})",
            step=step, max_abs_grad=largest,
        )
    lr = optimizer.step()
    logger.debug(f"step {step}: loss {value:.6f}, grad norm {grad_norm:.4f}, lr {lr:.3g}")
    return value


def recognize_greedy(model: VisionEncoderDecoder, image: ImageTensor, max_len: int,
                     vocab_limit: Optional[int] = None) -> List[int]:
    model.eval()
    memory = model.encode_one(image)
    step_model = model.decoder if vocab_limit is None else RestrictedVocabulary(model.decoder, vocab_limit)
    return greedy(memory, step_model, max_len).tokens


def evaluate_cer(model: VisionEncoderDecoder, tokenizer: BpeTokenizer,
                 samples: Sequence[Tuple[ImageTensor, str]], max_len: int = 32) -> float:
    """Mean CER of greedy transcripts over samples."""
    if not samples:
        return 0.0
    scores = []
    for image, text in samples:
        tokens = recognize_greedy(model, image, max_len, tokenizer.vocab_size)
        scores.append(cer(tokenizer.decode(tokens), text))
    return float(np.mean(scores))


@dataclass
class TrainingConfig:
    epochs: int = 10
    batch_size: int = 16
    lr: float = 1e-4
    warmup_fraction: float = 0.05
    max_grad_norm: float = 1.0
    label_smoothing: float = 0.0
    eval_every: int = 0
    max_steps: int = 0
    evaluate_at_start: bool = True
    val_max_len: int = 32
    prefetch: int = 4
    augment: bool = True
    init_checkpoint: Optional[str] = None
    import_rules: List[Dict[str, Any]] = field(default_factory=list)

    def validate(self) -> "TrainingConfig":
        checks = [
            validate_positive_int("training.epochs", self.epochs),
            validate_positive_int("training.batch_size", self.batch_size),
            validate_positive_int("training.eval_every", self.eval_every, minimum=0),
            validate_positive_int("training.max_steps", self.max_steps, minimum=0),
            validate_positive_int("training.val_max_len", self.val_max_len),
            validate_positive_int("training.prefetch", self.prefetch),
            validate_fraction("training.warmup_fraction", self.warmup_fraction),
            validate_fraction("training.label_smoothing", self.label_smoothing, inclusive_high=False),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        if not self.lr >= 0.0:
            raise ConfigError(f"training.lr must be >= 0, got {self.lr}")
        if not self.max_grad_norm > 0.0:
            raise ConfigError(f"training.max_grad_norm must be > 0, got {self.max_grad_norm}")
        for rule in self.import_rules:
            MappingRule.from_dict(rule)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def mapping_rules(self) -> List[MappingRule]:
        if not self.import_rules:
            return identity_rules()
        return [MappingRule.from_dict(rule) for rule in self.import_rules]


@dataclass
class TrainingResult:
    checkpoint: Optional[Checkpoint] = None
    loss_history: List[float] = field(default_factory=list)
    val_history: List[Tuple[int, float]] = field(default_factory=list)
    best_cer: float = float("inf")
    best_step: int = 0
    import_report: Optional[ImportReport] = None

    def history(self) -> Dict[str, Any]:
        return {
            "loss": self.loss_history,
            "validation": [{"step": step, "cer": value} for step, value in self.val_history],
            "best_cer": self.best_cer,
            "best_step": self.best_step,
            "import_report": None if self.import_report is None else self.import_report.to_dict(),
        }


_END = object()


class BatchProducer:
    """Background thread that shuffles, augments and batches samples into a bounded queue."""

    def __init__(self, samples: Sequence[Tuple[ImageTensor, List[int]]], config: TrainingConfig,
                 seed: int, policy: Optional[AugmentPolicy]):
        self.samples = samples
        self.config = config
        self.seed = seed
        self.policy = policy
        self.queue: "queue.Queue[Any]" = queue.Queue(maxsize=config.prefetch)
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="desk-trocr-batches", daemon=True)

    def epoch_order(self, epoch: int) -> np.ndarray:
        return make_rng(self.seed, 2, epoch).permutation(len(self.samples))

    def _prepare(self, epoch: int, index: int) -> Tuple[ImageTensor, List[int]]:
        image, target = self.samples[index]
        if self.policy is not None:
            image = self.policy.apply(image, derive_seed(self.seed, epoch, index))
        return image, target

    def _put(self, item: Any) -> bool:
        while not self._stop.is_set():
            try:
                self.queue.put(item, timeout=0.1)
                return True
            except queue.Full:
                continue
        return False

    def _run(self) -> None:
        try:
            size = self.config.batch_size
            for epoch in range(self.config.epochs):
                order = self.epoch_order(epoch)
                for start in range(0, len(order), size):
                    batch = [self._prepare(epoch, int(i)) for i in order[start:start + size]]
                    last = start + size >= len(order)
                    if not self._put((epoch, last, batch)):
                        return
            self._put(_END)
        except Exception as e:  # handed to the training thread
            self._put(e)

    def __iter__(self):
        self._thread.start()
        try:
            while True:
                item = self.queue.get()
                if item is _END:
                    return
                if isinstance(item, Exception):
                    raise item
                yield item
        finally:
            self.close()

    def close(self) -> None:
        self._stop.set()
        if self._thread.is_alive():
            self._thread.join(timeout=5.0)


def run_training(config: TrainingConfig, model_config: ModelConfig, tokenizer: BpeTokenizer,
                 train_samples: Sequence[Tuple[ImageTensor, str]],
                 val_samples: Sequence[Tuple[ImageTensor, str]] = (),
                 seed: int = 0, init_checkpoint: Optional[Checkpoint] = None,
                 augment: Optional[AugmentPolicy] = None) -> TrainingResult:
    """
    Train a fresh model, optionally initialised from a previous checkpoint.

    Args:
        config: Loop hyperparameters
        model_config: Architecture of the trained model
        tokenizer: Wordpiece tokenizer; stored in the resulting checkpoint
        train_samples: (image, transcript) pairs
        val_samples: Held-out pairs for CER tracking; the training set is used when empty
        seed: Run seed
        init_checkpoint: Earlier stage whose weights are imported before the first step
        augment: Per-sample augmentation policy, applied online each epoch

    Returns:
        TrainingResult holding the checkpoint with the lowest validation CER
    """
    config.validate()
    if not train_samples:
        raise TrainingError("training set is empty")
    if model_config.decoder.vocab < tokenizer.vocab_size:
        raise ConfigError(
            f"decoder vocab {model_config.decoder.vocab} is smaller than the tokenizer's {tokenizer.vocab_size}"
        )

    model = VisionEncoderDecoder(model_config, seed=derive_seed(seed, 1))
    import_report = None
    if init_checkpoint is not None:
        import_report = import_partial(init_checkpoint.params, model, config.mapping_rules())

    encoded = [(image, tokenizer.encode(text)) for image, text in train_samples]
    validation = list(val_samples) or list(train_samples)
    policy = augment if (augment is not None and config.augment and augment.enabled) else None

    steps_per_epoch = math.ceil(len(encoded) / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    if config.max_steps:
        total_steps = min(total_steps, config.max_steps)
    optimizer = Adam(model.named_parameters(), lr=config.lr,
                     warmup_steps=int(round(config.warmup_fraction * total_steps)))
    dropout_rng = make_rng(seed, 3)

    result = TrainingResult(import_report=import_report)
    best_state: Optional["OrderedDict[str, np.ndarray]"] = None

    def evaluate(step: int) -> None:
        nonlocal best_state
        value = evaluate_cer(model, tokenizer, validation, config.val_max_len)
        result.val_history.append((step, value))
        logger.info(f"Validation CER {value:.4f} at step {step}")
        if value < result.best_cer:
            result.best_cer = value
            result.best_step = step
            best_state = OrderedDict((name, p.data.copy()) for name, p in model.named_parameters())

    logger.info(
        f"Training {model_config.parameter_count()} parameters on {len(encoded)} samples: "
        f"{total_steps} steps, batch {config.batch_size}, lr {config.lr}"
    )
    if config.evaluate_at_start:
        evaluate(0)

    step = 0
    producer = BatchProducer(encoded, config, seed, policy)
    try:
        for _epoch, last_in_epoch, batch in producer:
            loss = train_step(batch, model, optimizer, dropout_rng, config.label_smoothing, config.max_grad_norm)
            step += 1
            result.loss_history.append(loss)
            finished = step >= total_steps
            due = step % config.eval_every == 0 if config.eval_every else last_in_epoch
            if due or finished:
                evaluate(step)
            if finished:
                break
    finally:
        producer.close()

    if best_state is not None:
        model.load_state_dict(best_state)
    result.checkpoint = Checkpoint.from_model(
        model, tokenizer, training_step=result.best_step,
        metadata={"seed": seed, "best_cer": result.best_cer, "steps": step},
    )
    logger.info(f"Training finished after {step} steps; best CER {result.best_cer:.4f} at step {result.best_step}")
    return result
