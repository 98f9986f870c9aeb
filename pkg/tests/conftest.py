"""Shared pytest fixtures: tiny models, a trained toy tokenizer and rendered textlines."""

import os
import tempfile

import pytest

# Keep test logs out of the working tree; must run before src is imported.
os.environ.setdefault("DESK_TROCR_LOG_DIR", os.path.join(tempfile.gettempdir(), "desk_trocr_test_logs"))
os.environ.setdefault("DESK_TROCR_LOG_LEVEL", "WARNING")

from src.core.controllers.recognition_controller import RecognitionController  # noqa: E402
from src.core.model.model import VisionEncoderDecoder  # noqa: E402
from src.core.search.beam_search import SearchConfig  # noqa: E402
from src.core.tokenizer.bpe import BpeTokenizer  # noqa: E402
from src.data.textgen import GlyphFont, render  # noqa: E402
from tests.helpers import SMALL_CORPUS, micro_config  # noqa: E402


@pytest.fixture
def micro_model() -> VisionEncoderDecoder:
    return VisionEncoderDecoder(micro_config(), seed=7)


@pytest.fixture(scope="session")
def small_tokenizer() -> BpeTokenizer:
    return BpeTokenizer.train(SMALL_CORPUS, target_vocab=40)


@pytest.fixture
def printed_font() -> GlyphFont:
    return GlyphFont()


@pytest.fixture
def hello_image(printed_font):
    return render("hello", printed_font)


@pytest.fixture
def controller(small_tokenizer) -> RecognitionController:
    # decoder wider than the tokenizer so the vocabulary restriction is exercised
    model = VisionEncoderDecoder(micro_config(vocab=small_tokenizer.vocab_size + 5), seed=21)
    return RecognitionController(model, small_tokenizer, SearchConfig(beam=3, max_len=6), threads=2)
