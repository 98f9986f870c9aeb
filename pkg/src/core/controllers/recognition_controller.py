# src/core/controllers/recognition_controller.py
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ...data.images import ImageTensor
from ...storage.checkpoint_storage import Checkpoint
from ...storage.dataset_storage import read_image
from ...utils.errors import error_handler
from ...utils.logging import logger
from ..model.model import VisionEncoderDecoder
from ..search.beam_search import Hypothesis, RestrictedVocabulary, SearchConfig, beam_search
from ..tokenizer.bpe import BpeTokenizer


@dataclass
class RecognitionResult:
    """Best transcript of one image plus the ranked beam."""
    text: str
    tokens: List[int]
    score: float
    finished: bool = True
    hypotheses: List[Tuple[str, float]] = field(default_factory=list)

    @property
    def generated_tokens(self) -> int:
        """Tokens produced by the decoder, counting EOS when it was emitted."""
        return len(self.tokens) + (1 if self.finished else 0)


@dataclass
class FileResult:
    id: str
    result: Optional[RecognitionResult] = None
    error: Optional[Dict[str, Any]] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def text(self) -> str:
        return self.result.text if self.result is not None else ""


class RecognitionController:
    """
    Runs the inference loop: resize, encode, beam search, detokenize.

    Files are processed on a thread pool; results always come back in input
    order. A file that cannot be read is reported and the batch continues.
    """

    def __init__(self, model: VisionEncoderDecoder, tokenizer: BpeTokenizer,
                 search: Optional[SearchConfig] = None, threads: int = 1):
        self.model = model.eval()
        self.tokenizer = tokenizer
        self.search = (search or SearchConfig()).validate()
        self.threads = max(1, threads)
        self.step_model = RestrictedVocabulary(model.decoder, tokenizer.vocab_size)
        self.metrics = {
            'images': 0,
            'failed_images': 0,
            'generated_tokens': 0,
        }
        logger.debug(f"RecognitionController ready: beam {self.search.beam}, {self.threads} threads")

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint, search: Optional[SearchConfig] = None,
                        threads: int = 1) -> "RecognitionController":
        return cls(checkpoint.build_model(), checkpoint.tokenizer(), search, threads)

    def _hypothesis_text(self, hyp: Hypothesis) -> str:
        return self.tokenizer.decode(hyp.tokens)

    def recognize_image(self, image: ImageTensor) -> RecognitionResult:
        memory = self.model.encode_one(image)
        ranked = beam_search(memory, self.step_model, self.search)
        best = ranked[0]
        return RecognitionResult(
            text=self._hypothesis_text(best),
            tokens=best.tokens,
            score=best.normalized_score,
            hypotheses=[(self._hypothesis_text(h), h.normalized_score) for h in ranked],
            finished=best.finished,
        )

    def recognize_images(self, images: Sequence[ImageTensor]) -> List[RecognitionResult]:
        """In-memory images on the thread pool, results in input order."""
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(self.recognize_image, images))

    def _recognize_file(self, item: Tuple[str, Path]) -> FileResult:
        sample_id, path = item
        try:
            return FileResult(sample_id, result=self.recognize_image(read_image(path)))
        except Exception as e:
            return FileResult(sample_id, error=error_handler.handle_error(e, context=f"recognize {path}"))

    def recognize_paths(self, paths: Sequence[Path], ids: Optional[Sequence[str]] = None) -> List[FileResult]:
        """
        Recognize image files.

        Args:
            paths: Image files
            ids: Output ids, one per path; defaults to the path strings

        Returns:
            One FileResult per path, in input order
        """
        ids = [str(p) for p in paths] if ids is None else list(ids)
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            results = list(pool.map(self._recognize_file, zip(ids, [Path(p) for p in paths])))
        failed = sum(1 for r in results if not r.ok)
        self.metrics['images'] += len(results)
        self.metrics['failed_images'] += failed
        self.metrics['generated_tokens'] += sum(r.result.generated_tokens for r in results if r.ok)
        logger.info(f"Recognized {len(results) - failed}/{len(results)} images")
        return results
