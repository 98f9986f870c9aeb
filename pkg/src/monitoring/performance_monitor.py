# src/monitoring/performance_monitor.py
"""Recognition throughput benchmarking."""

import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Sequence

import psutil

from ..core.controllers.recognition_controller import RecognitionController
from ..data.images import ImageTensor
from ..storage.dataset_storage import read_manifest, read_image, resolve_image_path
from ..storage.file_io import PathLike, write_json
from ..utils.logging import logger


def hardware_info(threads: int) -> Dict[str, Any]:
    memory = psutil.virtual_memory()
    return {
        "machine": platform.machine(),
        "cpu_physical": psutil.cpu_count(logical=False),
        "cpu_logical": psutil.cpu_count(logical=True),
        "memory_total_mb": round(memory.total / (1024 * 1024)),
        "threads": threads,
    }


@dataclass
class BenchReport:
    """Sentences and generated tokens over wall time, per second."""
    sentences: int = 0
    tokens: int = 0
    wall_seconds: float = 0.0
    sentences_per_second: float = 0.0
    tokens_per_second: float = 0.0
    hardware: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_totals(cls, sentences: int, tokens: int, wall_seconds: float,
                    hardware: Dict[str, Any]) -> "BenchReport":
        rate = (lambda n: n / wall_seconds) if wall_seconds > 0 else (lambda n: 0.0)
        return cls(sentences, tokens, wall_seconds, rate(sentences), rate(tokens), hardware)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class PerformanceMonitor:
    """Times recognition of a corpus with a fixed controller."""

    def __init__(self, controller: RecognitionController):
        self.controller = controller
        self.report_history: list = []

    def measure(self, images: Sequence[ImageTensor]) -> BenchReport:
        """
        Recognize images and report throughput.

        Image decoding is excluded from the timed region; an empty input
        reports zeros.
        """
        hardware = hardware_info(self.controller.threads)
        if not images:
            report = BenchReport(hardware=hardware)
        else:
            start = time.perf_counter()
            results = self.controller.recognize_images(images)
            wall = time.perf_counter() - start
            tokens = sum(r.generated_tokens for r in results)
            report = BenchReport.from_totals(len(results), tokens, wall, hardware)
        self.report_history.append(report)
        logger.info(
            f"Bench: {report.sentences} sentences, {report.tokens} tokens in {report.wall_seconds:.3f}s "
            f"({report.sentences_per_second:.2f} sentences/s, {report.tokens_per_second:.2f} tokens/s)"
        )
        return report

    def measure_manifest(self, manifest_path: PathLike) -> BenchReport:
        entries = read_manifest(manifest_path)
        images = [read_image(resolve_image_path(manifest_path, e)) for e in entries]
        return self.measure(images)

    def export_report(self, report: BenchReport, file_path: PathLike) -> Path:
        return write_json(file_path, report.to_dict())
