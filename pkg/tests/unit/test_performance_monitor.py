# tests/unit/test_performance_monitor.py
import json

import pytest

from src.data.textgen import GlyphFont, render
from src.monitoring.performance_monitor import BenchReport, PerformanceMonitor, hardware_info
from src.storage.dataset_storage import ManifestEntry, write_image, write_manifest


def _lines():
    font = GlyphFont()
    return [render(word, font) for word in ("hello", "ink", "total paid", "cash")]


class TestPerformanceMonitor:
    def test_empty_input_reports_zeros(self, controller):
        report = PerformanceMonitor(controller).measure([])
        assert (report.sentences, report.tokens, report.sentences_per_second) == (0, 0, 0.0)
        assert report.hardware["threads"] == 2

    def test_counts_sentences_and_tokens(self, controller):
        images = _lines()
        monitor = PerformanceMonitor(controller)
        report = monitor.measure(images)
        expected_tokens = sum(r.generated_tokens for r in controller.recognize_images(images))
        assert report.sentences == 4
        assert report.tokens == expected_tokens
        assert report.wall_seconds > 0
        assert report.sentences_per_second == pytest.approx(4 / report.wall_seconds)
        assert monitor.report_history == [report]

    def test_manifest_and_export(self, controller, tmp_path):
        for i, image in enumerate(_lines()):
            write_image(tmp_path / f"{i}.pgm", image)
        manifest = write_manifest(tmp_path / "m.tsv", [ManifestEntry(f"{i}.pgm", "") for i in range(4)])
        monitor = PerformanceMonitor(controller)
        report = monitor.measure_manifest(manifest)
        path = monitor.export_report(report, tmp_path / "bench.json")
        data = json.loads(path.read_text(encoding="utf-8"))
        assert data["sentences"] == 4
        assert set(data["hardware"]) == {"machine", "cpu_physical", "cpu_logical", "memory_total_mb", "threads"}

    def test_rates_without_elapsed_time(self):
        report = BenchReport.from_totals(3, 9, 0.0, hardware_info(1))
        assert (report.sentences_per_second, report.tokens_per_second) == (0.0, 0.0)
