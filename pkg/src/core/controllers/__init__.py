"""Orchestration of recognition over images and files."""

from .recognition_controller import FileResult, RecognitionController, RecognitionResult

__all__ = ["RecognitionController", "RecognitionResult", "FileResult"]
