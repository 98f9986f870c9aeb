"""Gradio recognition demo."""

from .gradio_interface import RecognitionInterface, create_gradio_interface

__all__ = ["RecognitionInterface", "create_gradio_interface"]
