# src/ui/gradio_interface.py
"""
Gradio demo for textline recognition.

Upload a textline image and get the best transcript plus the ranked beam
hypotheses with their scores.
"""

from datetime import datetime
from typing import Any, Dict, List, Optional, Tuple

import gradio as gr
import numpy as np

from ..core.controllers.recognition_controller import RecognitionController
from ..data.images import ImageTensor
from ..utils.errors import InputError, error_handler
from ..utils.logging import logger

HypothesisRow = List[Any]


class RecognitionInterface:
    """
    Recognition web interface.

    `handle` is a plain method so it can be exercised without a running
    server; `create_interface` wires it into a Blocks layout.
    """

    def __init__(self, controller: RecognitionController, title: str = "desk-trocr"):
        self.controller = controller
        self.title = title
        self.interface: Optional[gr.Blocks] = None
        self.requests = 0
        self.failures = 0
        self.load_start_time: Optional[datetime] = None
        logger.info("RecognitionInterface initialized")

    def to_image(self, array: np.ndarray) -> ImageTensor:
        """Uploaded uint8 array (gray, RGB or RGBA) to the model's channel count."""
        array = np.asarray(array)
        if array.ndim == 3 and array.shape[2] == 4:
            array = array[:, :, :3]
        if array.ndim not in (2, 3) or (array.ndim == 3 and array.shape[2] != 3):
            raise InputError(f"unsupported image array shape {array.shape}")
        if array.dtype != np.uint8:
            array = np.clip(array, 0, 255).astype(np.uint8)
        image = ImageTensor.from_uint8(array)
        return image.with_channels(self.controller.model.config.encoder.channels)

    def handle(self, array: Optional[np.ndarray]) -> Tuple[str, List[HypothesisRow], str]:
        """
        Recognize one uploaded image.

        Returns:
            Tuple of (transcript, [[rank, hypothesis, score], ...], status message)
        """
        if array is None:
            return "", [], "Upload a textline image."
        self.requests += 1
        try:
            result = self.controller.recognize_image(self.to_image(array))
        except Exception as e:
            self.failures += 1
            info = error_handler.handle_error(e, context="ui recognize")
            return "", [], f"Error ({info['error_type']}): {info['message']}"
        rows = [[rank, text, round(score, 4)] for rank, (text, score) in enumerate(result.hypotheses, start=1)]
        return result.text, rows, f"{len(rows)} hypotheses, {result.generated_tokens} tokens"

    def create_interface(self) -> gr.Blocks:
        if self.interface is not None:
            return self.interface
        self.load_start_time = datetime.now()

        with gr.Blocks(title=self.title) as interface:
            gr.Markdown(f"# {self.title}\nUpload a single textline image.")
            with gr.Row():
                with gr.Column(scale=1):
                    image_input = gr.Image(label="Textline image", type="numpy", image_mode="RGB")
                    run_button = gr.Button("Recognize", variant="primary")
                with gr.Column(scale=1):
                    transcript = gr.Textbox(label="Transcript", interactive=False)
                    hypotheses = gr.Dataframe(
                        headers=["rank", "hypothesis", "score"],
                        label="Beam hypotheses",
                        interactive=False,
                    )
                    status = gr.Markdown()

            run_button.click(self.handle, inputs=[image_input], outputs=[transcript, hypotheses, status])

        self.interface = interface
        logger.info("Gradio interface created")
        return interface

    def get_performance_metrics(self) -> Dict[str, Any]:
        load_time = None
        if self.load_start_time:
            load_time = (datetime.now() - self.load_start_time).total_seconds()
        return {
            "interface_load_time": load_time,
            "requests": self.requests,
            "failures": self.failures,
            **self.controller.metrics,
        }


def create_gradio_interface(controller: RecognitionController) -> gr.Blocks:
    """
    Create and return the recognition Blocks interface.

    Args:
        controller: Recognition controller backed by a loaded checkpoint

    Returns:
        Gradio Blocks interface
    """
    return RecognitionInterface(controller).create_interface()
