# src/data/images.py
"""In-memory image buffers with the ink-dark convention (0 = ink, 1 = paper)."""

from dataclasses import dataclass

import numpy as np

from ..utils.errors import InputError


@dataclass
class ImageTensor:
    """Pixels as a float64 [C, H, W] array clamped to [0, 1]; C is 1 or 3."""
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim == 2:
            pixels = pixels[None, :, :]
        if pixels.ndim != 3 or pixels.shape[0] not in (1, 3):
            raise InputError(f"image must be [C, H, W] with C in (1, 3), got shape {pixels.shape}")
        self.pixels = np.clip(pixels, 0.0, 1.0)

    @property
    def channels(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[2])

    @classmethod
    def blank(cls, height: int, width: int, channels: int = 1) -> "ImageTensor":
        return cls(np.ones((channels, height, width)))

    @classmethod
    def from_uint8(cls, array: np.ndarray) -> "ImageTensor":
        """Accepts [H, W] grayscale or [H, W, 3] RGB byte arrays."""
        array = np.asarray(array)
        if array.ndim == 3:
            array = np.transpose(array, (2, 0, 1))
        return cls(array.astype(np.float64) / 255.0)

    def to_uint8(self) -> np.ndarray:
        """[H, W] or [H, W, 3] bytes with pixel = round(255 * intensity)."""
        data = np.rint(self.pixels * 255.0).astype(np.uint8)
        return data[0] if self.channels == 1 else np.transpose(data, (1, 2, 0))

    def with_channels(self, channels: int) -> "ImageTensor":
        """Convert between grayscale and RGB (luma weights for RGB -> gray)."""
        if channels == self.channels:
            return self
        if channels == 3:
            return ImageTensor(np.repeat(self.pixels, 3, axis=0))
        if channels == 1:
            luma = np.tensordot(np.array([0.299, 0.587, 0.114]), self.pixels, axes=1)
            return ImageTensor(luma[None])
        raise InputError(f"unsupported channel count {channels}")

    def ink_mask(self, threshold: float = 0.5) -> np.ndarray:
        """Boolean [H, W] mask of pixels darker than threshold in every channel."""
        return np.all(self.pixels < threshold, axis=0)

    def copy(self) -> "ImageTensor":
        return ImageTensor(self.pixels.copy())
