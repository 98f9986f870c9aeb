"""Images, augmentation and synthetic textline generation."""

from .images import ImageTensor

__all__ = ["ImageTensor"]
