# src/data/augment.py
"""Textline image augmentations: rotation, blur, dilation, erosion, downscaling, underlining.

Each sample gets exactly one of seven choices (the six transforms or the
identity) with equal probability, drawn from a generator seeded by the
sample seed alone.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Tuple

import numpy as np
from scipy import ndimage

from ..core.model.encoder import resize
from ..utils.errors import ConfigError
from ..utils.seeding import make_rng
from ..utils.validators import validate_range
from .images import ImageTensor

TRANSFORMS = ("identity", "rotate", "blur", "dilate", "erode", "downscale", "underline")
BLANK_UNDERLINE_FRACTION = 0.9


@dataclass
class AugmentPolicy:
    """Which transforms may fire and the ranges their parameters are drawn from."""
    enabled: bool = True
    rotation_degrees: Tuple[float, float] = (-10.0, 10.0)
    blur_sigma: Tuple[float, float] = (0.5, 2.0)
    morph_kernel: int = 3
    downscale_factor: Tuple[float, float] = (0.3, 0.9)
    underline_thickness: Tuple[int, int] = (1, 2)
    underline_gap: Tuple[int, int] = (1, 3)

    def validate(self) -> "AugmentPolicy":
        for name in ("rotation_degrees", "blur_sigma", "downscale_factor",
                     "underline_thickness", "underline_gap"):
            ok, message = validate_range(f"augment.{name}", getattr(self, name))
            if not ok:
                raise ConfigError(message)
        low, high = self.rotation_degrees
        if low < -10.0 or high > 10.0:
            raise ConfigError(f"augment.rotation_degrees must lie within [-10, 10], got {self.rotation_degrees}")
        if self.blur_sigma[0] <= 0:
            raise ConfigError("augment.blur_sigma must be positive")
        if not 0.0 < self.downscale_factor[0] <= self.downscale_factor[1] <= 1.0:
            raise ConfigError(f"augment.downscale_factor must lie within (0, 1], got {self.downscale_factor}")
        if self.morph_kernel < 1 or self.morph_kernel % 2 == 0:
            raise ConfigError(f"augment.morph_kernel must be a positive odd size, got {self.morph_kernel}")
        if self.underline_thickness[0] < 1 or self.underline_gap[0] < 1:
            raise ConfigError("augment underline thickness and gap must be >= 1")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    def draw(self, sample_seed: int) -> Tuple[str, Dict[str, Any]]:
        """Pick the transform and its parameters for one sample."""
        rng = make_rng(sample_seed)
        name = TRANSFORMS[int(rng.integers(len(TRANSFORMS)))]
        params: Dict[str, Any] = {}
        if name == "rotate":
            params["degrees"] = float(rng.uniform(*self.rotation_degrees))
        elif name == "blur":
            params["sigma"] = float(rng.uniform(*self.blur_sigma))
        elif name in ("dilate", "erode"):
            params["kernel"] = self.morph_kernel
        elif name == "downscale":
            params["factor"] = float(rng.uniform(*self.downscale_factor))
        elif name == "underline":
            params["thickness"] = int(rng.integers(self.underline_thickness[0], self.underline_thickness[1] + 1))
            params["gap"] = int(rng.integers(self.underline_gap[0], self.underline_gap[1] + 1))
        return name, params

    def apply(self, img: ImageTensor, sample_seed: int) -> ImageTensor:
        return self.apply_with_record(img, sample_seed)[0]

    def apply_with_record(self, img: ImageTensor, sample_seed: int) -> Tuple[ImageTensor, str, Dict[str, Any]]:
        """Augmented image plus the transform name and parameters that produced it."""
        if not self.enabled:
            return img.copy(), "identity", {}
        name, params = self.draw(sample_seed)
        return TRANSFORM_FUNCTIONS[name](img, **params), name, params


def identity(img: ImageTensor) -> ImageTensor:
    return img.copy()


def rotate(img: ImageTensor, degrees: float) -> ImageTensor:
    """Bilinear rotation about the image centre, counter-clockwise for positive degrees.

    Each output offset (dx', dy') from the centre samples the source at
    (dx' cos t - dy' sin t, dx' sin t + dy' cos t); uncovered corners are white.
    """
    if degrees == 0.0:
        return img.copy()
    theta = math.radians(degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cy, cx = (img.height - 1) / 2.0, (img.width - 1) / 2.0
    rows, cols = np.mgrid[0:img.height, 0:img.width].astype(np.float64)
    dy, dx = rows - cy, cols - cx
    src_x = cx + dx * cos_t - dy * sin_t
    src_y = cy + dx * sin_t + dy * cos_t
    planes = [
        ndimage.map_coordinates(plane, [src_y, src_x], order=1, mode="constant", cval=1.0)
        for plane in img.pixels
    ]
    return ImageTensor(np.stack(planes))


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalised 1-D Gaussian sampled on [-ceil(3 sigma), ceil(3 sigma)]."""
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    return kernel / kernel.sum()


def gaussian_blur(img: ImageTensor, sigma: float) -> ImageTensor:
    """Separable Gaussian blur, radius ceil(3 sigma), edge-clamped."""
    radius = math.ceil(3.0 * sigma)
    planes = [
        ndimage.gaussian_filter(plane, sigma=sigma, mode="nearest", truncate=radius / sigma)
        for plane in img.pixels
    ]
    return ImageTensor(np.stack(planes))


def dilate(img: ImageTensor, kernel: int = 3) -> ImageTensor:
    """Grow dark ink: minimum filter over a kernel x kernel window."""
    return ImageTensor(np.stack([
        ndimage.minimum_filter(plane, size=kernel, mode="nearest") for plane in img.pixels
    ]))


def erode(img: ImageTensor, kernel: int = 3) -> ImageTensor:
    """Shrink dark ink: maximum filter over a kernel x kernel window."""
    return ImageTensor(np.stack([
        ndimage.maximum_filter(plane, size=kernel, mode="nearest") for plane in img.pixels
    ]))


def downscale(img: ImageTensor, factor: float) -> ImageTensor:
    """Bilinear down to factor x size, then back up to the original size."""
    small = (max(1, int(round(img.height * factor))), max(1, int(round(img.width * factor))))
    return resize(resize(img, small), (img.height, img.width))


def underline(img: ImageTensor, thickness: int = 1, gap: int = 1) -> ImageTensor:
    """Dark line `gap` px below the lowest ink row, spanning the ink columns.

    Blank images get a full-width line at 90% of the height.
    """
    out = img.pixels.copy()
    ink = img.ink_mask()
    if ink.any():
        rows = np.flatnonzero(ink.any(axis=1))
        cols = np.flatnonzero(ink.any(axis=0))
        start = min(int(rows[-1]) + gap, img.height - 1)
        col_lo, col_hi = int(cols[0]), int(cols[-1]) + 1
    else:
        start = min(int(BLANK_UNDERLINE_FRACTION * img.height), img.height - 1)
        col_lo, col_hi = 0, img.width
    out[:, start:min(start + thickness, img.height), col_lo:col_hi] = 0.0
    return ImageTensor(out)


TRANSFORM_FUNCTIONS = {
    "identity": identity,
    "rotate": rotate,
    "blur": gaussian_blur,
    "dilate": dilate,
    "erode": erode,
    "downscale": downscale,
    "underline": underline,
}


@dataclass
class AugmentStats:
    """Transform counts over a run of seeded draws."""
    counts: Dict[str, int] = field(default_factory=lambda: {name: 0 for name in TRANSFORMS})

    def record(self, name: str) -> None:
        self.counts[name] += 1

    def frequencies(self) -> Dict[str, float]:
        total = sum(self.counts.values())
        return {name: (count / total if total else 0.0) for name, count in self.counts.items()}
