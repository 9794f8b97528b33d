"""8-bit raster images and the edge-domain pre-processing pipeline.

The mapping from an RGB frame to its edge representation runs in fixed
integer arithmetic so that results are reproducible bit for bit across
platforms: BT.601 grayscale conversion with round-half-up, 3x3 Sobel
gradients with replicate borders, magnitude in a selectable L1 or L2 norm,
four-direction non-maximum suppression, and double-threshold hysteresis
with 8-connectivity. The composite operation burns a binary edge map into
a color image as white pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError
from scipy import ndimage

from .errors import DimensionError, FormatError

# Tangents of 22.5 and 67.5 degrees, the direction-bin boundaries.
_TAN_LOW = math.tan(math.pi / 8.0)
_TAN_HIGH = math.tan(3.0 * math.pi / 8.0)

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class Image:
    """8-bit raster, grayscale (h, w) or channel-interleaved color (h, w, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {px.dtype}")
        if px.ndim == 3 and px.shape[2] != 3:
            raise DimensionError(f"color images must have 3 channels, got {px.shape[2]}")
        if px.ndim not in (2, 3):
            raise DimensionError(f"pixels must be 2- or 3-dimensional, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise DimensionError(f"image must be at least 1x1, got shape {px.shape}")
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True, eq=False)
class GradientField:
    """Per-pixel Sobel derivatives and their magnitude under a fixed norm."""

    gx: np.ndarray  # int16
    gy: np.ndarray  # int16
    magnitude: np.ndarray  # int32, norm of (gx, gy)
    norm: str = "l2"

    @property
    def height(self) -> int:
        return self.gx.shape[0]

    @property
    def width(self) -> int:
        return self.gx.shape[1]


@dataclass(frozen=True, eq=False)
class EdgeMap:
    """Binary edge mask with the dimensions of its source image."""

    mask: np.ndarray  # bool, (h, w)

    def __post_init__(self):
        mask = np.asarray(self.mask)
        if mask.dtype != np.bool_ or mask.ndim != 2:
            raise ValueError("mask must be a 2-dimensional boolean array")
        mask = np.ascontiguousarray(mask)
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    def count(self) -> int:
        return int(self.mask.sum())

    def to_image(self) -> Image:
        """Render the mask as an 8-bit grayscale image (edges white)."""
        return Image(np.where(self.mask, 255, 0).astype(np.uint8))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EdgeMap):
            return NotImplemented
        return self.mask.shape == other.mask.shape and bool(
            np.array_equal(self.mask, other.mask)
        )


def to_grayscale(img: Image) -> Image:
    """Convert a color image to grayscale with BT.601 weights.

    gray = round(0.299 R + 0.587 G + 0.114 B), round half up, computed in
    exact integer arithmetic. Grayscale input is returned unchanged.
    """
    if img.channels == 1:
        return img
    px = img.pixels.astype(np.uint32)
    gray = (299 * px[:, :, 0] + 587 * px[:, :, 1] + 114 * px[:, :, 2] + 500) // 1000
    return Image(gray.astype(np.uint8))


def gaussian_blur(img: Image, size: int = 5, sigma: float = 1.4) -> Image:
    """Optional pre-smoothing stage; not applied anywhere by default.

    Sampled, normalized Gaussian kernel, replicate borders, result rounded
    half up back to 8 bits. Color images are blurred per channel.
    """
    if size < 3 or size % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 3, got {size}")
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    half = size // 2
    ticks = np.arange(-half, half + 1, dtype=np.float64)
    kernel_1d = np.exp(-(ticks**2) / (2.0 * sigma * sigma))
    kernel = np.outer(kernel_1d, kernel_1d)
    kernel /= kernel.sum()

    def blur_plane(plane: np.ndarray) -> np.ndarray:
        padded = np.pad(plane.astype(np.float64), half, mode="edge")
        out = np.zeros(plane.shape, dtype=np.float64)
        for dy in range(size):
            for dx in range(size):
                out += kernel[dy, dx] * padded[
                    dy : dy + plane.shape[0], dx : dx + plane.shape[1]
                ]
        return np.floor(out + 0.5).clip(0, 255).astype(np.uint8)

    if img.channels == 1:
        return Image(blur_plane(img.pixels))
    planes = [blur_plane(img.pixels[:, :, c]) for c in range(3)]
    return Image(np.stack(planes, axis=2))


def sobel_gradients(img: Image, norm: str = "l2") -> GradientField:
    """3x3 Sobel derivatives of a grayscale image with replicate borders.

    gx responds to left-to-right intensity increase, gy to top-to-bottom.
    The L2 magnitude is round(sqrt(gx^2 + gy^2)) (half up); L1 is
    abs(gx) + abs(gy).
    """
    if img.channels != 1:
        raise ValueError("sobel_gradients expects a grayscale image")
    if img.height < 3 or img.width < 3:
        raise DimensionError(
            f"image must be at least 3x3 for gradients, got {img.height}x{img.width}"
        )
    if norm not in ("l1", "l2"):
        raise ValueError(f"norm must be 'l1' or 'l2', got {norm!r}")
    p = np.pad(img.pixels.astype(np.int32), 1, mode="edge")
    gx = (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:]) - (
        p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2]
    )
    gy = (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:]) - (
        p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:]
    )
    if norm == "l2":
        magnitude = np.floor(np.sqrt(gx * gx + gy * gy) + 0.5).astype(np.int32)
    else:
        magnitude = (np.abs(gx) + np.abs(gy)).astype(np.int32)
    return GradientField(
        gx=gx.astype(np.int16), gy=gy.astype(np.int16), magnitude=magnitude, norm=norm
    )


def _nonmax_suppress(grads: GradientField) -> np.ndarray:
    """Thin gradient ridges to single-pixel width along the gradient direction.

    The gradient angle is quantized to four direction bins via exact tangent
    comparisons on |gx| and |gy|. A pixel survives iff its magnitude is
    strictly greater than the forward neighbor and at least the backward
    neighbor along its bin; the asymmetry keeps exactly one pixel of a
    two-wide plateau. The outermost ring has undefined neighbors and never
    survives.
    """
    m = grads.magnitude
    gx = grads.gx.astype(np.int32)
    gy = grads.gy.astype(np.int32)
    ax = np.abs(gx).astype(np.float64)
    ay = np.abs(gy).astype(np.float64)

    bin_h = ay <= ax * _TAN_LOW  # gradient ~horizontal, neighbors left/right
    bin_v = ~bin_h & (ay >= ax * _TAN_HIGH)  # gradient ~vertical
    diag = ~bin_h & ~bin_v
    bin_d1 = diag & (gx * gy > 0)  # gradient toward (+x, +y) / (-x, -y)
    bin_d2 = diag & (gx * gy < 0)

    c = m[1:-1, 1:-1]
    right, left = m[1:-1, 2:], m[1:-1, :-2]
    down, up = m[2:, 1:-1], m[:-2, 1:-1]
    down_right, up_left = m[2:, 2:], m[:-2, :-2]
    up_right, down_left = m[:-2, 2:], m[2:, :-2]

    sel = [bin_h[1:-1, 1:-1], bin_d1[1:-1, 1:-1], bin_v[1:-1, 1:-1], bin_d2[1:-1, 1:-1]]
    forward = np.select(sel, [right, down_right, down, up_right])
    backward = np.select(sel, [left, up_left, up, down_left])

    kept = np.zeros(m.shape, dtype=bool)
    kept[1:-1, 1:-1] = (c > forward) & (c >= backward)
    return kept


def canny(img: Image, low: float, high: float, norm: str = "l2") -> EdgeMap:
    """Binary edge map via gradients, non-maximum suppression and hysteresis.

    Color input is converted to grayscale first. Thresholds compare against
    the raw integer gradient magnitude; an edge pixel has magnitude
    strictly above ``low`` and is 8-connected, through pixels above ``low``,
    to some pixel strictly above ``high``.
    """
    if low > high:
        raise ValueError(f"low threshold {low} exceeds high threshold {high}")
    if low < 0:
        raise ValueError(f"thresholds must be non-negative, got low={low}")
    gray = to_grayscale(img)
    grads = sobel_gradients(gray, norm=norm)
    kept = _nonmax_suppress(grads)
    candidates = kept & (grads.magnitude > low)
    strong = candidates & (grads.magnitude > high)
    if not strong.any():
        return EdgeMap(np.zeros(candidates.shape, dtype=bool))
    labels, _ = ndimage.label(candidates, structure=_EIGHT_CONNECTED)
    strong_labels = np.unique(labels[strong])
    return EdgeMap(np.isin(labels, strong_labels) & candidates)


def composite_rgb_edges(img: Image, edges: EdgeMap) -> Image:
    """Overlay an edge map on a color image as saturated white pixels."""
    if img.channels != 3:
        raise DimensionError("composite requires a 3-channel image")
    if (img.height, img.width) != (edges.height, edges.width):
        raise DimensionError(
            f"image is {img.height}x{img.width} but edge map is "
            f"{edges.height}x{edges.width}"
        )
    out = img.pixels.copy()
    out[edges.mask] = (255, 255, 255)
    return Image(out)


def load_png(path) -> Image:
    """Read an 8-bit grayscale or RGB PNG."""
    try:
        with PILImage.open(path) as pil:
            pil.load()
            if pil.mode == "L":
                return Image(np.asarray(pil, dtype=np.uint8))
            if pil.mode == "RGB":
                return Image(np.asarray(pil, dtype=np.uint8))
            raise FormatError(
                f"unsupported PNG mode {pil.mode!r}; only 8-bit L and RGB are accepted",
                path=path,
            )
    except UnidentifiedImageError as exc:
        raise FormatError(f"not a decodable image: {exc}", path=path) from exc
    except OSError as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise FormatError(f"malformed PNG stream: {exc}", path=path) from exc


def save_png(img: Image, path) -> None:
    """Write an image as PNG; load_png(save_png(x)) is the identity."""
    mode = "L" if img.channels == 1 else "RGB"
    PILImage.fromarray(img.pixels, mode=mode).save(path, format="PNG")
