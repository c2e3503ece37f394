"""Image container plus the resampling and quantization primitives.

Images are small (tens of pixels per side) grey or binary rasters stored as
2-D uint8 arrays with an explicit bit depth. Grey images are resampled
bilinearly, binary images with nearest-neighbor so they stay binary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LengthMismatch


@dataclass(frozen=True)
class Image:
    """A single raster with an explicit intensity bit depth.

    pixels is row-major, shape (height, width), values in [0, 2**bits - 1].
    """

    pixels: np.ndarray
    bits: int = 8

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"pixels must be 2-D, got shape {px.shape}")
        if px.size and int(px.max()) > self.max_value:
            raise ValueError(
                f"pixel value {int(px.max())} exceeds {self.bits}-bit range"
            )
        if px.size and int(px.min()) < 0:
            raise ValueError("pixel values must be nonnegative")
        object.__setattr__(self, "pixels", px.astype(np.uint8, copy=False))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def max_value(self) -> int:
        return (1 << self.bits) - 1

    def flat(self) -> np.ndarray:
        """Row-major pixel vector as float64 (the node input encoding)."""
        return self.pixels.reshape(-1).astype(np.float64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return self.bits == other.bits and np.array_equal(self.pixels, other.pixels)


def _bilinear_resize(px: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Pixel-center-aligned bilinear resampling, float output."""
    src = px.astype(np.float64)
    h, w = src.shape
    ys = (np.arange(target_h) + 0.5) * h / target_h - 0.5
    xs = (np.arange(target_w) + 0.5) * w / target_w - 0.5
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def _nearest_resize(px: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    h, w = px.shape
    ys = np.clip(((np.arange(target_h) + 0.5) * h / target_h).astype(int), 0, h - 1)
    xs = np.clip(((np.arange(target_w) + 0.5) * w / target_w).astype(int), 0, w - 1)
    return px[np.ix_(ys, xs)]


def scale_image(img: Image, target_w: int, target_h: int) -> Image:
    """Resample to target dimensions, preserving the intensity range.

    Binary images use nearest-neighbor (stays binary), grey images bilinear.
    """
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be >= 1")
    if (target_h, target_w) == img.pixels.shape:
        return Image(img.pixels.copy(), img.bits)
    if img.bits == 1:
        out = _nearest_resize(img.pixels, target_h, target_w)
    else:
        out = np.floor(_bilinear_resize(img.pixels, target_h, target_w) + 0.5)
        out = np.clip(out, 0, img.max_value)
    return Image(out.astype(np.uint8), img.bits)


def quantize_image(img: Image, bits: int) -> Image:
    """Requantize to a smaller bit depth with round-half-up scaling.

    Monotone by construction; full scale maps to full scale, and for bits=1
    the implied threshold sits at the midpoint of the source range.
    """
    if not 1 <= bits <= img.bits:
        raise ValueError(f"bits must be in [1, {img.bits}], got {bits}")
    if bits == img.bits:
        return Image(img.pixels.copy(), bits)
    src_max = img.max_value
    out_max = (1 << bits) - 1
    q = np.floor(img.pixels.astype(np.float64) * out_max / src_max + 0.5)
    return Image(q.astype(np.uint8), bits)


def transform_image(img: Image, dx: float, dy: float, angle_deg: float,
                    scale: float) -> Image:
    """Scale about the center, rotate, then shift; out-of-field pixels are 0.

    Implemented as a single inverse-mapped affine resample so a pure integer
    shift at angle 0 / scale 1 reproduces pixels exactly.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    h, w = img.pixels.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = np.deg2rad(angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    # invert: shift, then rotation, then scaling
    ry = yy - dy - cy
    rx = xx - dx - cx
    sy = (cos_t * ry + sin_t * rx) / scale + cy
    sx = (-sin_t * ry + cos_t * rx) / scale + cx

    if img.bits == 1:
        iy = np.floor(sy + 0.5).astype(int)
        ix = np.floor(sx + 0.5).astype(int)
        inside = (iy >= 0) & (iy < h) & (ix >= 0) & (ix < w)
        out = np.zeros((h, w), dtype=np.uint8)
        out[inside] = img.pixels[iy[inside], ix[inside]]
        return Image(out, img.bits)

    src = img.pixels.astype(np.float64)
    y0 = np.floor(sy).astype(int)
    x0 = np.floor(sx).astype(int)
    fy = sy - y0
    fx = sx - x0
    acc = np.zeros((h, w), dtype=np.float64)
    for oy, ox, wgt in ((0, 0, (1 - fy) * (1 - fx)), (0, 1, (1 - fy) * fx),
                        (1, 0, fy * (1 - fx)), (1, 1, fy * fx)):
        py = y0 + oy
        px = x0 + ox
        inside = (py >= 0) & (py < h) & (px >= 0) & (px < w)
        vals = np.zeros((h, w), dtype=np.float64)
        vals[inside] = src[py[inside], px[inside]]
        acc += wgt * vals
    out = np.clip(np.floor(acc + 0.5), 0, img.max_value)
    return Image(out.astype(np.uint8), img.bits)


def require_same_shape(a: Image, b: Image):
    if a.pixels.shape != b.pixels.shape:
        raise LengthMismatch(
            f"image shapes differ: {a.pixels.shape} vs {b.pixels.shape}"
        )
