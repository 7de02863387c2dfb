"""Core raster types and I/O: float images, pixel boxes, optical-flow stacks.

Images are dense (height, width, channels) float32 buffers, row-major and
channel-interleaved. RGB/grayscale data is kept in [0, 1]; 2-channel flow
fields hold raw signed displacements. Instances are frozen after
construction so they can be shared freely across workers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import PIL.Image as pil_image

FLO_MAGIC = b"PIEH"


class BoxOutsideImage(ValueError):
    """The bounding box does not intersect the image at all."""


class InvalidNormalizedBox(ValueError):
    """Normalized corners violate 0 <= c1 < c2 <= 1."""


class UnsupportedFormat(ValueError):
    """The file is not one of the raster formats this package handles."""


@dataclass(frozen=True)
class Image:
    """Immutable raster. ``data`` has shape (height, width, channels).

    Accepts 2-D arrays as a convenience (treated as single-channel). The
    backing buffer is cast to float32, made C-contiguous, and frozen; pass
    a fresh array if you do not want your own buffer locked.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise ValueError(f"image data must be 2-D or 3-D, got ndim={arr.ndim}")
        if arr.dtype != np.float32 or not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr, dtype=np.float32)
        h, w, c = arr.shape
        if h < 1 or w < 1:
            raise ValueError(f"image must be at least 1x1, got {w}x{h}")
        if c not in (1, 2, 3):
            raise ValueError(f"channel count must be 1, 2, or 3, got {c}")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def is_flow(self) -> bool:
        return self.channels == 2


@dataclass(frozen=True)
class BoundingBox:
    """Pixel-space rectangle: (x, y) is the top-left corner, w/h its extent."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box must have positive extent, got w={self.w} h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


@dataclass(frozen=True)
class FlowStack:
    """Ordered run of 2-channel flow frames sharing one resolution."""

    frames: tuple[Image, ...]

    def __post_init__(self) -> None:
        frames = tuple(self.frames)
        if not frames:
            raise ValueError("flow stack needs at least one frame")
        first = frames[0]
        for i, frame in enumerate(frames):
            if frame.channels != 2:
                raise ValueError(f"flow frame {i} has {frame.channels} channels, expected 2")
            if (frame.width, frame.height) != (first.width, first.height):
                raise ValueError(
                    f"flow frame {i} is {frame.width}x{frame.height}, "
                    f"expected {first.width}x{first.height}"
                )
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height


def clamp_box(box: BoundingBox, width: int, height: int) -> BoundingBox:
    """Clip ``box`` to the image rectangle, keeping the overlapping part.

    Raises BoxOutsideImage when the intersection is empty.
    """
    if width < 1 or height < 1:
        raise ValueError(f"invalid image extent {width}x{height}")
    x0 = max(box.x, 0)
    y0 = max(box.y, 0)
    x1 = min(box.x2, width)
    y1 = min(box.y2, height)
    if x1 <= x0 or y1 <= y0:
        raise BoxOutsideImage(
            f"box ({box.x},{box.y},{box.w},{box.h}) lies outside a {width}x{height} image"
        )
    return BoundingBox(x0, y0, x1 - x0, y1 - y0)


def _round_half_up(v: float) -> int:
    return int(np.floor(v + 0.5))


def denormalize_box(
    nx1: float, ny1: float, nx2: float, ny2: float, width: int, height: int
) -> BoundingBox:
    """Convert corner fractions to a pixel box, enforcing a 1px minimum extent."""
    if not (0.0 <= nx1 < nx2 <= 1.0 and 0.0 <= ny1 < ny2 <= 1.0):
        raise InvalidNormalizedBox(
            f"normalized corners ({nx1},{ny1},{nx2},{ny2}) must satisfy 0 <= c1 < c2 <= 1"
        )
    x = _round_half_up(nx1 * width)
    y = _round_half_up(ny1 * height)
    w = max(1, _round_half_up((nx2 - nx1) * width))
    h = max(1, _round_half_up((ny2 - ny1) * height))
    return BoundingBox(x, y, w, h)


def read_image(path) -> Image:
    """Load a PNG (8-bit, 1 or 3 channels) as a unit-range float image."""
    with pil_image.open(path) as im:
        if im.mode in ("L", "RGB"):
            converted = im.copy()
        elif im.mode in ("P", "RGBA"):
            converted = im.convert("RGB")
        elif im.mode == "LA":
            converted = im.convert("L")
        else:
            raise UnsupportedFormat(f"unsupported image mode {im.mode!r} in {path}")
    arr = np.asarray(converted, dtype=np.float32) / 255.0
    return Image(arr)


def write_image(image: Image, path) -> None:
    """Write a 1- or 3-channel image as 8-bit PNG, clipping samples to [0, 1]."""
    path = Path(path)
    if path.suffix.lower() != ".png":
        raise UnsupportedFormat(f"still images are written as .png, got {path.name!r}")
    if image.channels == 2:
        raise UnsupportedFormat("2-channel flow fields are written with write_flow()")
    quant = np.rint(np.clip(image.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    if image.channels == 1:
        pil = pil_image.fromarray(quant[:, :, 0], mode="L")
    else:
        pil = pil_image.fromarray(quant, mode="RGB")
    pil.save(path, format="PNG")


def read_flow(path) -> Image:
    """Read one Middlebury .flo frame as a 2-channel image."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != FLO_MAGIC:
            raise UnsupportedFormat(f"{path} is not a .flo file (magic {magic!r})")
        header = f.read(8)
        if len(header) != 8:
            raise UnsupportedFormat(f"{path} has a truncated .flo header")
        w, h = struct.unpack("<ii", header)
        if w < 1 or h < 1:
            raise UnsupportedFormat(f"{path} declares invalid extent {w}x{h}")
        payload = np.fromfile(f, dtype="<f4", count=2 * w * h)
    if payload.size != 2 * w * h:
        raise UnsupportedFormat(f"{path} is truncated: expected {2 * w * h} samples")
    return Image(payload.reshape(h, w, 2))


def write_flow(image: Image, path) -> None:
    """Write a 2-channel flow image as Middlebury .flo (little-endian)."""
    if image.channels != 2:
        raise UnsupportedFormat(f"flow files need 2 channels, got {image.channels}")
    with open(path, "wb") as f:
        f.write(FLO_MAGIC)
        f.write(struct.pack("<ii", image.width, image.height))
        f.write(np.ascontiguousarray(image.data, dtype="<f4").tobytes())


def read_flow_stack(paths: Sequence) -> FlowStack:
    """Read an ordered list of .flo files into one stack."""
    return FlowStack(tuple(read_flow(p) for p in paths))
