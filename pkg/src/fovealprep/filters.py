"""Attention pre-filters: crop, Gaussian background blur, and foveal blending.

All three keep the canvas size and leave the annotated person region
untouched. Crop blacks out the background, GBB swaps it for a blurred copy
with a hard seam, and the foveal filter blends band-pass detail through
per-level elliptical weights so sharpness falls off smoothly with distance
from the box center.

RGB outputs are clipped to [0, 1]; 2-channel flow passes through unclipped
because displacement samples are signed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .imgcore import BoundingBox, FlowStack, Image, clamp_box
from .pyramid import GaussianStack, _blur_samples, stack_sigmas

DEFAULT_FOVEA_SIGMA1 = 1.0
DEFAULT_FOVEA_LEVELS = 5
DEFAULT_GBB_SIGMA = 7.0

FilterMode = Literal["crop", "gbb", "fovea"]


@dataclass(frozen=True)
class FoveaParams:
    """Fovea geometry and blur ladder.

    The fovea is centered on the box center; its base half-extents are half
    the box width/height and double at each coarser level.
    """

    box: BoundingBox
    sigma1: float = DEFAULT_FOVEA_SIGMA1
    levels: int = DEFAULT_FOVEA_LEVELS

    def __post_init__(self) -> None:
        if self.sigma1 <= 0:
            raise ValueError(f"sigma1 must be positive, got {self.sigma1}")
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")

    @property
    def center(self) -> tuple[float, float]:
        return self.box.center

    def extent_at(self, k: int) -> tuple[float, float]:
        """Elliptical half-extents (f_x, f_y) of the level-k weight."""
        scale = 2.0**k
        return (scale * self.box.w / 2.0, scale * self.box.h / 2.0)


def fovea_kernel(width: int, height: int, params: FoveaParams, k: int) -> np.ndarray:
    """Level-k fovea weight map, shape (height, width), values in (0, 1].

    Weight at column u, row v is exp(-((u-u0)^2 / (2 fx^2) + (v-v0)^2 / (2 fy^2)))
    with (u0, v0) the box center and (fx, fy) the level's half-extents.
    Returned in float64: the map is a weight field, not image data.
    """
    if not 0 <= k <= params.levels:
        raise ValueError(f"level {k} outside 0..{params.levels}")
    u0, v0 = params.center
    fx, fy = params.extent_at(k)
    u = np.arange(width, dtype=np.float64)
    v = np.arange(height, dtype=np.float64)
    wu = np.exp(-((u - u0) ** 2) / (2.0 * fx * fx))
    wv = np.exp(-((v - v0) ** 2) / (2.0 * fy * fy))
    return np.outer(wv, wu)


def _clamped_params(params: FoveaParams, image: Image) -> FoveaParams:
    clamped = clamp_box(params.box, image.width, image.height)
    if clamped == params.box:
        return params
    return FoveaParams(box=clamped, sigma1=params.sigma1, levels=params.levels)


def _compose_fovea(
    image: Image, gaussians: list[np.ndarray], params: FoveaParams, clamp: bool | None
) -> Image:
    """base + sum_k weight_k * (g_k - g_(k+1)), with g_0 the original."""
    depth = len(gaussians)
    out = gaussians[-1].copy()
    tmp = np.empty_like(out)
    for k in range(depth):
        weight = fovea_kernel(image.width, image.height, params, k)
        finer = image.data if k == 0 else gaussians[k - 1]
        np.subtract(finer, gaussians[k], out=tmp)
        np.multiply(tmp, weight.astype(np.float32)[:, :, np.newaxis], out=tmp)
        out += tmp
    if clamp is None:
        clamp = not image.is_flow
    if clamp:
        np.clip(out, 0.0, 1.0, out=out)
    return Image(out)


def apply_fovea(image: Image, params: FoveaParams, clamp: bool | None = None) -> Image:
    """Foveate ``image`` around ``params.box``.

    At the box center every level weight is 1 and the telescoping sum
    restores the original pixel; far from the box the weights vanish and
    the output converges to the coarsest blur level. ``clamp`` defaults to
    True for 1/3-channel images and False for flow.
    """
    params = _clamped_params(params, image)
    gaussians = _blur_samples(image.data, stack_sigmas(params.sigma1, params.levels))
    return _compose_fovea(image, gaussians, params, clamp)


def compose_fovea(stack: GaussianStack, box: BoundingBox, clamp: bool | None = None) -> Image:
    """Foveate from a prebuilt Gaussian stack.

    Lets one stack be shared read-only across every annotated box of the
    same frame; blur depth and sigma1 come from the stack.
    """
    original = stack.levels[0]
    params = _clamped_params(
        FoveaParams(box=box, sigma1=stack.sigma1, levels=stack.depth), original
    )
    gaussians = [level.data for level in stack.levels[1:]]
    return _compose_fovea(original, gaussians, params, clamp)


def _int_box(box: BoundingBox) -> tuple[int, int, int, int]:
    # boxes reaching the filters come off the pixel grid (clamp/denormalize)
    x, y = int(math.floor(box.x)), int(math.floor(box.y))
    return x, y, int(round(box.x2)) - x, int(round(box.y2)) - y


def apply_gbb(image: Image, box: BoundingBox, sigma: float = DEFAULT_GBB_SIGMA) -> Image:
    """Keep the box interior sharp, replace everything outside with a blur.

    The seam at the box edge is hard by design; use apply_fovea for a
    smooth transition.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    x, y, w, h = _int_box(clamp_box(box, image.width, image.height))
    out = _blur_samples(image.data, [sigma])[0]
    out[y : y + h, x : x + w] = image.data[y : y + h, x : x + w]
    return Image(out)


def apply_crop(image: Image, box: BoundingBox) -> Image:
    """Zero every sample outside the box, keeping the canvas size."""
    x, y, w, h = _int_box(clamp_box(box, image.width, image.height))
    out = np.zeros_like(image.data)
    out[y : y + h, x : x + w] = image.data[y : y + h, x : x + w]
    return Image(out)


def make_frame_filter(
    mode: FilterMode,
    box: BoundingBox | None = None,
    sigma: float = DEFAULT_GBB_SIGMA,
    fovea: FoveaParams | None = None,
) -> Callable[[Image], Image]:
    """Bind filter parameters into a single-image callable.

    ``fovea`` configures mode "fovea" (its own box applies); "crop" and
    "gbb" take ``box`` and, for gbb, ``sigma``.
    """
    if mode == "fovea":
        if fovea is None:
            if box is None:
                raise ValueError("fovea mode needs FoveaParams or a box")
            fovea = FoveaParams(box=box)
        return lambda img: apply_fovea(img, fovea)
    if box is None:
        raise ValueError(f"{mode} mode needs a box")
    if mode == "gbb":
        return lambda img: apply_gbb(img, box, sigma)
    if mode == "crop":
        return lambda img: apply_crop(img, box)
    raise ValueError(f"unknown filter mode {mode!r}")


def apply_to_stack(
    stack: FlowStack,
    mode: FilterMode,
    box: BoundingBox | None = None,
    sigma: float = DEFAULT_GBB_SIGMA,
    fovea: FoveaParams | None = None,
) -> FlowStack:
    """Apply one attention filter independently to every frame of a stack."""
    frame_filter = make_frame_filter(mode, box=box, sigma=sigma, fovea=fovea)
    return FlowStack(tuple(frame_filter(frame) for frame in stack.frames))
