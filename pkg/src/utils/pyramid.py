"""Image value types, multi-resolution pyramids and pad/crop geometry.

Images travel as ``torch.Tensor`` batches of shape ``(B, 3, H, W)`` with values in
``[0, 1]``. Pyramids use area averaging so every level keeps the mean intensity of
level 0.
"""

import math
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple

import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.utils.errors import DimensionError, ShapeMismatchError

ImageBatch = torch.Tensor
FeatureMap = torch.Tensor

MAX_LEVELS = 4
SCALE_FACTORS: Tuple[float, ...] = (1.0, 0.5, 0.25, 0.125)


def check_image_batch(image: ImageBatch, name: str = "image") -> None:
    """Validate the rank-4, 3-channel layout of an image batch."""
    if image.dim() != 4:
        raise ShapeMismatchError(f"{name} must be rank-4 (B, 3, H, W), got shape {tuple(image.shape)}")
    if image.shape[1] != 3:
        raise ShapeMismatchError(f"{name} must have exactly 3 channels, got {image.shape[1]}")


@dataclass(frozen=True)
class ScalePyramid:
    """Ordered image levels at scale factors 1, 1/2, 1/4, 1/8.

    Attributes:
        levels: Level ``k`` has spatial dims ``(H / 2**k, W / 2**k)``.
    """

    levels: Tuple[ImageBatch, ...]

    @property
    def scale_factors(self) -> Tuple[float, ...]:
        return SCALE_FACTORS[: len(self.levels)]

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, index: int) -> ImageBatch:
        return self.levels[index]

    def sizes(self) -> List[Tuple[int, int]]:
        return [(int(level.shape[-2]), int(level.shape[-1])) for level in self.levels]


class PadSpec(BaseModel):
    """Padding geometry recorded by :func:`pad_to_multiple`.

    Attributes:
        top, bottom, left, right: Pixel counts added on each border.
        original_h, original_w: Dims before padding.
        mode: ``reflect`` normally; ``replicate`` when an axis is too small to reflect.
    """

    model_config = ConfigDict(frozen=True)

    top: int = Field(0, ge=0, description="Rows added above")
    bottom: int = Field(0, ge=0, description="Rows added below")
    left: int = Field(0, ge=0, description="Columns added on the left")
    right: int = Field(0, ge=0, description="Columns added on the right")
    original_h: int = Field(..., ge=1, description="Height before padding")
    original_w: int = Field(..., ge=1, description="Width before padding")
    mode: Literal["reflect", "replicate"] = Field("reflect", description="Padding mode used")

    @property
    def padded_h(self) -> int:
        return self.original_h + self.top + self.bottom

    @property
    def padded_w(self) -> int:
        return self.original_w + self.left + self.right

    @property
    def is_identity(self) -> bool:
        return self.top == self.bottom == self.left == self.right == 0


def _check_levels(levels: int) -> None:
    if not 1 <= levels <= MAX_LEVELS:
        raise ValueError(f"levels must be in [1, {MAX_LEVELS}], got {levels}")


def _build_pyramid(image: ImageBatch, levels: int) -> ScalePyramid:
    _check_levels(levels)
    check_image_batch(image)
    divisor = 2 ** (levels - 1)
    height, width = image.shape[-2:]
    for axis, size in (("height", height), ("width", width)):
        if size % divisor != 0:
            raise DimensionError(
                f"image {axis} {size} is not divisible by {divisor} "
                f"(required for a {levels}-level pyramid)",
                axis=axis,
            )
    out = [image]
    for k in range(1, levels):
        out.append(F.avg_pool2d(image, kernel_size=2**k, stride=2**k))
    return ScalePyramid(levels=tuple(out))


def build_input_pyramid(image: ImageBatch, levels: int = MAX_LEVELS) -> ScalePyramid:
    """Downsample the degraded input into the multi-degradation pyramid.

    Level 0 is the input itself; level ``k`` is a ``2**k`` area average.

    Raises:
        DimensionError: If H or W is not divisible by ``2**(levels - 1)``; the message
            names the axis.
    """
    return _build_pyramid(image, levels)


def build_target_pyramid(reference: ImageBatch, levels: int = MAX_LEVELS) -> ScalePyramid:
    """Build the multi-degradation ground truth with the same rule as the inputs."""
    return _build_pyramid(reference, levels)


def network_multiple(regia_factor: int, levels: int = MAX_LEVELS) -> int:
    """Padding multiple that keeps pyramid and ReGIA resampling exact: lcm(2**(levels-1), factor)."""
    return math.lcm(2 ** (levels - 1), regia_factor)


def pad_to_multiple(image: ImageBatch, multiple: int) -> Tuple[ImageBatch, PadSpec]:
    """Pad H and W up to the next multiple, reflecting the border.

    The padding is split evenly with the extra pixel on the bottom/right. An axis whose
    pad would reach the image size cannot be reflected; the whole image is then
    replicate-padded and the fallback is recorded in the returned :class:`PadSpec`.
    """
    if multiple < 1:
        raise ValueError(f"multiple must be >= 1, got {multiple}")
    if image.dim() != 4:
        raise ShapeMismatchError(f"expected a rank-4 batch, got shape {tuple(image.shape)}")
    height, width = int(image.shape[-2]), int(image.shape[-1])
    pad_h = -height % multiple
    pad_w = -width % multiple
    top, left = pad_h // 2, pad_w // 2
    bottom, right = pad_h - top, pad_w - left

    mode = "reflect"
    if max(top, bottom) >= height or max(left, right) >= width:
        mode = "replicate"
    spec = PadSpec(
        top=top,
        bottom=bottom,
        left=left,
        right=right,
        original_h=height,
        original_w=width,
        mode=mode,
    )
    if spec.is_identity:
        return image, spec
    return F.pad(image, (left, right, top, bottom), mode=mode), spec


def crop_to_original(image: ImageBatch, spec: PadSpec) -> ImageBatch:
    """Undo :func:`pad_to_multiple`.

    Raises:
        DimensionError: If the image dims do not equal the padded dims recorded in ``spec``.
    """
    height, width = int(image.shape[-2]), int(image.shape[-1])
    if (height, width) != (spec.padded_h, spec.padded_w):
        raise DimensionError(
            f"image is {height}x{width} but pad spec expects {spec.padded_h}x{spec.padded_w}"
        )
    return image[..., spec.top : spec.top + spec.original_h, spec.left : spec.left + spec.original_w]


def _pad_up_to(image: ImageBatch, size: int) -> ImageBatch:
    height, width = int(image.shape[-2]), int(image.shape[-1])
    pad_h, pad_w = max(size - height, 0), max(size - width, 0)
    if pad_h == 0 and pad_w == 0:
        return image
    mode = "reflect" if pad_h < height and pad_w < width else "replicate"
    return F.pad(image, (0, pad_w, 0, pad_h), mode=mode)


def random_paired_crop(
    raw: ImageBatch,
    ref: ImageBatch,
    size: int,
    generator: Optional[torch.Generator] = None,
) -> Tuple[ImageBatch, ImageBatch]:
    """Crop raw and reference at the same uniformly drawn offsets.

    Images smaller than ``size`` are reflect-padded (bottom/right) to ``size`` first.

    Args:
        raw: Degraded batch.
        ref: Reference batch with the same dims as ``raw``.
        size: Square crop side.
        generator: Source of the offsets; the same generator state yields the same crop.
    """
    if size <= 0:
        raise ValueError(f"crop size must be positive, got {size}")
    if raw.shape[-2:] != ref.shape[-2:]:
        raise ShapeMismatchError(
            f"raw {tuple(raw.shape[-2:])} and reference {tuple(ref.shape[-2:])} dims differ"
        )
    raw, ref = _pad_up_to(raw, size), _pad_up_to(ref, size)
    height, width = int(raw.shape[-2]), int(raw.shape[-1])
    top = int(torch.randint(0, height - size + 1, (1,), generator=generator).item())
    left = int(torch.randint(0, width - size + 1, (1,), generator=generator).item())
    window = (slice(None), slice(None), slice(top, top + size), slice(left, left + size))
    return raw[window], ref[window]
