"""Multi-degradation loss.

Each stage is scored with ``l1_weight * L1 + perceptual_weight * perceptual + mse_weight * MSE``
against the matching level of the target pyramid (defaults 1, 0.2, 1), and the stage
losses are summed. L1 and MSE are mean-reduced; the perceptual term sums, over the tapped
layers, the squared feature distance divided by ``B * H_i * W_i``; the random extractor
divides its taps by ``sqrt(C_i)`` first.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import torch
from torch import nn

from config.settings import get_settings
from src.models.config_model import TrainConfig
from src.models.report_model import LossReport, StageLossReport
from src.utils.errors import DimensionError, ShapeMismatchError
from src.utils.pyramid import ImageBatch, ScalePyramid
from src.utils.seeding import seeded

logger = logging.getLogger(__name__)

# relu1_2, relu2_2, relu3_4 in torchvision's VGG19 ``features``
VGG19_TAPS: Tuple[int, ...] = (3, 8, 17)
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


def _check_pair(pred: ImageBatch, target: ImageBatch) -> None:
    if pred.shape != target.shape:
        raise ShapeMismatchError(
            f"prediction {tuple(pred.shape)} and target {tuple(target.shape)} differ"
        )


def l1_loss(pred: ImageBatch, target: ImageBatch) -> torch.Tensor:
    _check_pair(pred, target)
    return (pred - target).abs().mean()


def mse_loss(pred: ImageBatch, target: ImageBatch) -> torch.Tensor:
    _check_pair(pred, target)
    return (pred - target).pow(2).mean()


class PerceptualExtractor(nn.Module):
    """Frozen feature network with a fixed set of tapped layers.

    Subclasses provide ``features`` (an ``nn.Sequential``) and ``taps`` (indices into it
    whose outputs are returned). Inputs are normalised with ``mean``/``std`` first.
    Parameters never require gradients and the module stays in evaluation mode.
    """

    taps: Tuple[int, ...] = ()
    pools: int = 0
    # taps divided by sqrt(channels)
    channel_normalised: bool = False

    def __init__(
        self,
        features: nn.Sequential,
        taps: Sequence[int],
        mean: Sequence[float] = (0.0, 0.0, 0.0),
        std: Sequence[float] = (1.0, 1.0, 1.0),
    ):
        super().__init__()
        self.features = features[: max(taps) + 1]
        self.taps = tuple(taps)
        self.pools = sum(
            isinstance(layer, nn.MaxPool2d) for layer in list(self.features)[: max(taps)]
        )
        self.register_buffer("mean", torch.tensor(mean).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(std).view(1, 3, 1, 1))
        self.requires_grad_(False)
        super().train(False)

    def train(self, mode: bool = True) -> "PerceptualExtractor":
        return self

    @property
    def min_size(self) -> int:
        return 2**self.pools

    def forward(self, x: ImageBatch) -> List[torch.Tensor]:
        height, width = x.shape[-2:]
        if min(height, width) < self.min_size:
            raise DimensionError(
                f"{type(self).__name__} needs inputs of at least {self.min_size}x{self.min_size}, "
                f"got {height}x{width}"
            )
        x = (x - self.mean) / self.std
        tapped = []
        for index, layer in enumerate(self.features):
            x = layer(x)
            if index in self.taps:
                tapped.append(x / math.sqrt(x.shape[1]) if self.channel_normalised else x)
        return tapped


def _vgg_like_layers(widths: Sequence[int]) -> nn.Sequential:
    """Conv/ReLU stack laid out like VGG19 up to relu3_4 (2 + 2 + 4 convolutions)."""
    layers: List[nn.Module] = []
    in_ch = 3
    for block, (width, convs) in enumerate(zip(widths, (2, 2, 4))):
        if block:
            layers.append(nn.MaxPool2d(2, 2))
        for _ in range(convs):
            layers += [nn.Conv2d(in_ch, width, 3, padding=1), nn.ReLU(inplace=True)]
            in_ch = width
    return nn.Sequential(*layers)


class RandomConvExtractor(PerceptualExtractor):
    """Seeded, randomly initialised extractor with the VGG19 tap structure.

    Needs no downloaded weights, so the training and test paths stay offline.
    Taps are divided by sqrt(channels), so each squared tap distance is a channel mean.
    """

    channel_normalised = True

    def __init__(self, seed: int = 0, widths: Sequence[int] = (16, 32, 64)):
        with seeded(seed):
            layers = _vgg_like_layers(widths)
        super().__init__(layers, VGG19_TAPS)


class VGGExtractor(PerceptualExtractor):
    """ImageNet-pretrained VGG19 taps relu1_2, relu2_2 and relu3_4.

    Weights are downloaded once into ``SMDRIS_CACHE``.
    """

    def __init__(self):
        from torchvision.models import VGG19_Weights, vgg19

        cache_dir = get_settings().cache_dir
        cache_dir.mkdir(parents=True, exist_ok=True)
        torch.hub.set_dir(str(cache_dir))
        logger.info("loading VGG19 weights (cache: %s)", cache_dir)
        vgg = vgg19(weights=VGG19_Weights.IMAGENET1K_V1)
        super().__init__(vgg.features, VGG19_TAPS, IMAGENET_MEAN, IMAGENET_STD)


def build_extractor(kind: str = "random", seed: int = 0) -> PerceptualExtractor:
    if kind == "random":
        return RandomConvExtractor(seed=seed)
    if kind == "vgg":
        return VGGExtractor()
    raise ValueError(f"Unknown perceptual extractor '{kind}', expected 'random' or 'vgg'")


def perceptual_loss(pred: ImageBatch, target: ImageBatch, ext: PerceptualExtractor) -> torch.Tensor:
    """Sum over tapped layers of ``||phi(pred) - phi(target)||^2 / (B * H_i * W_i)``."""
    _check_pair(pred, target)
    batch = pred.shape[0]
    total = pred.new_zeros(())
    for feat_pred, feat_target in zip(ext(pred), ext(target)):
        height, width = feat_pred.shape[-2:]
        total = total + (feat_pred - feat_target).pow(2).sum() / (batch * height * width)
    return total


@dataclass(frozen=True)
class LossWeights:
    """Component switches and weights; a disabled component is exactly zero."""

    l1: float = 1.0
    perceptual: float = 0.2
    mse: float = 1.0
    enable_l1: bool = True
    enable_pre: bool = True
    enable_mse: bool = True

    @classmethod
    def from_train_config(cls, cfg: TrainConfig) -> "LossWeights":
        return cls(
            l1=cfg.l1_weight,
            perceptual=cfg.perceptual_weight,
            mse=cfg.mse_weight,
            enable_l1=cfg.enable_l1,
            enable_pre=cfg.enable_pre,
            enable_mse=cfg.enable_mse,
        )

    def combine(self, l1: float, perceptual: float, mse: float) -> float:
        return self.l1 * l1 + self.perceptual * perceptual + self.mse * mse


@dataclass
class StageLoss:
    """Differentiable components of one stage."""

    l1: torch.Tensor
    perceptual: torch.Tensor
    mse: torch.Tensor
    combined: torch.Tensor

    def as_tuple(self) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        return self.l1, self.perceptual, self.mse, self.combined


@dataclass
class LossBreakdown:
    """Per-stage losses plus the multi-degradation total used for backpropagation."""

    per_stage: List[StageLoss] = field(default_factory=list)
    total: Optional[torch.Tensor] = None
    weights: LossWeights = field(default_factory=LossWeights)

    def report(self) -> LossReport:
        stages = []
        for index, stage in enumerate(self.per_stage, start=1):
            l1, pre, mse = (float(t.detach()) for t in (stage.l1, stage.perceptual, stage.mse))
            stages.append(
                StageLossReport(
                    stage=index,
                    l1=l1,
                    perceptual=pre,
                    mse=mse,
                    combined=self.weights.combine(l1, pre, mse),
                )
            )
        return LossReport(per_stage=stages, total=math.fsum(s.combined for s in stages))


def stage_loss(
    pred: ImageBatch,
    target: ImageBatch,
    ext: Optional[PerceptualExtractor],
    weights: LossWeights = LossWeights(),
) -> StageLoss:
    """Loss of one stage; disabled components are zero tensors and never evaluated."""
    _check_pair(pred, target)
    zero = pred.new_zeros(())
    l1 = l1_loss(pred, target) if weights.enable_l1 else zero
    if weights.enable_pre:
        if ext is None:
            raise ValueError("perceptual term enabled but no extractor given")
        pre = perceptual_loss(pred, target, ext)
    else:
        pre = zero
    mse = mse_loss(pred, target) if weights.enable_mse else zero
    combined = weights.l1 * l1 + weights.perceptual * pre + weights.mse * mse
    return StageLoss(l1=l1, perceptual=pre, mse=mse, combined=combined)


def total_loss(
    outputs: Sequence[ImageBatch],
    targets: ScalePyramid,
    ext: Optional[PerceptualExtractor],
    weights: LossWeights = LossWeights(),
) -> LossBreakdown:
    """Sum of stage losses, stage ``k`` scored against target level ``k``.

    Raises:
        DimensionError: If there are more outputs than target levels.
    """
    if len(outputs) > len(targets):
        raise DimensionError(
            f"{len(outputs)} stage outputs but only {len(targets)} target levels"
        )
    per_stage = [
        stage_loss(pred, targets[k], ext, weights) for k, pred in enumerate(outputs)
    ]
    total = torch.stack([stage.combined for stage in per_stage]).sum()
    return LossBreakdown(per_stage=per_stage, total=total, weights=weights)


class MultiDegradationLoss:
    """Callable bundling an extractor with loss weights for the training loop."""

    def __init__(self, weights: LossWeights, ext: Optional[PerceptualExtractor] = None):
        if weights.enable_pre and ext is None:
            raise ValueError("perceptual term enabled but no extractor given")
        self.weights = weights
        self.ext = ext if weights.enable_pre else None

    @classmethod
    def from_train_config(cls, cfg: TrainConfig) -> "MultiDegradationLoss":
        weights = LossWeights.from_train_config(cfg)
        ext = build_extractor(cfg.perceptual, seed=cfg.seed) if weights.enable_pre else None
        return cls(weights, ext)

    def __call__(self, outputs: Sequence[ImageBatch], targets: ScalePyramid) -> LossBreakdown:
        return total_loss(outputs, targets, self.ext, self.weights)
