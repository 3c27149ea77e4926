"""BICA and its sub-blocks.

Every block maps a ``(B, C, H, W)`` feature map to the same shape. Normalisation uses
per-sample statistics only, so the composition of a batch never changes the output
of an individual image.

Branch 1 of BICA is CFA (conv, channel attention, pixel attention, conv) followed by
ReGIA, which computes attention weights on a pooled low-resolution grid. Branch 2 is
HCAFE, three dilated convolutions with receptive fields 3, 5 and 7.
"""

from typing import List, Literal, Optional

import torch
import torch.nn.functional as F
from torch import nn

from src.utils.errors import ChannelMismatchError


def check_channels(x: torch.Tensor, expected: int, block: str) -> None:
    if x.dim() != 4:
        raise ChannelMismatchError(f"{block} expects a (B, C, H, W) map, got shape {tuple(x.shape)}")
    if x.shape[1] != expected:
        raise ChannelMismatchError(f"{block} built for {expected} channels, got {x.shape[1]}")


def _bottleneck(channels: int, reduction: int) -> int:
    return max(channels // reduction, 1)


class LayerNorm2d(nn.Module):
    """Layer normalization over channels at every pixel, with a learnable affine."""

    def __init__(self, channels: int, eps: float = 1e-6):
        super().__init__()
        self.channels = channels
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        mean = x.mean(dim=1, keepdim=True)
        var = (x - mean).pow(2).mean(dim=1, keepdim=True)
        x = (x - mean) / torch.sqrt(var + self.eps)
        return x * self.weight[None, :, None, None] + self.bias[None, :, None, None]


class ChannelAttention(nn.Module):
    """Per-channel gate from globally pooled statistics through a two-layer bottleneck."""

    def __init__(self, channels: int, reduction: int = 4):
        super().__init__()
        self.channels = channels
        hidden = _bottleneck(channels, reduction)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.conv_du = nn.Sequential(
            nn.Conv2d(channels, hidden, 1, padding=0, bias=True),
            nn.GELU(),
            nn.Conv2d(hidden, channels, 1, padding=0, bias=True),
        )

    def gate(self, x: torch.Tensor) -> torch.Tensor:
        """Gate of shape ``(B, C, 1, 1)`` in (0, 1)."""
        check_channels(x, self.channels, "channel attention")
        return torch.sigmoid(self.conv_du(self.pool(x)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * self.gate(x)


class PixelAttention(nn.Module):
    """Single-channel spatial gate broadcast over channels."""

    def __init__(self, channels: int, reduction: int = 4):
        super().__init__()
        self.channels = channels
        hidden = _bottleneck(channels, reduction)
        self.pa = nn.Sequential(
            nn.Conv2d(channels, hidden, 3, padding=1, bias=True),
            nn.GELU(),
            nn.Conv2d(hidden, 1, 3, padding=1, bias=True),
        )

    def gate(self, x: torch.Tensor) -> torch.Tensor:
        """Gate of shape ``(B, 1, H, W)`` in (0, 1)."""
        check_channels(x, self.channels, "pixel attention")
        return torch.sigmoid(self.pa(x))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * self.gate(x)


class CFA(nn.Module):
    """Comprehensive feature attention: conv, CA, PA, conv, plus the input residual.

    Zeroing ``conv_out`` makes the block an exact identity.
    """

    def __init__(
        self,
        channels: int,
        reduction: int = 4,
        enable_ca: bool = True,
        enable_pa: bool = True,
    ):
        super().__init__()
        self.channels = channels
        self.conv_in = nn.Conv2d(channels, channels, 3, padding=1)
        self.act = nn.GELU()
        self.ca: nn.Module = ChannelAttention(channels, reduction) if enable_ca else nn.Identity()
        self.pa: nn.Module = PixelAttention(channels, reduction) if enable_pa else nn.Identity()
        self.conv_out = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_channels(x, self.channels, "CFA")
        y = self.act(self.conv_in(x))
        y = self.pa(self.ca(y))
        return x + self.conv_out(y)


class ReGIA(nn.Module):
    """Resolution-guided intrinsic attention.

    The map is average-pooled by ``factor`` (replicate-padded bottom/right when the dims
    are not multiples), a small convolution stack turns the latent grid into sigmoid
    weights, and the weights are upsampled back and multiplied into the input. One
    latent cell summarises a ``factor x factor`` patch, so a 3x3 convolution there sees
    a ``3 * factor`` window of the original map.
    """

    def __init__(
        self,
        channels: int,
        factor: int = 6,
        upsample: Literal["bilinear", "nearest"] = "bilinear",
    ):
        super().__init__()
        if factor < 1:
            raise ValueError(f"ReGIA factor must be >= 1, got {factor}")
        self.channels = channels
        self.factor = factor
        self.upsample = upsample
        self.weight_net = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.GELU(),
            nn.Conv2d(channels, channels, 3, padding=1),
        )

    def _pad(self, x: torch.Tensor) -> torch.Tensor:
        pad_h = -x.shape[-2] % self.factor
        pad_w = -x.shape[-1] % self.factor
        if pad_h or pad_w:
            x = F.pad(x, (0, pad_w, 0, pad_h), mode="replicate")
        return x

    def latent(self, x: torch.Tensor) -> torch.Tensor:
        """Pooled low-resolution grid, ``ceil(H / factor) x ceil(W / factor)``."""
        check_channels(x, self.channels, "ReGIA")
        padded = self._pad(x)
        if self.factor == 1:
            return padded
        return F.avg_pool2d(padded, kernel_size=self.factor, stride=self.factor)

    def weights(self, x: torch.Tensor) -> torch.Tensor:
        """Attention weights at full resolution, in (0, 1)."""
        height, width = x.shape[-2:]
        grid = torch.sigmoid(self.weight_net(self.latent(x)))
        size = (grid.shape[-2] * self.factor, grid.shape[-1] * self.factor)
        if self.factor > 1:
            if self.upsample == "bilinear":
                grid = F.interpolate(grid, size=size, mode="bilinear", align_corners=False)
            else:
                grid = F.interpolate(grid, size=size, mode="nearest")
        return grid[..., :height, :width]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * self.weights(x)


class HCAFE(nn.Module):
    """Hierarchical context-aware feature extraction.

    Three parallel 3x3 branches with dilation 1, 2 and 3 (receptive fields 3, 5, 7),
    each producing C/2 channels, fused by a 1x1 convolution, plus the input residual.
    """

    dilations = (1, 2, 3)

    def __init__(self, channels: int):
        super().__init__()
        if channels % 2:
            raise ChannelMismatchError(f"HCAFE needs an even channel count, got {channels}")
        self.channels = channels
        half = channels // 2
        self.branches = nn.ModuleList(
            nn.Sequential(nn.Conv2d(channels, half, 3, padding=d, dilation=d), nn.GELU())
            for d in self.dilations
        )
        self.fuse = nn.Conv2d(half * len(self.dilations), channels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_channels(x, self.channels, "HCAFE")
        features = torch.cat([branch(x) for branch in self.branches], dim=1)
        return x + self.fuse(features)


class BICA(nn.Module):
    """Bifocal intrinsic-context attention.

    ``x + fuse(concat(ReGIA(CFA(LN(x))), HCAFE(LN(x))))``. Disabled components drop out
    of the graph: no CA/PA inside CFA, no ReGIA after CFA, or no branch 2 at all (the
    fuse convolution then takes only branch 1).
    """

    def __init__(
        self,
        channels: int,
        regia_factor: int = 6,
        regia_upsample: Literal["bilinear", "nearest"] = "bilinear",
        reduction: int = 4,
        enable_ca: bool = True,
        enable_pa: bool = True,
        enable_regia: bool = True,
        enable_hcafe: bool = True,
    ):
        super().__init__()
        self.channels = channels
        self.norm = LayerNorm2d(channels)
        self.cfa = CFA(channels, reduction, enable_ca=enable_ca, enable_pa=enable_pa)
        self.regia: Optional[ReGIA] = (
            ReGIA(channels, regia_factor, regia_upsample) if enable_regia else None
        )
        self.hcafe: Optional[HCAFE] = HCAFE(channels) if enable_hcafe else None
        n_branches = 2 if enable_hcafe else 1
        self.fuse = nn.Conv2d(channels * n_branches, channels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_channels(x, self.channels, "BICA")
        y = self.norm(x)
        branch1 = self.cfa(y)
        if self.regia is not None:
            branch1 = self.regia(branch1)
        parts: List[torch.Tensor] = [branch1]
        if self.hcafe is not None:
            parts.append(self.hcafe(y))
        return x + self.fuse(torch.cat(parts, dim=1))
