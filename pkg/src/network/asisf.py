"""Adaptive selective intrinsic supervised feature module (ASISF)."""

import torch
import torch.nn.functional as F
from torch import nn

from src.network.blocks import check_channels


class ASISF(nn.Module):
    """Gate an input feature stream with a reference stream.

    The reference is resized (bilinear) to the input's spatial dims, both streams are
    projected by 1x1 convolutions to ``output_channels``, and a per-channel-per-position
    gate is computed from their concatenation. The output is ``proj_in(input) * gate``,
    so it always has the input's spatial dims and ``output_channels`` channels.

    Args:
        input_channels: Channels of the gated stream.
        reference_channels: Channels of the reference stream.
        output_channels: Width of the projections and the output.
    """

    def __init__(self, input_channels: int, reference_channels: int, output_channels: int):
        super().__init__()
        for name, value in (
            ("input_channels", input_channels),
            ("reference_channels", reference_channels),
            ("output_channels", output_channels),
        ):
            if value < 1:
                raise ValueError(f"ASISF {name} must be positive, got {value}")
        self.input_channels = input_channels
        self.reference_channels = reference_channels
        self.output_channels = output_channels
        self.proj_in = nn.Conv2d(input_channels, output_channels, 1)
        self.proj_ref = nn.Conv2d(reference_channels, output_channels, 1)
        self.gate_conv = nn.Conv2d(2 * output_channels, output_channels, 3, padding=1)

    def _project(self, input_f: torch.Tensor, reference_f: torch.Tensor):
        check_channels(input_f, self.input_channels, "ASISF input")
        check_channels(reference_f, self.reference_channels, "ASISF reference")
        if reference_f.shape[-2:] != input_f.shape[-2:]:
            reference_f = F.interpolate(
                reference_f, size=input_f.shape[-2:], mode="bilinear", align_corners=False
            )
        return self.proj_in(input_f), self.proj_ref(reference_f)

    def gate_logits(self, input_f: torch.Tensor, reference_f: torch.Tensor) -> torch.Tensor:
        projected, reference = self._project(input_f, reference_f)
        return self.gate_conv(torch.cat([projected, reference], dim=1))

    def forward(self, input_f: torch.Tensor, reference_f: torch.Tensor) -> torch.Tensor:
        projected, reference = self._project(input_f, reference_f)
        gate = torch.sigmoid(self.gate_conv(torch.cat([projected, reference], dim=1)))
        return projected * gate
