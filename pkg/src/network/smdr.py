"""The multi-stage SMDR-IS restoration network.

Stage ``k`` (0-based) restores pyramid level ``k``: ``or`` is the original resolution,
``2D``/``4D``/``8D`` are the 1/2, 1/4 and 1/8 stages. Every stage is an encoder-decoder
of BICA nodes whose depth ends at pyramid level 3, so stage ``k`` has ``4 - k`` nodes
and its features align spatially with the original stage's level-``k`` features.

Low stages run first and hand three things to the original stage at their level:

* ``S_en``    their first encoder feature, gated against the original encoder feature
              one level up, added to the original encoder before its BICA;
* ``S_en2de`` the same encoder feature, gated against the original decoder feature,
              added into the original decoder;
* ``S_de``    their restored image (the FR output path), gated against the original
              decoder feature, added into the original decoder.

A disabled ASISF flag keeps the link but drops the gate (``P_de`` projects the
3-channel image when ``S_de`` is off).
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import torch
import torch.nn.functional as F
from torch import nn

from src.models.config_model import MAX_STAGES, ModelConfig
from src.models.report_model import StructureEntry, StructureReport
from src.network.asisf import ASISF
from src.network.blocks import BICA
from src.utils.errors import DimensionError
from src.utils.pyramid import (
    ImageBatch,
    ScalePyramid,
    build_input_pyramid,
    check_image_batch,
    crop_to_original,
    network_multiple,
    pad_to_multiple,
)
from src.utils.seeding import seeded

logger = logging.getLogger(__name__)

STAGE_LABELS = ("or", "2D", "4D", "8D")
DEPTH = MAX_STAGES


@dataclass(frozen=True)
class RestorationOutput:
    """One restored image per active stage, at scale factors 1, 1/2, 1/4, 1/8."""

    outputs: Tuple[ImageBatch, ...]

    def __len__(self) -> int:
        return len(self.outputs)

    def __getitem__(self, index: int) -> ImageBatch:
        return self.outputs[index]

    @property
    def primary(self) -> ImageBatch:
        return self.outputs[0]


class EncoderNode(nn.Module):
    """Optional stride-2 downsampling followed by BICA."""

    def __init__(self, in_channels: int, out_channels: int, downsample: bool, blocks: nn.Sequential):
        super().__init__()
        self.down: Optional[nn.Conv2d] = (
            nn.Conv2d(in_channels, out_channels, 3, stride=2, padding=1) if downsample else None
        )
        self.blocks = blocks

    def resample(self, x: torch.Tensor) -> torch.Tensor:
        return self.down(x) if self.down is not None else x


class DecoderNode(nn.Module):
    """Optional bilinear upsampling + convolution followed by BICA."""

    def __init__(self, in_channels: int, out_channels: int, upsample: bool, blocks: nn.Sequential):
        super().__init__()
        self.up: Optional[nn.Conv2d] = (
            nn.Conv2d(in_channels, out_channels, 3, padding=1) if upsample else None
        )
        self.blocks = blocks

    def resample(self, x: torch.Tensor, size: Tuple[int, int]) -> torch.Tensor:
        if self.up is None:
            return x
        x = F.interpolate(x, size=size, mode="bilinear", align_corners=False)
        return self.up(x)


class SMDRIS(nn.Module):
    """Synergistic multi-stage restoration network.

    Build it with :func:`build_model` so initialisation follows ``cfg.init_seed``.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.widths = cfg.widths
        self.stages = cfg.stages
        self.fe = nn.ModuleDict()
        self.encoders = nn.ModuleDict()
        self.decoders = nn.ModuleDict()
        self.heads = nn.ModuleDict()
        self.links = nn.ModuleDict()

        for level in range(self.stages):
            self._build_stage(level)
        for level in range(1, self.stages):
            self._build_links(level)

    def _bica_chain(self, channels: int) -> nn.Sequential:
        cfg = self.cfg
        return nn.Sequential(
            *[
                BICA(
                    channels,
                    regia_factor=cfg.regia_factor,
                    regia_upsample=cfg.regia_upsample,
                    reduction=cfg.ca_reduction,
                    enable_ca=cfg.enable_cfa_ca,
                    enable_pa=cfg.enable_cfa_pa,
                    enable_regia=cfg.enable_regia,
                    enable_hcafe=cfg.enable_hcafe,
                )
                for _ in range(cfg.blocks_per_node)
            ]
        )

    def _build_stage(self, level: int) -> None:
        label = STAGE_LABELS[level]
        widths = self.widths
        nodes = DEPTH - level
        self.fe[f"FE_{level + 1}"] = nn.Conv2d(3, widths[level], 3, padding=1)
        for i in range(nodes):
            depth = level + i
            in_ch = widths[depth - 1] if i > 0 else widths[depth]
            self.encoders[f"E_{label}^{i + 1}"] = EncoderNode(
                in_ch, widths[depth], downsample=i > 0, blocks=self._bica_chain(widths[depth])
            )
        for i in range(nodes, 1, -1):
            src_depth, dst_depth = level + i - 1, level + i - 2
            self.decoders[f"D_{label}^{i}"] = DecoderNode(
                widths[src_depth],
                widths[dst_depth],
                upsample=True,
                blocks=self._bica_chain(widths[dst_depth]),
            )
        self.decoders[f"D_{label}^1"] = DecoderNode(
            widths[level], widths[level], upsample=False, blocks=self._bica_chain(widths[level])
        )
        self.heads[f"FR_{label}"] = nn.Conv2d(widths[level], 3, 3, padding=1)

    def _build_links(self, level: int) -> None:
        label = STAGE_LABELS[level]
        width, upper = self.widths[level], self.widths[level - 1]
        if self.cfg.enable_asisf_en:
            self.links[f"S_en_{label}"] = ASISF(width, upper, width)
        if self.cfg.enable_asisf_en_to_de:
            self.links[f"S_en2de_{label}"] = ASISF(width, width, width)
        if self.cfg.enable_asisf_de:
            self.links[f"S_de_{label}"] = ASISF(3, width, width)
        else:
            self.links[f"P_de_{label}"] = nn.Conv2d(3, width, 1)

    @property
    def padding_multiple(self) -> int:
        return network_multiple(self.cfg.regia_factor)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def reset_heads_to_identity(self) -> None:
        """Zero every FR head so each stage returns its input level unchanged."""
        with torch.no_grad():
            for head in self.heads.values():
                head.weight.zero_()
                head.bias.zero_()

    def _check_pyramid(self, pyramid: ScalePyramid) -> None:
        if len(pyramid) < self.stages:
            raise DimensionError(
                f"pyramid has {len(pyramid)} levels but the model runs {self.stages} stages"
            )
        base = pyramid[0]
        check_image_batch(base, "pyramid level 0")
        divisor = 2 ** (DEPTH - 1)
        for axis, size in zip(("height", "width"), base.shape[-2:]):
            if size % divisor:
                raise DimensionError(
                    f"level-0 {axis} {size} is not divisible by {divisor}", axis=axis
                )
        for k in range(1, self.stages):
            expected = (base.shape[-2] // 2**k, base.shape[-1] // 2**k)
            if tuple(pyramid[k].shape[-2:]) != expected:
                raise DimensionError(
                    f"pyramid level {k} is {tuple(pyramid[k].shape[-2:])}, expected {expected}"
                )

    def _run_low_stage(self, level: int, image: ImageBatch) -> Tuple[torch.Tensor, ImageBatch]:
        label = STAGE_LABELS[level]
        nodes = DEPTH - level
        x = self.fe[f"FE_{level + 1}"](image)
        skips: List[torch.Tensor] = []
        for i in range(nodes):
            node = self.encoders[f"E_{label}^{i + 1}"]
            x = node.blocks(node.resample(x))
            skips.append(x)
        y = skips[-1]
        for i in range(nodes, 1, -1):
            node = self.decoders[f"D_{label}^{i}"]
            skip = skips[i - 2]
            y = node.blocks(node.resample(y, skip.shape[-2:]) + skip)
        y = self.decoders[f"D_{label}^1"].blocks(y)
        restored = image + self.heads[f"FR_{label}"](y)
        return skips[0], restored

    def _encoder_transfer(self, level: int, low_feature: torch.Tensor, upper: torch.Tensor):
        gate = self.links[f"S_en_{STAGE_LABELS[level]}"] if self.cfg.enable_asisf_en else None
        return gate(low_feature, upper) if gate is not None else low_feature

    def _decoder_transfer(
        self, level: int, y: torch.Tensor, low: Dict[int, Tuple[torch.Tensor, ImageBatch]]
    ) -> torch.Tensor:
        if level not in low:
            return y
        label = STAGE_LABELS[level]
        low_feature, low_image = low[level]
        if self.cfg.enable_asisf_en_to_de:
            from_encoder = self.links[f"S_en2de_{label}"](low_feature, y)
        else:
            from_encoder = low_feature
        if self.cfg.enable_asisf_de:
            from_output = self.links[f"S_de_{label}"](low_image, y)
        else:
            from_output = self.links[f"P_de_{label}"](low_image)
        return y + from_encoder + from_output

    def forward(self, pyramid: ScalePyramid) -> RestorationOutput:
        """Restore every active stage.

        Outputs are raw in training mode and clamped to [0, 1] in evaluation mode.

        Raises:
            DimensionError: If the pyramid is shallower than the stage count or level 0
                is not divisible by 8.
        """
        self._check_pyramid(pyramid)
        low: Dict[int, Tuple[torch.Tensor, ImageBatch]] = {}
        for level in range(1, self.stages):
            low[level] = self._run_low_stage(level, pyramid[level])

        image = pyramid[0]
        x = self.fe["FE_1"](image)
        skips: List[torch.Tensor] = []
        for i in range(DEPTH):
            node = self.encoders[f"E_or^{i + 1}"]
            x = node.resample(x)
            if i in low:
                x = x + self._encoder_transfer(i, low[i][0], skips[i - 1])
            x = node.blocks(x)
            skips.append(x)

        y = self._decoder_transfer(DEPTH - 1, skips[-1], low)
        for i in range(DEPTH, 1, -1):
            node = self.decoders[f"D_or^{i}"]
            skip = skips[i - 2]
            y = node.resample(y, skip.shape[-2:]) + skip
            y = self._decoder_transfer(i - 2, y, low)
            y = node.blocks(y)
        y = self.decoders["D_or^1"].blocks(y)

        outputs = [image + self.heads["FR_or"](y)]
        outputs.extend(low[level][1] for level in range(1, self.stages))
        if not self.training:
            outputs = [out.clamp(0.0, 1.0) for out in outputs]
        return RestorationOutput(outputs=tuple(outputs))

    def _named_parts(self) -> List[Tuple[str, str, nn.Module, nn.Module]]:
        """(name, kind, module owning the parameters, module whose output shape is reported)."""
        parts: List[Tuple[str, str, nn.Module, nn.Module]] = []
        for level in range(self.stages):
            label = STAGE_LABELS[level]
            fe = self.fe[f"FE_{level + 1}"]
            parts.append((f"FE_{level + 1}", "conv", fe, fe))
            for name, node in self.encoders.items():
                if name.startswith(f"E_{label}^"):
                    kind = "down+bica" if node.down is not None else "bica"
                    parts.append((name, kind, node, node.blocks))
            for name, node in self.decoders.items():
                if name.startswith(f"D_{label}^"):
                    kind = "up+bica" if node.up is not None else "bica"
                    parts.append((name, kind, node, node.blocks))
            head = self.heads[f"FR_{label}"]
            parts.append((f"FR_{label}", "head", head, head))
        for name, module in self.links.items():
            kind = "asisf" if isinstance(module, ASISF) else "projection"
            parts.append((name, kind, module, module))
        return parts


def build_model(cfg: ModelConfig) -> SMDRIS:
    """Construct a network with parameters initialised from ``cfg.init_seed``."""
    with seeded(cfg.init_seed):
        model = SMDRIS(cfg)
    logger.debug("built SMDR-IS with %d parameters", model.parameter_count())
    return model


def infer_full(model: SMDRIS, image: ImageBatch) -> ImageBatch:
    """Restore an image of any size.

    Pads to ``lcm(8, regia_factor)``, runs the network in evaluation mode, keeps the
    original-resolution output, crops the padding away and clamps to [0, 1].
    """
    check_image_batch(image)
    padded, spec = pad_to_multiple(image, model.padding_multiple)
    pyramid = build_input_pyramid(padded)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            restored = model(pyramid).primary
    finally:
        model.train(was_training)
    return crop_to_original(restored, spec).clamp(0.0, 1.0)


def describe(model: SMDRIS, input_size: int = 48) -> StructureReport:
    """List every sub-block with its parameter count and output shape.

    Shapes come from a dry run on a ``1 x 3 x input_size x input_size`` zero image.
    """
    parts = model._named_parts()
    shapes: Dict[str, List[int]] = {}
    handles = []
    for name, _, _, hooked in parts:
        def hook(_module, _inputs, output, name=name):
            shapes[name] = list(output.shape)

        handles.append(hooked.register_forward_hook(hook))
    try:
        dummy = torch.zeros(1, 3, input_size, input_size)
        infer_full(model, dummy)
    finally:
        for handle in handles:
            handle.remove()

    entries = [
        StructureEntry(
            name=name,
            kind=kind,
            parameters=sum(p.numel() for p in owner.parameters()),
            output_shape=shapes.get(name),
        )
        for name, kind, owner, _ in parts
    ]
    return StructureReport(
        entries=entries, total_parameters=model.parameter_count(), input_size=input_size
    )
