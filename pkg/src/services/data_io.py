"""Dataset scanning, 8-bit image codecs and the synthetic underwater degradation generator.

Paired layout: ``<root>/raw/*.png`` and ``<root>/reference/*.png`` matched by stem.
Unpaired layout: images directly under ``<root>`` or under ``<root>/raw``.
Synthetic datasets add ``<root>/manifest.json`` with each sample's degradation parameters.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image, UnidentifiedImageError

from src.models.dataset_model import (
    MANIFEST_SCHEMA_VERSION,
    ManifestEntry,
    PairedSample,
    SyntheticManifest,
    TransmissionStyle,
)
from src.utils.errors import DatasetError, DimensionError, ImageReadError, ShapeMismatchError
from src.utils.pyramid import ImageBatch, check_image_batch
from src.utils.seeding import make_generator

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}
TRANSMISSION_STYLES: Tuple[str, ...] = ("uniform", "linear-gradient", "radial", "perlin-like")
# Per-channel attenuation exponents (R, G, B): red is absorbed fastest under water.
CHANNEL_EXPONENTS = (1.5, 1.0, 0.8)
T_FLOOR = 0.05
SYNTH_SIZE_MULTIPLE = 24

Seed = Union[int, torch.Generator]


# ---------------------------------------------------------------------------
# Scanning
# ---------------------------------------------------------------------------


def _image_files(directory: Path) -> Dict[str, Path]:
    files: Dict[str, Path] = {}
    for path in sorted(directory.iterdir()):
        if path.is_file() and path.suffix.lower() in IMAGE_EXTENSIONS:
            if path.stem in files:
                logger.warning(
                    "duplicate stem '%s' in %s, keeping %s",
                    path.stem,
                    directory,
                    files[path.stem].name,
                )
                continue
            files[path.stem] = path
    return files


def scan_paired(root: Path) -> List[PairedSample]:
    """Match ``raw/`` and ``reference/`` images by filename stem, sorted by stem.

    Unmatched files are logged and excluded.

    Raises:
        DatasetError: If a subdirectory is missing or no pair matches.
    """
    root = Path(root)
    raw_dir, ref_dir = root / "raw", root / "reference"
    for directory in (raw_dir, ref_dir):
        if not directory.is_dir():
            raise DatasetError(f"paired dataset needs directory {directory}")
    raw, ref = _image_files(raw_dir), _image_files(ref_dir)
    for stem in sorted(set(raw) ^ set(ref)):
        side = "reference" if stem in raw else "raw"
        logger.warning("'%s' has no %s counterpart, skipped", stem, side)
    samples = [
        PairedSample(id=stem, raw_path=raw[stem], reference_path=ref[stem])
        for stem in sorted(set(raw) & set(ref))
    ]
    if not samples:
        raise DatasetError(f"no raw/reference pairs found under {root}")
    logger.info("found %d pairs under %s", len(samples), root)
    return samples


def scan_unpaired(root: Path) -> List[Path]:
    """Images of an unpaired set, sorted by stem.

    Raises:
        DatasetError: If the directory is missing or holds no images.
    """
    root = Path(root)
    directory = root / "raw" if (root / "raw").is_dir() else root
    if not directory.is_dir():
        raise DatasetError(f"dataset directory {directory} does not exist")
    images = list(_image_files(directory).values())
    if not images:
        raise DatasetError(f"no images found under {directory}")
    return images


# ---------------------------------------------------------------------------
# Codecs
# ---------------------------------------------------------------------------


def load_image(path: Path) -> ImageBatch:
    """Decode an 8-bit image into a ``(1, 3, H, W)`` batch of ``byte / 255``.

    Grayscale images are replicated to three channels; alpha is dropped.

    Raises:
        ImageReadError: If the file is missing or cannot be decoded.
    """
    try:
        with Image.open(path) as img:
            img.load()
            rgb = img.convert("RGB")
    except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
        raise ImageReadError(f"cannot read image {path}: {exc}") from exc
    array = np.asarray(rgb, dtype=np.uint8)
    tensor = torch.from_numpy(array.copy()).permute(2, 0, 1).float() / 255.0
    return tensor.unsqueeze(0)


def quantize(image: ImageBatch) -> torch.Tensor:
    """Round-half-up 8-bit levels of values in [0, 1]."""
    return torch.floor(image * 255.0 + 0.5).clamp(0, 255)


def save_image(image: ImageBatch, path: Path) -> None:
    """Encode a ``(1, 3, H, W)`` or ``(3, H, W)`` image in [0, 1] as an 8-bit PNG.

    Raises:
        ValueError: If any value lies outside [0, 1]; callers clamp first.
    """
    if image.dim() == 4:
        if image.shape[0] != 1:
            raise ShapeMismatchError(f"save_image takes one image, got a batch of {image.shape[0]}")
        image = image[0]
    if image.dim() != 3 or image.shape[0] != 3:
        raise ShapeMismatchError(f"expected (3, H, W), got shape {tuple(image.shape)}")
    image = image.detach().cpu()
    if not torch.isfinite(image).all() or image.min() < 0 or image.max() > 1:
        raise ValueError(f"image values must lie in [0, 1] before saving to {path}")
    levels = quantize(image).to(torch.uint8).permute(1, 2, 0).numpy()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(levels).save(path, format="PNG")


class PairedImageDataset:
    """Decoded raw/reference pairs held in memory."""

    def __init__(self, samples: Sequence[PairedSample]):
        self.ids: List[str] = []
        self.raw: List[ImageBatch] = []
        self.reference: List[ImageBatch] = []
        for sample in samples:
            raw, ref = load_image(sample.raw_path), load_image(sample.reference_path)
            if raw.shape != ref.shape:
                raise ShapeMismatchError(
                    f"pair '{sample.id}': raw {tuple(raw.shape[-2:])} vs reference {tuple(ref.shape[-2:])}"
                )
            self.ids.append(sample.id)
            self.raw.append(raw)
            self.reference.append(ref)
        if not self.ids:
            raise DatasetError("dataset is empty")

    @classmethod
    def from_root(cls, root: Path) -> "PairedImageDataset":
        return cls(scan_paired(root))

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, index: int) -> Tuple[ImageBatch, ImageBatch]:
        return self.raw[index], self.reference[index]


# ---------------------------------------------------------------------------
# Underwater image formation model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UifmParams:
    """Transmission field and ambient light of ``clean * t + A * (1 - t)``.

    Attributes:
        t: ``(1 or B, 1 or 3, H, W)`` transmission in [0, 1].
        ambient: RGB ambient light in [0, 1].
    """

    t: torch.Tensor
    ambient: Tuple[float, float, float]

    def __post_init__(self) -> None:
        if not torch.isfinite(self.t).all() or self.t.min() < 0 or self.t.max() > 1:
            raise ValueError("transmission must lie in [0, 1]")
        if len(self.ambient) != 3 or any(not 0.0 <= a <= 1.0 for a in self.ambient):
            raise ValueError(f"ambient light must lie in [0, 1]^3, got {self.ambient}")

    def ambient_tensor(self, like: torch.Tensor) -> torch.Tensor:
        return torch.tensor(self.ambient, dtype=like.dtype, device=like.device).view(1, 3, 1, 1)


def synth_uifm(clean: ImageBatch, params: UifmParams, clamp: bool = True) -> ImageBatch:
    """Degrade a clean image: ``clean * t + A * (1 - t)``, clamped to [0, 1]."""
    check_image_batch(clean, "clean image")
    t = params.t.to(clean.dtype)
    degraded = clean * t + params.ambient_tensor(clean) * (1.0 - t)
    return degraded.clamp(0.0, 1.0) if clamp else degraded


def _generator(seed: Seed) -> torch.Generator:
    return seed if isinstance(seed, torch.Generator) else make_generator(seed)


def _uniform(generator: torch.Generator, low: float = 0.0, high: float = 1.0) -> float:
    return low + (high - low) * float(torch.rand((), generator=generator))


def _unit_field(height: int, width: int, style: str, generator: torch.Generator) -> torch.Tensor:
    """Smooth ``(1, 1, H, W)`` field in [0, 1]; 1 means clear water."""
    if style == "uniform":
        return torch.full((1, 1, height, width), _uniform(generator))
    if style == "linear-gradient":
        axis = int(torch.randint(0, 2, (1,), generator=generator))
        flip = bool(torch.randint(0, 2, (1,), generator=generator))
        length = height if axis == 0 else width
        ramp = torch.linspace(0.0, 1.0, length) if length > 1 else torch.ones(1)
        if flip:
            ramp = ramp.flip(0)
        shape = (1, 1, length, 1) if axis == 0 else (1, 1, 1, length)
        return ramp.view(shape).expand(1, 1, height, width).clone()
    if style == "radial":
        cy = _uniform(generator, 0.0, height - 1.0)
        cx = _uniform(generator, 0.0, width - 1.0)
        ys = torch.arange(height, dtype=torch.float32).view(-1, 1)
        xs = torch.arange(width, dtype=torch.float32).view(1, -1)
        dist = torch.sqrt((ys - cy) ** 2 + (xs - cx) ** 2)
        peak = float(dist.max())
        field = 1.0 - dist / peak if peak > 0 else torch.ones_like(dist)
        return field.view(1, 1, height, width)
    if style == "perlin-like":
        field = torch.zeros(1, 1, height, width)
        for cells, amplitude in ((2, 0.5), (4, 0.3), (8, 0.2)):
            grid = torch.rand(1, 1, cells + 1, cells + 1, generator=generator)
            field += amplitude * F.interpolate(
                grid, size=(height, width), mode="bilinear", align_corners=True
            )
        low, high = float(field.min()), float(field.max())
        return (field - low) / (high - low) if high > low else torch.full_like(field, 0.5)
    raise ValueError(f"Unknown transmission style '{style}', expected one of {TRANSMISSION_STYLES}")


def make_transmission(
    height: int,
    width: int,
    seed: Seed = 0,
    style: TransmissionStyle = "perlin-like",
    t_min: float = 0.3,
    t_max: float = 0.9,
    channel_wise: bool = True,
) -> torch.Tensor:
    """Smooth transmission field.

    The scalar field spans ``[t_min, t_max]``. With ``channel_wise`` it is raised to the
    per-channel exponents ``(1.5, 1.0, 0.8)`` and clamped to ``[0.05, 1]``, so red is
    attenuated most.

    Returns:
        ``(1, 3, H, W)`` when ``channel_wise`` else ``(1, 1, H, W)``.
    """
    if height < 1 or width < 1:
        raise DimensionError(f"transmission dims must be positive, got {height}x{width}")
    if not T_FLOOR <= t_min <= t_max <= 1.0:
        raise ValueError(f"need {T_FLOOR} <= t_min <= t_max <= 1, got t_min={t_min}, t_max={t_max}")
    if style not in TRANSMISSION_STYLES:
        raise ValueError(f"Unknown transmission style '{style}', expected one of {TRANSMISSION_STYLES}")
    unit = _unit_field(height, width, style, _generator(seed))
    field = t_min + (t_max - t_min) * unit
    if not channel_wise:
        return field
    exponents = torch.tensor(CHANNEL_EXPONENTS).view(1, 3, 1, 1)
    return field.pow(exponents).clamp(T_FLOOR, 1.0)


def procedural_scene(size: int, generator: torch.Generator) -> ImageBatch:
    """Clean ``(1, 3, size, size)`` scene: colour gradient, flat shapes and a sinusoidal texture."""
    ys = torch.linspace(0.0, 1.0, size).view(1, 1, size, 1)
    xs = torch.linspace(0.0, 1.0, size).view(1, 1, 1, size)
    top = torch.rand(1, 3, 1, 1, generator=generator)
    bottom = torch.rand(1, 3, 1, 1, generator=generator)
    scene = top * (1.0 - ys) + bottom * ys
    scene = scene.expand(1, 3, size, size).clone()

    for _ in range(int(torch.randint(2, 6, (1,), generator=generator))):
        colour = torch.rand(1, 3, 1, 1, generator=generator)
        cy, cx = (float(v) for v in torch.rand(2, generator=generator))
        radius = 0.08 + 0.22 * float(torch.rand((), generator=generator))
        if bool(torch.randint(0, 2, (1,), generator=generator)):
            mask = ((ys - cy) ** 2 + (xs - cx) ** 2) <= radius**2
        else:
            mask = ((ys - cy).abs() <= radius) & ((xs - cx).abs() <= radius * 0.7)
        scene = torch.where(mask, colour.expand_as(scene), scene)

    freq_y, freq_x = (2.0 + 10.0 * float(v) for v in torch.rand(2, generator=generator))
    phase = 2.0 * math.pi * float(torch.rand((), generator=generator))
    texture = torch.sin(2.0 * math.pi * (freq_y * ys + freq_x * xs) + phase)
    scene = scene + 0.08 * texture
    return scene.clamp(0.0, 1.0)


def _sample_entry(index: int, generator: torch.Generator) -> ManifestEntry:
    seed = int(torch.randint(0, 2**31 - 1, (1,), generator=generator))
    t_min = round(_uniform(generator, 0.2, 0.4), 4)
    t_max = round(_uniform(generator, 0.7, 0.95), 4)
    ambient = (
        round(_uniform(generator, 0.05, 0.25), 4),
        round(_uniform(generator, 0.45, 0.75), 4),
        round(_uniform(generator, 0.55, 0.85), 4),
    )
    return ManifestEntry(
        id=f"{index:04d}",
        seed=seed,
        style=TRANSMISSION_STYLES[index % len(TRANSMISSION_STYLES)],  # type: ignore[arg-type]
        t_min=t_min,
        t_max=t_max,
        channel_wise=True,
        ambient=ambient,
    )


def render_sample(entry: ManifestEntry, size: int) -> Tuple[ImageBatch, ImageBatch]:
    """Regenerate (clean, degraded) of a manifest entry; the clean image is 8-bit quantised."""
    generator = make_generator(entry.seed)
    clean = quantize(procedural_scene(size, generator)) / 255.0
    t = make_transmission(
        size, size, generator, entry.style, entry.t_min, entry.t_max, entry.channel_wise
    )
    degraded = synth_uifm(clean, UifmParams(t=t, ambient=entry.ambient))
    return clean, degraded


def emit_synthetic_dataset(n: int, size: int, seed: int, out_root: Path) -> SyntheticManifest:
    """Write ``n`` procedural pairs under ``out_root`` plus ``manifest.json``.

    The same arguments always produce byte-identical files.

    Raises:
        ValueError: If ``n < 1``.
        DimensionError: If ``size`` is not a positive multiple of 24.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if size < SYNTH_SIZE_MULTIPLE or size % SYNTH_SIZE_MULTIPLE:
        raise DimensionError(
            f"size must be a positive multiple of {SYNTH_SIZE_MULTIPLE}, got {size}"
        )
    out_root = Path(out_root)
    raw_dir, ref_dir = out_root / "raw", out_root / "reference"
    raw_dir.mkdir(parents=True, exist_ok=True)
    ref_dir.mkdir(parents=True, exist_ok=True)

    generator = make_generator(seed)
    entries = []
    for index in range(n):
        entry = _sample_entry(index, generator)
        clean, degraded = render_sample(entry, size)
        save_image(clean, ref_dir / f"{entry.id}.png")
        save_image(degraded, raw_dir / f"{entry.id}.png")
        entries.append(entry)

    manifest = SyntheticManifest(
        schema_version=MANIFEST_SCHEMA_VERSION, seed=seed, size=size, samples=entries
    )
    (out_root / "manifest.json").write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    logger.info("wrote %d synthetic pairs of %dx%d to %s", n, size, size, out_root)
    return manifest


def read_manifest(root: Path) -> Optional[SyntheticManifest]:
    path = Path(root) / "manifest.json"
    if not path.is_file():
        return None
    return SyntheticManifest.model_validate_json(path.read_text(encoding="utf-8"))
