"""Image quality metrics and the composite scores.

Every metric takes ``H x W x 3`` float arrays in [0, 1] (``as_numpy_image`` converts a
``(1, 3, H, W)`` tensor) and is a pure function of its inputs.

Full-reference: PSNR, MSE/RMSE, SSIM (luminance, 11x11 Gaussian window, sigma 1.5).
No-reference: UIQM, UCIQE, CCF without its colour term, CEIQ.
Composites: ALL (sum of higher-better minus lower-better values) and Aggregative
(ALL minus seconds per image).
"""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from scipy import ndimage, signal
from skimage import color, exposure, filters

from src.models.report_model import Direction, MetricReport
from src.utils.errors import DimensionError, ShapeMismatchError

logger = logging.getLogger(__name__)

PSNR_CAP_DB = 100.0
MSE_FLOOR = 1e-10

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03

# BT.601 luminance
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

UIQM_COEFFS = (0.0282, 0.2953, 3.5753)
UICM_ALPHA = 0.1
UISM_BLOCK = 8
UICONM_BLOCK = 16
PLIP_GAMMA = 1026.0

UCIQE_COEFFS = (0.4680, 0.2745, 0.2576)
UCIQE_CONTRAST_FRACTION = 0.01

CCF_CONTRAST_WEIGHT = 0.61759
CCF_FOG_WEIGHT = 0.33988
DARK_CHANNEL_PATCH = 15

CEIQ_BIAS, CEIQ_SSIM_W, CEIQ_ENTROPY_W, CEIQ_KL_W = 0.5, 1.2, 0.25, 0.5
CEIQ_RANGE = (0.0, 5.0)

FULL_REFERENCE: Dict[str, Direction] = {"psnr": "higher", "mse": "lower", "ssim": "higher"}
NO_REFERENCE: Dict[str, Direction] = {
    "uiqm": "higher",
    "uciqe": "higher",
    "ccf": "higher",
    "ceiq": "higher",
}

ImageLike = Union[np.ndarray, torch.Tensor]


def as_numpy_image(image: ImageLike) -> np.ndarray:
    """Convert a ``(1, 3, H, W)``/``(3, H, W)`` tensor or ``H x W x 3`` array to float64 HWC."""
    if isinstance(image, torch.Tensor):
        tensor = image.detach().to("cpu", torch.float64)
        if tensor.dim() == 4:
            if tensor.shape[0] != 1:
                raise ShapeMismatchError(f"expected a single image, got batch {tensor.shape[0]}")
            tensor = tensor[0]
        if tensor.dim() != 3:
            raise ShapeMismatchError(f"expected (3, H, W), got shape {tuple(tensor.shape)}")
        array = tensor.permute(1, 2, 0).numpy()
    else:
        array = np.asarray(image, dtype=np.float64)
    _check_rgb(array)
    return array


def _check_rgb(image: np.ndarray) -> None:
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeMismatchError(f"expected an H x W x 3 RGB image, got shape {image.shape}")


def _check_pair(pred: np.ndarray, target: np.ndarray) -> None:
    _check_rgb(pred)
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"prediction {pred.shape} and target {target.shape} differ")


def luminance(image: np.ndarray) -> np.ndarray:
    return image @ LUMA_WEIGHTS


def _to_uint8_levels(values: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5)


# ---------------------------------------------------------------------------
# Full-reference
# ---------------------------------------------------------------------------


def mse_rmse(pred: np.ndarray, target: np.ndarray) -> Tuple[float, float]:
    _check_pair(pred, target)
    mse = float(np.mean((pred - target) ** 2))
    return mse, math.sqrt(mse)


def psnr(pred: np.ndarray, target: np.ndarray) -> float:
    """``10 * log10(1 / MSE)`` for [0, 1] images, capped at 100 dB."""
    mse, _ = mse_rmse(pred, target)
    if mse < MSE_FLOOR:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(1.0 / mse), PSNR_CAP_DB)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    radius = size // 2
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def _filter_valid(values: np.ndarray, window: np.ndarray) -> np.ndarray:
    return signal.convolve2d(values, window, mode="valid")


def ssim_gray(
    x: np.ndarray, y: np.ndarray, data_range: float = 1.0, window_size: int = SSIM_WINDOW
) -> float:
    """Mean SSIM of two single-channel images over fully covered window positions."""
    if x.shape != y.shape:
        raise ShapeMismatchError(f"SSIM inputs {x.shape} and {y.shape} differ")
    if min(x.shape) < window_size:
        raise DimensionError(
            f"SSIM needs images of at least {window_size}x{window_size}, "
            f"got {x.shape[0]}x{x.shape[1]}"
        )
    window = _gaussian_window(window_size)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_x = _filter_valid(x, window)
    mu_y = _filter_valid(y, window)
    var_x = _filter_valid(x * x, window) - mu_x**2
    var_y = _filter_valid(y * y, window) - mu_y**2
    cov = _filter_valid(x * y, window) - mu_x * mu_y
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    )
    return float(ssim_map.mean())


def ssim(pred: np.ndarray, target: np.ndarray) -> float:
    """SSIM over the BT.601 luminance of two RGB images."""
    _check_pair(pred, target)
    return ssim_gray(luminance(pred), luminance(target))


# ---------------------------------------------------------------------------
# UIQM
# ---------------------------------------------------------------------------


def _trimmed_stats(values: np.ndarray, alpha: float = UICM_ALPHA) -> Tuple[float, float]:
    ordered = np.sort(values, axis=None)
    cut = int(alpha * ordered.size)
    kept = ordered[cut : ordered.size - cut] if ordered.size - 2 * cut > 0 else ordered
    mean = float(kept.mean())
    return mean, float(np.mean((kept - mean) ** 2))


def _uicm(rgb255: np.ndarray) -> float:
    red, green, blue = rgb255[..., 0], rgb255[..., 1], rgb255[..., 2]
    mu_rg, var_rg = _trimmed_stats(red - green)
    mu_yb, var_yb = _trimmed_stats((red + green) / 2.0 - blue)
    return -0.0268 * math.sqrt(mu_rg**2 + mu_yb**2) + 0.1586 * math.sqrt(var_rg + var_yb)


def _blocks(channel: np.ndarray, size: int) -> Iterable[np.ndarray]:
    rows = math.ceil(channel.shape[0] / size)
    cols = math.ceil(channel.shape[1] / size)
    for i in range(rows):
        for j in range(cols):
            yield channel[i * size : (i + 1) * size, j * size : (j + 1) * size]


def _eme(channel: np.ndarray, size: int = UISM_BLOCK) -> float:
    blocks = list(_blocks(channel, size))
    weight = 2.0 / len(blocks)
    total = 0.0
    for block in blocks:
        low, high = float(block.min()), float(block.max())
        low = low if low != 0 else 1.0
        high = high if high != 0 else 1.0
        total += weight * math.log(high / low)
    return total


def _uism(rgb255: np.ndarray) -> float:
    emes = []
    for c in range(3):
        channel = rgb255[..., c]
        edges = np.round(np.clip(channel * filters.sobel(channel), 0.0, 255.0))
        emes.append(_eme(edges))
    return float(np.dot(LUMA_WEIGHTS, emes))


def _plip_sum(a: float, b: float) -> float:
    return a + b - a * b / PLIP_GAMMA


def _plip_sub(a: float, b: float) -> float:
    return PLIP_GAMMA * (a - b) / (PLIP_GAMMA - b)


def _plip_scale(c: float, a: float) -> float:
    return PLIP_GAMMA - PLIP_GAMMA * (1.0 - a / PLIP_GAMMA) ** c


def _uiconm(gray: np.ndarray, size: int = UICONM_BLOCK) -> float:
    blocks = list(_blocks(gray, size))
    total = 0.0
    for block in blocks:
        low, high = float(block.min()), float(block.max())
        bottom = _plip_sum(high, low)
        ratio = _plip_sub(high, low) / bottom if bottom != 0 else 0.0
        if ratio > 0:
            total += ratio * math.log(ratio)
    return _plip_scale(1.0 / len(blocks), total)


def uiqm_components(image: np.ndarray) -> Tuple[float, float, float]:
    """(UICM, UISM, UIConM) of an RGB image in [0, 1]."""
    _check_rgb(image)
    rgb255 = image * 255.0
    return _uicm(rgb255), _uism(rgb255), _uiconm(luminance(image))


def uiqm(image: np.ndarray) -> float:
    uicm, uism, uiconm = uiqm_components(image)
    c1, c2, c3 = UIQM_COEFFS
    return c1 * uicm + c2 * uism + c3 * uiconm


# ---------------------------------------------------------------------------
# UCIQE
# ---------------------------------------------------------------------------


def uciqe_components(image: np.ndarray) -> Tuple[float, float, float]:
    """(chroma standard deviation, luminance contrast, mean saturation) in unit Lab."""
    _check_rgb(image)
    lab = color.rgb2lab(np.clip(image, 0.0, 1.0))
    light = lab[..., 0] / 100.0
    a, b = lab[..., 1] / 255.0, lab[..., 2] / 255.0
    chroma = np.sqrt(a**2 + b**2)
    sigma_c = float(chroma.std())

    ordered = np.sort(light, axis=None)
    count = max(int(round(UCIQE_CONTRAST_FRACTION * ordered.size)), 1)
    contrast = float(ordered[-count:].mean() - ordered[:count].mean())

    denom = np.sqrt(chroma**2 + light**2)
    saturation = np.divide(chroma, denom, out=np.zeros_like(chroma), where=denom > 0)
    return sigma_c, contrast, float(saturation.mean())


def uciqe(image: np.ndarray) -> float:
    sigma_c, contrast, saturation = uciqe_components(image)
    w1, w2, w3 = UCIQE_COEFFS
    return w1 * sigma_c + w2 * contrast + w3 * saturation


# ---------------------------------------------------------------------------
# CCF without colour
# ---------------------------------------------------------------------------


def ccf_components(image: np.ndarray) -> Tuple[float, float]:
    """(contrast, fog) terms on the 8-bit scale."""
    _check_rgb(image)
    gray = _to_uint8_levels(luminance(image))
    gx = ndimage.sobel(gray, axis=1, mode="reflect")
    gy = ndimage.sobel(gray, axis=0, mode="reflect")
    contrast = math.sqrt(float(np.mean(gx**2 + gy**2)))

    dark = ndimage.minimum_filter(
        _to_uint8_levels(image).min(axis=2), size=DARK_CHANNEL_PATCH, mode="nearest"
    )
    fog = float(dark.std())
    return contrast, fog


def ccf_no_color(image: np.ndarray) -> float:
    contrast, fog = ccf_components(image)
    return CCF_CONTRAST_WEIGHT * contrast + CCF_FOG_WEIGHT * fog


# ---------------------------------------------------------------------------
# CEIQ
# ---------------------------------------------------------------------------


def _histogram(levels: np.ndarray) -> np.ndarray:
    counts = np.bincount(levels.astype(np.int64).ravel(), minlength=256).astype(np.float64)
    return counts / counts.sum()


def _entropy_bits(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def _symmetric_kl_bits(p: np.ndarray, q: np.ndarray, eps: float = 1e-10) -> float:
    p = (p + eps) / (p + eps).sum()
    q = (q + eps) / (q + eps).sum()
    return float((p * np.log2(p / q)).sum() + (q * np.log2(q / p)).sum())


def _clipped_window(shape: Tuple[int, ...]) -> int:
    """Largest odd window no bigger than the SSIM window or the shorter image side."""
    side = min(SSIM_WINDOW, *shape[:2])
    return side if side % 2 else side - 1


def ceiq(image: np.ndarray) -> float:
    """Contrast-enhancement quality from equalisation similarity, entropy and divergence.

    A single-valued image has zero entropy and returns the bottom of the score range.
    Images smaller than the SSIM window use a window clipped to the image.
    """
    _check_rgb(image)
    gray = np.clip(luminance(image), 0.0, 1.0)
    levels = _to_uint8_levels(gray)
    hist = _histogram(levels)
    entropy = _entropy_bits(hist)
    if entropy == 0.0:
        return CEIQ_RANGE[0]
    equalized = exposure.equalize_hist(gray, nbins=256)
    similarity = ssim_gray(gray, equalized, window_size=_clipped_window(gray.shape))
    divergence = _symmetric_kl_bits(hist, _histogram(_to_uint8_levels(equalized)))
    score = (
        CEIQ_BIAS
        + CEIQ_SSIM_W * similarity
        + CEIQ_ENTROPY_W * entropy
        - CEIQ_KL_W * divergence
    )
    return float(np.clip(score, *CEIQ_RANGE))


# ---------------------------------------------------------------------------
# Composites and reports
# ---------------------------------------------------------------------------


def all_score(values: Mapping[str, object], directions: Mapping[str, Direction]) -> float:
    """Sum of higher-better values minus lower-better values; absent metrics are skipped."""
    total = 0.0
    for name, direction in directions.items():
        value = values.get(name)
        if value is None:
            continue
        total += float(value) if direction == "higher" else -float(value)  # type: ignore[arg-type]
    return total


def aggregative(metric_sum: float, seconds_per_image: float) -> float:
    if seconds_per_image < 0:
        raise ValueError(f"seconds per image must be non-negative, got {seconds_per_image}")
    return metric_sum - seconds_per_image


def report_directions(paired: bool) -> Dict[str, Direction]:
    directions: Dict[str, Direction] = dict(FULL_REFERENCE) if paired else {}
    directions.update(NO_REFERENCE)
    return directions


def score_image(
    restored: np.ndarray,
    reference: Optional[np.ndarray] = None,
    paper_compat: bool = False,
) -> Dict[str, float]:
    """Metric values of one restored image, full-reference ones only with a reference."""
    row: Dict[str, float] = {}
    if reference is not None:
        mse, rmse = mse_rmse(restored, reference)
        row["psnr"] = psnr(restored, reference)
        row["mse"] = rmse if paper_compat else mse
        row["rmse"] = rmse
        row["ssim"] = ssim(restored, reference)
    row["uiqm"] = uiqm(restored)
    row["uciqe"] = uciqe(restored)
    row["ccf"] = ccf_no_color(restored)
    row["ceiq"] = ceiq(restored)
    return row


def finish_row(
    image_id: str, values: Dict[str, float], seconds: float, directions: Mapping[str, Direction]
) -> Dict[str, object]:
    """Attach the image id, ALL, seconds and Aggregative columns."""
    total = all_score(values, directions)
    row: Dict[str, object] = {"image": image_id}
    row.update(values)
    row["all"] = total
    row["seconds"] = seconds
    row["aggregative"] = aggregative(total, seconds)
    return row


def build_report(
    rows: Sequence[Dict[str, object]],
    paired: bool,
    paper_compat: bool = False,
    skipped: int = 0,
) -> MetricReport:
    """Assemble rows into a report with a column-wise ``mean`` row."""
    mean: Dict[str, object] = {"image": "mean"}
    if rows:
        for key in rows[0]:
            if key == "image":
                continue
            mean[key] = float(np.mean([float(row[key]) for row in rows]))  # type: ignore[arg-type]
    return MetricReport(
        directions=report_directions(paired),
        rows=list(rows),
        mean=mean,
        skipped=skipped,
        paper_compat=paper_compat,
    )


def write_report(report: MetricReport, out_dir: Path, name: str = "metrics") -> Tuple[Path, Path]:
    """Write ``<name>.csv`` (direction header comment, rows, mean row) and ``<name>.json``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{name}.csv"
    json_path = out_dir / f"{name}.json"
    columns: List[str] = report.columns

    with open(csv_path, "w", newline="", encoding="utf-8") as handle:
        directions = ", ".join(f"{key}={value}" for key, value in report.directions.items())
        handle.write(f"# directions: {directions}\n")
        if report.paper_compat:
            handle.write("# mse column carries RMSE (paper-compat)\n")
        writer = csv.DictWriter(handle, fieldnames=columns)
        writer.writeheader()
        for row in list(report.rows) + ([report.mean] if report.rows else []):
            writer.writerow({key: _format(row.get(key)) for key in columns})

    json_path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    logger.info("wrote %s and %s", csv_path, json_path)
    return csv_path, json_path


def _format(value: object) -> object:
    if isinstance(value, float):
        return f"{value:.6f}"
    return value


def read_report_json(path: Path) -> MetricReport:
    return MetricReport.model_validate(json.loads(path.read_text(encoding="utf-8")))
