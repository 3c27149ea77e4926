"""Published SMDR-IS results kept as documented targets.

These numbers come from full-scale UIEB training and are not reproducible at desk
scale. They feed the composite-arithmetic tests and are printed next to ablation
summaries for orientation.
"""

from typing import Dict, List, Tuple

from src.models.report_model import Direction

METHODS: Tuple[str, ...] = (
    "ULAP",
    "IBLA",
    "GDCP",
    "WaterNet",
    "FUnIE-GAN",
    "UWCNN",
    "UColor",
    "PUIE",
    "SMDR-IS",
)

UIEB_VAL_DIRECTIONS: Dict[str, Direction] = {
    "psnr": "higher",
    "mse": "lower",
    "ssim": "higher",
    "vsi": "higher",
    "fsim": "higher",
    "fsimc": "higher",
    "uiqm": "higher",
    "uciqe": "higher",
    "ccf": "higher",
    "ceiq": "higher",
}

# Per-method metric values on UIEB Val, column order of METHODS.
UIEB_VAL: Dict[str, Tuple[float, ...]] = {
    "psnr": (15.913, 17.988, 13.386, 17.349, 17.114, 17.985, 20.962, 22.133, 23.710),
    "mse": (0.174, 0.143, 0.228, 0.144, 0.150, 0.134, 0.097, 0.082, 0.075),
    "ssim": (0.745, 0.805, 0.747, 0.813, 0.701, 0.844, 0.863, 0.895, 0.922),
    "vsi": (0.947, 0.958, 0.943, 0.966, 0.941, 0.966, 0.971, 0.979, 0.983),
    "fsim": (0.915, 0.928, 0.901, 0.908, 0.891, 0.923, 0.931, 0.954, 0.967),
    "fsimc": (0.878, 0.899, 0.865, 0.899, 0.858, 0.903, 0.920, 0.944, 0.957),
    "uiqm": (2.259, 2.490, 2.670, 2.917, 3.092, 3.011, 3.049, 3.036, 3.015),
    "uciqe": (0.604, 0.606, 0.592, 0.606, 0.564, 0.554, 0.591, 0.588, 0.607),
    "ccf": (24.145, 23.841, 23.026, 20.042, 20.416, 20.360, 21.827, 23.855, 26.012),
    "ceiq": (3.209, 3.283, 3.208, 3.101, 3.307, 3.090, 3.209, 3.336, 3.369),
}
UIEB_VAL_ALL: Tuple[float, ...] = (
    49.441, 51.656, 46.109, 47.455, 47.733, 48.502, 53.226, 56.638, 60.466,
)

NO_REFERENCE_DIRECTIONS: Dict[str, Direction] = {
    "uiqm": "higher",
    "uciqe": "higher",
    "ccf": "higher",
    "ceiq": "higher",
}
UIEB_TEST: Dict[str, Tuple[float, ...]] = {
    "uiqm": (1.511, 1.834, 2.110, 2.399, 2.867, 2.514, 2.481, 2.548, 2.574),
    "uciqe": (0.569, 0.607, 0.583, 0.591, 0.556, 0.530, 0.565, 0.573, 0.578),
    "ccf": (16.726, 20.250, 18.573, 16.279, 16.283, 14.996, 16.825, 19.009, 19.740),
    "ceiq": (2.784, 3.180, 3.121, 2.983, 2.967, 2.836, 3.053, 3.249, 3.188),
}
UIEB_TEST_ALL: Tuple[float, ...] = (
    21.589, 25.872, 24.387, 22.252, 22.673, 20.876, 22.925, 25.378, 26.081,
)
U45: Dict[str, Tuple[float, ...]] = {
    "uiqm": (2.282, 2.388, 2.275, 2.957, 2.495, 3.064, 3.148, 3.192, 3.121),
    "uciqe": (0.588, 0.595, 0.597, 0.601, 0.545, 0.554, 0.586, 0.581, 0.605),
    "ccf": (22.069, 21.598, 22.736, 20.391, 12.931, 21.418, 22.100, 23.154, 25.489),
    "ceiq": (3.192, 3.249, 3.191, 3.186, 2.785, 3.213, 3.283, 3.359, 3.397),
}
U45_ALL: Tuple[float, ...] = (
    28.131, 27.830, 28.799, 27.135, 18.757, 28.248, 29.117, 30.287, 32.612,
)

# Seconds per image and Aggregative (UIEB Val ALL minus seconds).
SECONDS_PER_IMAGE: Tuple[float, ...] = (
    0.3583, 9.1341, 0.1625, 0.0906, 0.0033, 0.0497, 0.5765, 0.0181, 0.0607,
)
AGGREGATIVE: Tuple[float, ...] = (
    49.0827, 42.5219, 45.9465, 47.3644, 47.7297, 48.4523, 52.6495, 56.6199, 60.4053,
)

# Ablation rows on UIEB Test as (flags, PSNR, SSIM, ALL); ALL = PSNR + SSIM.
ABLATION_TABLES: Dict[str, List[Tuple[Dict[str, bool], float, float, float]]] = {
    "stages": [
        ({"S1": True, "S2": False, "S3": False, "S4": False}, 22.790, 0.916, 23.706),
        ({"S1": True, "S2": True, "S3": False, "S4": False}, 22.872, 0.915, 23.787),
        ({"S1": True, "S2": True, "S3": True, "S4": False}, 23.248, 0.915, 24.163),
        ({"S1": True, "S2": True, "S3": True, "S4": True}, 23.710, 0.922, 24.631),
    ],
    "bica": [
        ({"CA": False, "PA": True, "ReGIA": True, "HCAFE": True}, 21.219, 0.901, 22.120),
        ({"CA": True, "PA": False, "ReGIA": True, "HCAFE": True}, 23.352, 0.917, 24.269),
        ({"CA": True, "PA": True, "ReGIA": False, "HCAFE": True}, 22.673, 0.907, 23.580),
        ({"CA": True, "PA": True, "ReGIA": True, "HCAFE": False}, 23.276, 0.911, 24.186),
        ({"CA": True, "PA": True, "ReGIA": True, "HCAFE": True}, 23.710, 0.922, 24.631),
    ],
    "asisf": [
        ({"En": False, "En_to_De": True, "De": True}, 23.021, 0.915, 23.936),
        ({"En": True, "En_to_De": False, "De": True}, 23.697, 0.919, 24.615),
        ({"En": True, "En_to_De": True, "De": False}, 23.122, 0.914, 24.036),
        ({"En": True, "En_to_De": True, "De": True}, 23.710, 0.922, 24.631),
    ],
    "loss": [
        ({"L1": False, "L_pre": True, "L_mse": True}, 23.257, 0.915, 24.172),
        ({"L1": True, "L_pre": False, "L_mse": True}, 22.905, 0.912, 23.817),
        ({"L1": True, "L_pre": True, "L_mse": False}, 23.151, 0.919, 24.069),
        ({"L1": True, "L_pre": True, "L_mse": True}, 23.710, 0.922, 24.631),
    ],
}


def method_row(table: Dict[str, Tuple[float, ...]], method: str) -> Dict[str, float]:
    """Metric values of one method from a per-metric table."""
    index = METHODS.index(method)
    return {metric: values[index] for metric, values in table.items()}
