"""Underwater image formation.

Images are ``H x W x 3`` float arrays of linear RGB intensities in ``[0, 1]``,
depth maps are ``H x W`` float arrays of ranges in meters.

Two forward models are implemented:

* the simplified model ``I = J T + A (1 - T)`` with ``T = exp(-beta d)``

* the improved model ``I = J T + A T (1 - T')`` with ``T' = exp(-alpha d)``,
  where the veiling light is itself attenuated per wavelength
"""
from typing import Dict, Sequence, Tuple, Union

import numpy as np

from uwsim.exceptions import InvalidInput, InvalidParameter, ShapeMismatch


#: Scattering coefficient for a moderate, homogeneous haze
DEFAULT_ALPHA = 1.0

Coefficient = Union[float, Sequence[float], np.ndarray]


def as_image(data, name="image") -> np.ndarray:
    """Validate and convert anything array-like to a float64 RGB image."""
    img = np.asarray(data, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InvalidInput("{} must be H x W x 3, got shape {}".format(name, img.shape))
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise InvalidInput("{} is empty".format(name))
    if not np.all(np.isfinite(img)):
        raise InvalidInput("{} contains NaN or Inf values".format(name))
    return img


def as_depth(data, name="depth") -> np.ndarray:
    """Validate and convert a depth map."""
    depth = np.asarray(data, dtype=np.float64)
    if depth.ndim == 3 and depth.shape[2] == 1:
        depth = depth[:, :, 0]
    if depth.ndim != 2:
        raise InvalidInput("{} must be H x W, got shape {}".format(name, depth.shape))
    if not np.all(np.isfinite(depth)):
        raise InvalidInput("{} contains NaN or Inf values".format(name))
    if np.any(depth < 0):
        raise InvalidInput("{} contains negative ranges".format(name))
    return depth


def check_same_size(img: np.ndarray, depth: np.ndarray):
    if img.shape[:2] != depth.shape[:2]:
        raise ShapeMismatch("Image is {}x{} but depth map is {}x{}".format(img.shape[1], img.shape[0], depth.shape[1], depth.shape[0]))


def _as_coefficient(coeff: Coefficient, name: str) -> np.ndarray:
    c = np.asarray(coeff, dtype=np.float64)
    if c.ndim == 0:
        c = np.repeat(c, 3)
    if c.shape != (3,):
        raise InvalidParameter("{} must be a scalar or a 3-vector, got {}".format(name, coeff))
    if not np.all(np.isfinite(c)):
        raise InvalidParameter("{} must be finite".format(name))
    if np.any(c < 0):
        raise InvalidParameter("{} must be non-negative, got {}".format(name, c.tolist()))
    return c


class WaterParams:
    """Optical properties of the water column between camera and scene.

    :param beta: Per channel (R, G, B) attenuation coefficients, 1/m
    :param ambient: Per channel ambient (veiling) light in [0, 1]
    :param alpha: Scattering coefficient driving the haze term, 1/m
    """

    def __init__(self, beta: Coefficient, ambient: Coefficient, alpha: float=DEFAULT_ALPHA):
        self.beta = _as_coefficient(beta, "beta")
        self.ambient = _as_coefficient(ambient, "ambient")
        if np.any(self.ambient > 1):
            raise InvalidParameter("ambient light must be within [0, 1], got {}".format(self.ambient.tolist()))
        alpha = float(alpha)
        if not np.isfinite(alpha) or alpha < 0:
            raise InvalidParameter("alpha must be non-negative, got {}".format(alpha))
        self.alpha = alpha

    def __repr__(self):
        return "<WaterParams beta={} ambient={} alpha={}>".format(self.beta.tolist(), self.ambient.tolist(), self.alpha)

    def __eq__(self, other):
        return isinstance(other, WaterParams) and \
            np.array_equal(self.beta, other.beta) and \
            np.array_equal(self.ambient, other.ambient) and \
            self.alpha == other.alpha

    def is_ordered(self) -> bool:
        """Red attenuates at least as fast as green, green at least as fast as blue."""
        return self.beta[0] >= self.beta[1] >= self.beta[2]

    def as_dict(self) -> dict:
        return {
            "beta_r": float(self.beta[0]),
            "beta_g": float(self.beta[1]),
            "beta_b": float(self.beta[2]),
            "alpha": self.alpha,
            "ambient_r": float(self.ambient[0]),
            "ambient_g": float(self.ambient[1]),
            "ambient_b": float(self.ambient[2]),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WaterParams":
        return cls(
            beta=[float(d["beta_r"]), float(d["beta_g"]), float(d["beta_b"])],
            ambient=[float(d["ambient_r"]), float(d["ambient_g"]), float(d["ambient_b"])],
            alpha=float(d["alpha"]))


class WaterPreset:
    """Parameter ranges describing one class of water.

    Numbers are configuration defaults, not measurements.
    Every preset keeps ``beta_r >= beta_g >= beta_b``.
    """

    def __init__(self, name: str, beta_ranges, ambient_ranges, alpha_range):
        self.name = name
        self.beta_ranges = tuple(tuple(r) for r in beta_ranges)  # type: Tuple[Tuple[float, float], ...]
        self.ambient_ranges = tuple(tuple(r) for r in ambient_ranges)
        self.alpha_range = tuple(alpha_range)

    def nominal(self) -> WaterParams:
        """Mid-points of all ranges."""
        mid = lambda r: (r[0] + r[1]) / 2
        return WaterParams(
            [mid(r) for r in self.beta_ranges],
            [mid(r) for r in self.ambient_ranges],
            mid(self.alpha_range))


PRESETS = {
    "clear-oceanic": WaterPreset(
        "clear-oceanic",
        beta_ranges=[(0.30, 0.45), (0.05, 0.10), (0.02, 0.05)],
        ambient_ranges=[(0.05, 0.15), (0.45, 0.60), (0.60, 0.80)],
        alpha_range=(0.8, 1.2)),
    "coastal-green": WaterPreset(
        "coastal-green",
        beta_ranges=[(0.45, 0.65), (0.12, 0.22), (0.10, 0.18)],
        ambient_ranges=[(0.05, 0.15), (0.55, 0.75), (0.40, 0.60)],
        alpha_range=(0.9, 1.3)),
    "turbid-green": WaterPreset(
        "turbid-green",
        beta_ranges=[(0.70, 1.00), (0.25, 0.40), (0.22, 0.35)],
        ambient_ranges=[(0.10, 0.20), (0.50, 0.70), (0.35, 0.50)],
        alpha_range=(1.2, 1.8)),
}  # type: Dict[str, WaterPreset]


def water_preset(name: str) -> WaterPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise InvalidParameter("Unknown water type {}, choose from {}".format(name, ", ".join(sorted(PRESETS))))


def transmission_map(depth, coeff: Coefficient) -> np.ndarray:
    """Fraction of light surviving the water path, ``exp(-coeff * d)``.

    :param depth: H x W ranges in meters
    :param coeff: Scalar or per channel coefficient in 1/m
    :return: H x W x 3 transmission values in (0, 1]
    """
    c = _as_coefficient(coeff, "coefficient")
    d = as_depth(depth)
    return np.exp(-d[:, :, np.newaxis] * c[np.newaxis, np.newaxis, :])


def synthesize_legacy(clear, depth, params: WaterParams, clamp: bool=True) -> np.ndarray:
    """Degrade a clear image with the simplified model ``I = J T + A (1 - T)``."""
    j = as_image(clear, "clear image")
    d = as_depth(depth)
    check_same_size(j, d)
    t = transmission_map(d, params.beta)
    out = j * t + params.ambient * (1 - t)
    if clamp:
        out = np.clip(out, 0, 1)
    return out


def synthesize_improved(clear, depth, params: WaterParams, clamp: bool=True) -> np.ndarray:
    """Degrade a clear image with the improved model ``I = J T + A T (1 - T')``.

    The ambient term is attenuated per channel, ``A_c T_c``.
    """
    j = as_image(clear, "clear image")
    d = as_depth(depth)
    check_same_size(j, d)
    t = transmission_map(d, params.beta)
    haze = 1 - transmission_map(d, params.alpha)
    out = j * t + params.ambient * t * haze
    if clamp:
        out = np.clip(out, 0, 1)
    return out


#: CLI names of the forward models
MODELS = {
    "improved": synthesize_improved,
    "legacy": synthesize_legacy,
}


def synthesize(clear, depth, params: WaterParams, model: str="improved", clamp: bool=True) -> np.ndarray:
    try:
        func = MODELS[model]
    except KeyError:
        raise InvalidParameter("Unknown imaging model {}".format(model))
    return func(clear, depth, params, clamp=clamp)


def forward_sensitivity(depth, params: WaterParams) -> np.ndarray:
    """Diagonal Jacobian ``dI_c / dJ_c`` of the improved model.

    The output depends on J only through the ``J T`` term, so this is ``T``.
    """
    return transmission_map(depth, params.beta)
