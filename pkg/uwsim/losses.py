"""Restoration loss functions with analytic gradients.

Every loss compares a reconstruction ``g`` against a ground truth ``r`` and
returns a :py:class:`LossResult` holding the scalar value and ``dL/dg``.
Colour images are handled per channel and averaged over channels.
"""
from typing import Optional, Tuple

import numpy as np
from scipy.signal import fftconvolve

from uwsim.exceptions import InvalidInput, InvalidParameter, ShapeMismatch
from uwsim.imaging import as_image


#: Mixing weight of the base loss in combined losses
DEFAULT_MIX_ALPHA = 0.8

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

#: Dynamic range of float images
DATA_RANGE = 1.0

#: Per scale exponents of the standard five scale MS-SSIM
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)

#: Relative contrast-structure values are clipped here so that fractional powers stay real
_MSSSIM_FLOOR = 1e-8

#: Loss kind names in table order
LOSS_KINDS = ("l1", "l2", "ssim", "msssim", "gdl", "l1l2", "l1ssim", "l1msssim", "l1gdl")

#: Combined kind -> its base loss
COMBINED_KINDS = {
    "l1l2": "l2",
    "l1ssim": "ssim",
    "l1msssim": "msssim",
    "l1gdl": "gdl",
}


def loss_kinds() -> Tuple[str, ...]:
    return LOSS_KINDS


class LossSpec:
    """Which loss to evaluate.

    :param kind: One of :py:data:`LOSS_KINDS`
    :param mix_alpha: Weight of the base loss in combined kinds, the L1 term gets ``1 - mix_alpha``
    :param msssim_scales: Number of dyadic scales for MS-SSIM based kinds
    """

    def __init__(self, kind: str, mix_alpha: float=DEFAULT_MIX_ALPHA, msssim_scales: int=len(MSSSIM_WEIGHTS)):
        if kind not in LOSS_KINDS:
            raise InvalidParameter("Unknown loss kind {}, choose from {}".format(kind, ", ".join(LOSS_KINDS)))
        mix_alpha = float(mix_alpha)
        if not 0 <= mix_alpha <= 1:
            raise InvalidParameter("mix_alpha must be within [0, 1], got {}".format(mix_alpha))
        if not 1 <= msssim_scales <= len(MSSSIM_WEIGHTS):
            raise InvalidParameter("msssim_scales must be within 1..{}, got {}".format(len(MSSSIM_WEIGHTS), msssim_scales))
        self.kind = kind
        self.mix_alpha = mix_alpha
        self.msssim_scales = int(msssim_scales)

    def is_combined(self) -> bool:
        return self.kind in COMBINED_KINDS

    def __repr__(self):
        return "<LossSpec {} mix_alpha={}>".format(self.kind, self.mix_alpha)


class LossResult:
    """Loss value and its gradient with respect to the reconstruction."""

    def __init__(self, value: float, gradient: np.ndarray):
        self.value = float(value)
        self.gradient = gradient

    def __repr__(self):
        return "<LossResult {}>".format(self.value)


def _check_pair(g, r) -> Tuple[np.ndarray, np.ndarray]:
    g = as_image(g, "reconstruction")
    r = as_image(r, "ground truth")
    if g.shape != r.shape:
        raise ShapeMismatch("Reconstruction is {} but ground truth is {}".format(g.shape, r.shape))
    return g, r


def loss_l1(g, r) -> LossResult:
    """Mean absolute difference. The subgradient at ties is 0."""
    g, r = _check_pair(g, r)
    diff = g - r
    n = diff.size
    return LossResult(np.abs(diff).sum() / n, np.sign(diff) / n)


def loss_l2(g, r) -> LossResult:
    """Mean squared difference."""
    g, r = _check_pair(g, r)
    diff = g - r
    n = diff.size
    return LossResult((diff ** 2).sum() / n, 2 * diff / n)


def gaussian_window(size: int=SSIM_WINDOW, sigma: float=SSIM_SIGMA) -> np.ndarray:
    """Normalised 2D Gaussian weights."""
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-x ** 2 / (2 * sigma ** 2))
    g /= g.sum()
    return np.outer(g, g)


_WINDOW = gaussian_window()[:, :, np.newaxis]


def _filter(x: np.ndarray) -> np.ndarray:
    """Windowed local mean over the fully covered region only."""
    return fftconvolve(x, _WINDOW, mode="valid", axes=(0, 1))


def _filter_adjoint(y: np.ndarray) -> np.ndarray:
    # Window is symmetric, so the adjoint of the valid correlation is a full convolution
    return fftconvolve(y, _WINDOW, mode="full", axes=(0, 1))


class SsimTerms:
    """Local statistics of an image pair and the SSIM pieces built from them.

    Maps cover the fully windowed region, ``(H - 10) x (W - 10) x C``.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray, data_range: float=DATA_RANGE):
        if x.shape[0] < SSIM_WINDOW or x.shape[1] < SSIM_WINDOW:
            raise InvalidInput("Image {}x{} is smaller than the {}x{} SSIM window".format(x.shape[1], x.shape[0], SSIM_WINDOW, SSIM_WINDOW))
        c1 = (SSIM_K1 * data_range) ** 2
        c2 = (SSIM_K2 * data_range) ** 2
        self.x = x
        self.y = y
        self.mu_x = _filter(x)
        self.mu_y = _filter(y)
        sigma_xx = _filter(x * x) - self.mu_x ** 2
        sigma_yy = _filter(y * y) - self.mu_y ** 2
        sigma_xy = _filter(x * y) - self.mu_x * self.mu_y
        self.a1 = 2 * self.mu_x * self.mu_y + c1
        self.a2 = 2 * sigma_xy + c2
        self.b1 = self.mu_x ** 2 + self.mu_y ** 2 + c1
        self.b2 = sigma_xx + sigma_yy + c2

    def ssim_map(self) -> np.ndarray:
        return (self.a1 * self.a2) / (self.b1 * self.b2)

    def cs_map(self) -> np.ndarray:
        """Contrast-structure part without the luminance term."""
        return self.a2 / self.b2

    def backward(self, d_ssim: Optional[np.ndarray]=None, d_cs: Optional[np.ndarray]=None) -> np.ndarray:
        """Pull map-shaped upstream gradients back to ``x``."""
        zeros = np.zeros_like(self.a1)
        d_a1, d_a2, d_b1, d_b2 = zeros, zeros.copy(), zeros.copy(), zeros.copy()

        if d_ssim is not None:
            s = self.ssim_map()
            d_a1 = d_ssim * self.a2 / (self.b1 * self.b2)
            d_a2 = d_a2 + d_ssim * self.a1 / (self.b1 * self.b2)
            d_b1 = d_b1 - d_ssim * s / self.b1
            d_b2 = d_b2 - d_ssim * s / self.b2

        if d_cs is not None:
            cs = self.cs_map()
            d_a2 = d_a2 + d_cs / self.b2
            d_b2 = d_b2 - d_cs * cs / self.b2

        d_mu_x = 2 * self.mu_y * (d_a1 - d_a2) + 2 * self.mu_x * (d_b1 - d_b2)
        d_xy = 2 * d_a2
        d_xx = d_b2

        return _filter_adjoint(d_mu_x) + self.y * _filter_adjoint(d_xy) + 2 * self.x * _filter_adjoint(d_xx)


def loss_ssim(g, r) -> LossResult:
    """Mean of ``1 - SSIM`` over all windowed positions and channels."""
    g, r = _check_pair(g, r)
    terms = SsimTerms(g, r)
    s = terms.ssim_map()
    m = s.size
    grad = terms.backward(d_ssim=np.full_like(s, -1.0 / m))
    return LossResult(np.mean(1 - s), grad)


def max_msssim_scales(shape) -> int:
    """How many dyadic scales fit before the window no longer fits."""
    h, w = shape[0], shape[1]
    scales = 0
    while h >= SSIM_WINDOW and w >= SSIM_WINDOW and scales < len(MSSSIM_WEIGHTS):
        scales += 1
        h, w = h // 2, w // 2
    return scales


def msssim_weights(scales: int) -> np.ndarray:
    """The first ``scales`` standard weights, renormalised to sum 1."""
    w = np.asarray(MSSSIM_WEIGHTS[:scales], dtype=np.float64)
    return w / w.sum()


def downsample(x: np.ndarray) -> np.ndarray:
    """2 x 2 mean pooling. An odd last row or column is dropped."""
    h, w = (x.shape[0] // 2) * 2, (x.shape[1] // 2) * 2
    x = x[:h, :w]
    return (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2]) / 4


def _downsample_adjoint(y: np.ndarray, shape) -> np.ndarray:
    out = np.zeros(shape, dtype=np.float64)
    up = np.repeat(np.repeat(y, 2, axis=0), 2, axis=1) / 4
    out[:up.shape[0], :up.shape[1]] = up
    return out


def _msssim(g: np.ndarray, r: np.ndarray, scales: int) -> Tuple[np.ndarray, np.ndarray]:
    """Per channel MS-SSIM values and the gradient of their channel mean."""
    available = max_msssim_scales(g.shape)
    if available < scales:
        min_size = SSIM_WINDOW * 2 ** (scales - 1)
        raise InvalidInput("MS-SSIM with {} scales needs images of at least {}x{}, got {}x{}".format(scales, min_size, min_size, g.shape[1], g.shape[0]))

    weights = msssim_weights(scales)
    channels = g.shape[2]

    pyramid = []
    x, y = g, r
    for j in range(scales):
        terms = SsimTerms(x, y)
        last = j == scales - 1
        m = terms.ssim_map() if last else terms.cs_map()
        means = m.reshape(-1, channels).mean(axis=0)
        clipped = means <= _MSSSIM_FLOOR
        means = np.where(clipped, _MSSSIM_FLOOR, means)
        pyramid.append((terms, last, means, clipped, m.shape))
        x, y = downsample(x), downsample(y)

    values = np.prod([means ** weights[j] for j, (_, _, means, _, _) in enumerate(pyramid)], axis=0)

    # Walk from the coarsest scale back to the input resolution
    grad = None
    for j in reversed(range(scales)):
        terms, last, means, clipped, map_shape = pyramid[j]
        per_channel = -(1.0 / channels) * values * weights[j] / means
        per_channel = np.where(clipped, 0.0, per_channel)
        pixels = map_shape[0] * map_shape[1]
        upstream = np.broadcast_to(per_channel / pixels, map_shape)
        if last:
            direct = terms.backward(d_ssim=upstream)
        else:
            direct = terms.backward(d_cs=upstream)
        if grad is not None:
            direct = direct + _downsample_adjoint(grad, terms.x.shape)
        grad = direct

    return values, grad


def loss_msssim(g, r, scales: int=len(MSSSIM_WEIGHTS)) -> LossResult:
    """``1 - MS-SSIM`` over ``scales`` dyadic scales, averaged over channels."""
    g, r = _check_pair(g, r)
    values, grad = _msssim(g, r, scales)
    return LossResult(1 - values.mean(), grad)


def msssim_index(a, b, scales: int=len(MSSSIM_WEIGHTS)) -> float:
    a, b = _check_pair(a, b)
    values, _ = _msssim(a, b, scales)
    return float(values.mean())


def loss_gdl(g, r) -> LossResult:
    """Gradient difference loss with forward differences along both axes.

    Differences that would need a pixel outside the image are not counted.
    """
    g, r = _check_pair(g, r)
    if g.shape[0] < 2 or g.shape[1] < 2:
        raise InvalidInput("Gradient difference loss needs at least 2x2 images, got {}x{}".format(g.shape[1], g.shape[0]))
    dv = np.diff(g, axis=0) - np.diff(r, axis=0)
    dh = np.diff(g, axis=1) - np.diff(r, axis=1)
    n = dv.size + dh.size
    value = (np.abs(dv).sum() + np.abs(dh).sum()) / n

    sv = np.sign(dv) / n
    sh = np.sign(dh) / n
    grad = np.zeros_like(g)
    grad[1:, :] += sv
    grad[:-1, :] -= sv
    grad[:, 1:] += sh
    grad[:, :-1] -= sh
    return LossResult(value, grad)


def _base_loss(g, r, kind: str, spec: LossSpec) -> LossResult:
    if kind == "l1":
        return loss_l1(g, r)
    elif kind == "l2":
        return loss_l2(g, r)
    elif kind == "ssim":
        return loss_ssim(g, r)
    elif kind == "msssim":
        return loss_msssim(g, r, scales=spec.msssim_scales)
    elif kind == "gdl":
        return loss_gdl(g, r)
    raise InvalidParameter("Not a base loss kind: {}".format(kind))


def loss_combine(g, r, spec: LossSpec) -> LossResult:
    """``mix_alpha * base + (1 - mix_alpha) * L1`` for the combined kinds."""
    if not spec.is_combined():
        raise InvalidParameter("{} is not a combined loss kind".format(spec.kind))
    base = _base_loss(g, r, COMBINED_KINDS[spec.kind], spec)
    l1 = loss_l1(g, r)
    a = spec.mix_alpha
    return LossResult(
        a * base.value + (1 - a) * l1.value,
        a * base.gradient + (1 - a) * l1.gradient)


def evaluate_loss(g, r, spec: LossSpec) -> LossResult:
    if spec.is_combined():
        return loss_combine(g, r, spec)
    return _base_loss(g, r, spec.kind, spec)


def _smooth_entries(kind: str, g: np.ndarray, r: np.ndarray, margin: float) -> np.ndarray:
    """Entries far enough from the kinks of absolute value terms."""
    ok = np.ones(g.shape, dtype=bool)
    if kind.startswith("l1"):
        ok &= np.abs(g - r) > margin
    if kind.endswith("gdl"):
        dv = np.abs(np.diff(g, axis=0) - np.diff(r, axis=0)) > margin
        dh = np.abs(np.diff(g, axis=1) - np.diff(r, axis=1)) > margin
        ok[1:, :] &= dv
        ok[:-1, :] &= dv
        ok[:, 1:] &= dh
        ok[:, :-1] &= dh
    return ok


def check_gradient(spec: LossSpec, g, r, step: float=1e-6, samples: int=64, floor: Optional[float]=None, seed: int=0, margin: float=1e-3) -> float:
    """Compare the analytic gradient against central differences.

    :param step: Finite difference step
    :param samples: How many entries to check, picked at random among the smooth ones
    :param floor: Smallest denominator of the relative error. Defaults to 1e-3 of the largest numeric gradient checked.
    :param margin: Entries closer than this to a kink of an absolute value are skipped
    :return: Largest relative error, 0 if no entry qualifies
    """
    if step <= 0:
        raise InvalidParameter("step must be positive, got {}".format(step))
    g, r = _check_pair(g, r)
    analytic = evaluate_loss(g, r, spec).gradient

    candidates = np.flatnonzero(_smooth_entries(spec.kind, g, r, max(margin, 2 * step)))
    if candidates.size == 0:
        return 0.0

    rng = np.random.default_rng(seed)
    picked = rng.choice(candidates, size=min(samples, candidates.size), replace=False)

    numeric = np.empty(picked.size)
    shifted = g.copy()
    for i, idx in enumerate(picked):
        original = shifted.flat[idx]
        shifted.flat[idx] = original + step
        plus = evaluate_loss(shifted, r, spec).value
        shifted.flat[idx] = original - step
        minus = evaluate_loss(shifted, r, spec).value
        shifted.flat[idx] = original
        numeric[i] = (plus - minus) / (2 * step)

    if floor is None:
        floor = max(1e-3 * np.abs(numeric).max(), 1e-15)

    errors = np.abs(analytic.flat[picked] - numeric) / np.maximum(np.abs(numeric), floor)
    return float(errors.max())
