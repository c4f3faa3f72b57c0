"""Image quality measures.

Full-reference: MSE, PSNR and SSIM against a clear image.

Non-reference: the underwater colourfulness (UICM), sharpness (UISM) and
contrast (UIConM) measures and their weighted sum UIQM. The non-reference
components are evaluated on the 0..255 intensity scale, which is the scale
their weights were fitted on.
"""
import math
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
from scipy import ndimage

from uwsim.exceptions import InvalidInput, ShapeMismatch
from uwsim.imaging import as_image
from uwsim.losses import SsimTerms


#: Default (c1, c2, c3) weights of UICM, UISM and UIConM in UIQM
UIQM_WEIGHTS = (0.0282, 0.2953, 3.5753)

#: Fraction of sorted samples dropped from each tail in the trimmed mean
UICM_TRIM = (0.1, 0.1)

#: Weights of the two UICM statistics (trimmed mean magnitude, spread)
UICM_MEAN_WEIGHT = -0.0268
UICM_SPREAD_WEIGHT = 0.1586

#: Per channel weights of UISM, the luma coefficients
UISM_CHANNEL_WEIGHTS = (0.299, 0.587, 0.114)

#: Square block edge for EME / logAMEE
BLOCK_SIZE = 8

#: Guard for logarithms
LOG_EPS = 1e-7

#: Parameterized logarithmic image processing constants for the 0..255 scale
PLIP_GAMMA = 1026.0
PLIP_K = 1026.0

#: Reported PSNR of identical images
PSNR_IDENTICAL = math.inf

#: Metric names usable on the command line, in column order
METRIC_NAMES = ("uicm", "uism", "uiconm", "uiqm", "mse", "psnr", "ssim")

#: Metrics that need a reference image
FULL_REFERENCE = ("mse", "psnr", "ssim")


class QualityReport:
    """Metric values of one image. Metrics that were not computed are ``None``."""

    def __init__(self, uicm=None, uism=None, uiconm=None, uiqm=None, mse=None, psnr=None, ssim=None):
        self.uicm = uicm
        self.uism = uism
        self.uiconm = uiconm
        self.uiqm = uiqm
        self.mse = mse
        self.psnr = psnr
        self.ssim = ssim

    def as_dict(self) -> Dict[str, Optional[float]]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def _check_pair(a, b) -> Tuple[np.ndarray, np.ndarray]:
    a = as_image(a)
    b = as_image(b, "reference")
    if a.shape != b.shape:
        raise ShapeMismatch("Image is {} but reference is {}".format(a.shape, b.shape))
    return a, b


def mse(a, b) -> float:
    """Mean squared error over all pixels and channels."""
    a, b = _check_pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr_from_mse(value: float, max_value: float=1.0) -> float:
    if value == 0:
        return PSNR_IDENTICAL
    return float(10 * np.log10(max_value ** 2 / value))


def psnr(a, b, max_value: float=1.0) -> float:
    """Peak signal to noise ratio in dB, :py:data:`PSNR_IDENTICAL` for identical images."""
    return psnr_from_mse(mse(a, b), max_value)


def ssim_index(a, b) -> float:
    """Mean windowed SSIM, channels averaged.

    Same window and constants as :py:func:`uwsim.losses.loss_ssim`.
    """
    a, b = _check_pair(a, b)
    return float(np.mean(SsimTerms(a, b).ssim_map()))


def _to_255(img) -> np.ndarray:
    img = as_image(img)
    return img * 255.0


def trimmed_mean(x: np.ndarray, trim=UICM_TRIM) -> float:
    """Asymmetric alpha-trimmed mean of a flat sample."""
    x = np.sort(x, axis=None)
    k = x.size
    low = int(math.ceil(trim[0] * k))
    high = int(math.floor(trim[1] * k))
    kept = x[low:k - high]
    if kept.size == 0:
        return float(np.mean(x))
    return float(np.mean(kept))


def uicm(img) -> float:
    """Colourfulness from the red-green and yellow-blue opponent channels."""
    x = _to_255(img)
    r, g, b = x[:, :, 0].ravel(), x[:, :, 1].ravel(), x[:, :, 2].ravel()
    rg = r - g
    yb = (r + g) / 2 - b

    mu_rg = trimmed_mean(rg)
    mu_yb = trimmed_mean(yb)
    var_rg = np.mean((rg - mu_rg) ** 2)
    var_yb = np.mean((yb - mu_yb) ** 2)

    return float(UICM_MEAN_WEIGHT * math.sqrt(mu_rg ** 2 + mu_yb ** 2) + UICM_SPREAD_WEIGHT * math.sqrt(var_rg + var_yb))


def _blocks(x: np.ndarray, block: int) -> np.ndarray:
    """Split a 2D array into ``(k2, k1, block, block)`` blocks, dropping partial edge blocks."""
    k2, k1 = x.shape[0] // block, x.shape[1] // block
    if k1 == 0 or k2 == 0:
        raise InvalidInput("Image {}x{} is smaller than one {}x{} block".format(x.shape[1], x.shape[0], block, block))
    x = x[:k2 * block, :k1 * block]
    return x.reshape(k2, block, k1, block).swapaxes(1, 2)


def eme(x: np.ndarray, block: int=BLOCK_SIZE) -> float:
    """Enhancement measure: scaled mean of ``log(max / min)`` over blocks.

    The minimum is taken over the positive entries, so pixels without any edge
    response are left out. Blocks with fewer than two distinct positive values
    contribute 0.
    """
    blocks = _blocks(x, block)
    hi = blocks.max(axis=(2, 3))
    lo = np.where(blocks > 0, blocks, np.inf).min(axis=(2, 3))
    valid = np.isfinite(lo) & (hi > lo)
    ratio = np.where(valid, np.log(np.where(valid, hi, 1.0) / np.where(valid, lo, 1.0)), 0.0)
    return float(2.0 / hi.size * ratio.sum())


def sobel_magnitude(channel: np.ndarray) -> np.ndarray:
    """Sobel gradient magnitude rescaled so that the strongest edge is 255."""
    mag = np.hypot(ndimage.sobel(channel, axis=0), ndimage.sobel(channel, axis=1))
    peak = mag.max()
    if peak == 0:
        return mag
    return mag * (255.0 / peak)


def uism(img, block: int=BLOCK_SIZE) -> float:
    """Sharpness: EME of each channel's edge map weighted into one number."""
    x = _to_255(img)
    total = 0.0
    for c, weight in enumerate(UISM_CHANNEL_WEIGHTS):
        channel = x[:, :, c]
        edge_map = sobel_magnitude(channel) * channel
        total += weight * eme(edge_map, block)
    return float(total)


def plip_add(a, b, gamma=PLIP_GAMMA):
    return a + b - a * b / gamma


def plip_sub(a, b, k=PLIP_K):
    return k * (a - b) / (k - b)


def uiconm(img, block: int=BLOCK_SIZE) -> float:
    """Contrast: logAMEE of the intensity image.

    Per block the PLIP contrast ratio ``q = (max - min) / (max + min)`` feeds
    the term ``q (1 - log q)``, which grows with ``q`` from 0 for a flat block
    to 1 for a block spanning black to white. The result lies in [0, 1].
    """
    intensity = _to_255(img).mean(axis=2)
    blocks = _blocks(intensity, block)
    hi = blocks.max(axis=(2, 3))
    lo = blocks.min(axis=(2, 3))
    top = plip_sub(hi, lo)
    bottom = plip_add(hi, lo)
    valid = (top > 0) & (bottom > 0)
    q = np.where(valid, top / np.where(valid, bottom, 1.0), 1.0)
    terms = np.where(valid, q * (1 - np.log(np.maximum(q, LOG_EPS))), 0.0)
    return float(terms.sum() / hi.size)


def uiqm_combine(uicm_value: float, uism_value: float, uiconm_value: float, weights=UIQM_WEIGHTS) -> float:
    c1, c2, c3 = weights
    return c1 * uicm_value + c2 * uism_value + c3 * uiconm_value


def uiqm(img, weights=UIQM_WEIGHTS) -> float:
    return uiqm_combine(uicm(img), uism(img), uiconm(img), weights)


def assess_image(img, reference=None, metrics: Iterable[str]=METRIC_NAMES, weights=UIQM_WEIGHTS, max_value: float=1.0) -> QualityReport:
    """Compute the requested metrics of an image.

    Full-reference metrics are skipped when no reference is given.
    UIQM always brings its three components along.
    """
    metrics = set(metrics)
    report = QualityReport()
    img = as_image(img)

    if metrics & {"uicm", "uism", "uiconm", "uiqm"}:
        report.uicm = uicm(img)
        report.uism = uism(img)
        report.uiconm = uiconm(img)
        report.uiqm = uiqm_combine(report.uicm, report.uism, report.uiconm, weights)

    if reference is not None and metrics & set(FULL_REFERENCE):
        report.mse = mse(img, reference)
        report.psnr = psnr_from_mse(report.mse, max_value)
        if "ssim" in metrics:
            report.ssim = ssim_index(img, reference)

    return report
