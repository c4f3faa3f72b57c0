"""Recover clear scene radiance from underwater images.

Model based methods invert the improved imaging model when the water
parameters and ranges are known. Classical baselines work from the image alone.
"""
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage

from uwsim.exceptions import DescentFailure, InvalidInput, InvalidParameter
from uwsim.imaging import WaterParams, as_depth, as_image, check_same_size, forward_sensitivity, synthesize_improved, transmission_map
from uwsim.losses import LossSpec, evaluate_loss


#: Dark channel prior constants
DCP_OMEGA = 0.95
DCP_PATCH = 15

#: Fraction of the brightest dark channel pixels averaged into the ambient light estimate
DCP_BRIGHTEST = 0.001

HIST_LEVELS = 256

#: Method names usable on the command line
METHODS = ("analytic", "graddesc", "udcp", "dcp", "he", "grayworld")

#: Methods needing ranges and water parameters
MODEL_BASED = ("analytic", "graddesc")

#: Loss kinds whose preconditioned gradient is already a Newton step
NEWTON_KINDS = ("l2",)


class InversionConfig:
    """Knobs of the model based inversions.

    :param transmission_floor: Transmission values below this are replaced by it before dividing
    :param max_iters: Gradient descent iteration cap
    :param step_size: Largest trial step, per pixel entry
    :param loss: Objective of gradient descent
    :param stop_tol: Stop when an accepted step improves the loss by less than this
    :param max_halvings: Trial step halvings before a direction is given up
    """

    def __init__(self, transmission_floor: float=0.05, max_iters: int=500, step_size: float=0.5, loss: Optional[LossSpec]=None, stop_tol: float=1e-8, max_halvings: int=10):
        if not 0 < transmission_floor < 1:
            raise InvalidParameter("transmission_floor must be within (0, 1), got {}".format(transmission_floor))
        if max_iters < 1:
            raise InvalidParameter("max_iters must be positive, got {}".format(max_iters))
        if step_size <= 0:
            raise InvalidParameter("step_size must be positive, got {}".format(step_size))
        if stop_tol <= 0:
            raise InvalidParameter("stop_tol must be positive, got {}".format(stop_tol))
        self.transmission_floor = transmission_floor
        self.max_iters = int(max_iters)
        self.step_size = step_size
        self.loss = loss or LossSpec("l2")
        self.stop_tol = stop_tol
        self.max_halvings = int(max_halvings)


class InversionResult:
    """Restored image with diagnostics.

    :param image: Restored image clamped to [0, 1]
    :param raw: The same before clamping
    :param floor_mask: H x W x 3, True where the transmission floor was substituted
    :param trace: Accepted loss values, starting with the initial loss (gradient descent only)
    :param stalled: Gradient descent stopped because no trial step lowered the loss
    """

    def __init__(self, image: np.ndarray, raw: np.ndarray, floor_mask: Optional[np.ndarray]=None, trace: Optional[List[float]]=None, stalled: bool=False):
        self.image = image
        self.raw = raw
        self.floor_mask = floor_mask
        self.trace = trace or []
        self.stalled = stalled

    @property
    def iterations(self) -> int:
        return max(len(self.trace) - 1, 0)


def _model_inputs(observed, depth, params: WaterParams) -> Tuple[np.ndarray, np.ndarray]:
    img = as_image(observed, "observed image")
    d = as_depth(depth)
    check_same_size(img, d)
    return img, d


def analytic_invert(observed, depth, params: WaterParams, cfg: Optional[InversionConfig]=None) -> InversionResult:
    """Solve the improved model for J pixel by pixel.

    ``J_c = (I_c - A_c T_c (1 - T')) / max(T_c, floor)``
    """
    cfg = cfg or InversionConfig()
    img, d = _model_inputs(observed, depth, params)
    t = transmission_map(d, params.beta)
    haze = 1 - transmission_map(d, params.alpha)
    floor_mask = t < cfg.transmission_floor
    raw = (img - params.ambient * t * haze) / np.maximum(t, cfg.transmission_floor)
    return InversionResult(np.clip(raw, 0, 1), raw, floor_mask)


def invert_by_gradient_descent(observed, depth, params: WaterParams, cfg: Optional[InversionConfig]=None) -> InversionResult:
    """Find J whose synthesized image matches the observation under ``cfg.loss``.

    Projected descent on [0, 1] starting from the observed image. The forward
    Jacobian is diagonal, so the loss gradient ``dL/dI * T`` is preconditioned by
    ``1 / max(T, floor)^2`` and scaled by the entry count. For L2 this is a
    Newton step at ``step_size`` 0.5. Other kinds scale the direction so that its
    largest entry is 1, which makes the step the largest change of any pixel.

    The gradient step is halved until the loss improves and doubled again, up to
    ``step_size``, after every accepted step. Kinds other than L2 also try a
    damped step along the model residual ``-(I - observed) / T`` and keep the
    better of the two. Only improving steps are accepted, so the trace never
    increases. If no step improves the loss the result is marked ``stalled``.
    """
    cfg = cfg or InversionConfig()
    img, d = _model_inputs(observed, depth, params)
    sensitivity = forward_sensitivity(d, params)
    guarded = np.maximum(sensitivity, cfg.transmission_floor)
    precondition = img.size / guarded ** 2
    normalized = cfg.loss.kind not in NEWTON_KINDS

    def objective(j):
        synthesized = synthesize_improved(j, d, params, clamp=False)
        result = evaluate_loss(synthesized, img, cfg.loss)
        if not np.isfinite(result.value) or not np.all(np.isfinite(result.gradient)):
            raise DescentFailure("Loss {} became non-finite".format(cfg.loss.kind), trace)
        return result

    def search(start, direction, step):
        for _ in range(cfg.max_halvings + 1):
            candidate = np.clip(start + step * direction, 0, 1)
            trial = objective(candidate)
            if trial.value < current.value:
                return candidate, trial, step
            step /= 2
        return None

    estimate = img.copy()
    trace = []
    current = objective(estimate)
    trace.append(current.value)
    step = cfg.step_size
    stalled = False

    for _ in range(cfg.max_iters):
        gradient = current.gradient * sensitivity
        if np.sqrt(np.sum(gradient ** 2)) < 1e-8:
            break

        direction = -gradient * precondition
        if normalized:
            direction = direction / np.abs(direction).max()
        accepted = search(estimate, direction, step)
        if accepted is not None:
            step = min(accepted[2] * 2, cfg.step_size)

        if normalized:
            residual = synthesize_improved(estimate, d, params, clamp=False) - img
            along_residual = search(estimate, -residual / guarded, cfg.step_size)
            if along_residual is not None and (accepted is None or along_residual[1].value < accepted[1].value):
                accepted = along_residual

        if accepted is None:
            stalled = True
            break

        improvement = current.value - accepted[1].value
        estimate, current = accepted[0], accepted[1]
        trace.append(current.value)
        if improvement < cfg.stop_tol:
            break

    return InversionResult(estimate, estimate.copy(), sensitivity < cfg.transmission_floor, trace, stalled)


def dark_channel(img: np.ndarray, patch: int, channels=(0, 1, 2)) -> np.ndarray:
    """Minimum over the given channels and over a square neighbourhood."""
    return ndimage.minimum_filter(img[:, :, list(channels)].min(axis=2), size=patch, mode="nearest")


def estimate_ambient(img: np.ndarray, dark: np.ndarray, fraction: float=DCP_BRIGHTEST) -> np.ndarray:
    """Mean colour of the pixels with the brightest dark channel."""
    count = max(int(dark.size * fraction), 1)
    flat_dark = dark.ravel()
    brightest = np.argsort(flat_dark, kind="stable")[-count:]
    return img.reshape(-1, 3)[brightest].mean(axis=0)


def _check_patch(patch: int):
    if patch < 1 or patch % 2 == 0:
        raise InvalidParameter("patch must be a positive odd number of pixels, got {}".format(patch))


def _estimate_transmission(img: np.ndarray, patch: int, floor: float, channels) -> Tuple[np.ndarray, np.ndarray]:
    _check_patch(patch)
    ambient = estimate_ambient(img, dark_channel(img, patch, channels))
    normalized = img / np.maximum(ambient, 1e-6)
    t = 1 - DCP_OMEGA * dark_channel(normalized, patch, channels)
    t = np.clip(t, floor, 1)
    return np.repeat(t[:, :, np.newaxis], 3, axis=2), ambient


def estimate_transmission_udcp(observed, patch: int=DCP_PATCH, floor: float=0.05) -> np.ndarray:
    """Transmission from the underwater dark channel prior (green and blue only).

    :return: H x W x 3 map, the same value in every channel, within [floor, 1]
    """
    img = as_image(observed, "observed image")
    t, _ = _estimate_transmission(img, patch, floor, channels=(1, 2))
    return t


def estimate_transmission_dcp(observed, patch: int=DCP_PATCH, floor: float=0.05) -> np.ndarray:
    """Transmission from the classic dark channel prior over all channels."""
    img = as_image(observed, "observed image")
    t, _ = _estimate_transmission(img, patch, floor, channels=(0, 1, 2))
    return t


def recover_with_transmission(observed, transmission: np.ndarray, ambient, floor: float=0.05) -> np.ndarray:
    """Invert ``I = J t + A (1 - t)`` given ``t`` and ``A``, clamped to [0, 1]."""
    img = as_image(observed, "observed image")
    ambient = np.asarray(ambient, dtype=np.float64)
    t = np.asarray(transmission, dtype=np.float64)
    if t.ndim == 2:
        t = t[:, :, np.newaxis]
    restored = (img - ambient) / np.maximum(t, floor) + ambient
    return np.clip(restored, 0, 1)


def restore_udcp(observed, patch: int=DCP_PATCH, floor: float=0.05) -> np.ndarray:
    img = as_image(observed, "observed image")
    t, ambient = _estimate_transmission(img, patch, floor, channels=(1, 2))
    return recover_with_transmission(img, t, ambient, floor)


def restore_dcp(observed, patch: int=DCP_PATCH, floor: float=0.05) -> np.ndarray:
    img = as_image(observed, "observed image")
    t, ambient = _estimate_transmission(img, patch, floor, channels=(0, 1, 2))
    return recover_with_transmission(img, t, ambient, floor)


def equalize_hist(observed) -> np.ndarray:
    """Per channel histogram equalization over 256 levels.

    A channel holding a single level is returned unchanged.
    """
    img = as_image(observed, "observed image")
    levels = np.clip(np.rint(img * (HIST_LEVELS - 1)), 0, HIST_LEVELS - 1).astype(np.intp)
    out = np.empty_like(img)
    for c in range(3):
        channel = levels[:, :, c]
        cdf = np.cumsum(np.bincount(channel.ravel(), minlength=HIST_LEVELS))
        cdf_min = cdf[cdf > 0][0]
        total = channel.size
        if total == cdf_min:
            out[:, :, c] = img[:, :, c]
            continue
        lut = np.rint((cdf - cdf_min) / (total - cdf_min) * (HIST_LEVELS - 1))
        out[:, :, c] = lut[channel] / (HIST_LEVELS - 1)
    return np.clip(out, 0, 1)


def gray_world_gains(observed) -> np.ndarray:
    img = as_image(observed, "observed image")
    means = img.reshape(-1, 3).mean(axis=0)
    if np.any(means == 0):
        raise InvalidInput("Gray world balance needs non-zero channel means, got {}".format(means.tolist()))
    return means.mean() / means


def gray_world_balance(observed) -> np.ndarray:
    """Scale channels so that their means equal the overall mean."""
    img = as_image(observed, "observed image")
    return np.clip(img * gray_world_gains(img), 0, 1)


def restore(method: str, observed, depth=None, params: Optional[WaterParams]=None, cfg: Optional[InversionConfig]=None) -> np.ndarray:
    """Run a restoration method by its command line name."""
    if method in MODEL_BASED and (depth is None or params is None):
        raise InvalidInput("Method {} needs a depth map and water parameters".format(method))

    cfg = cfg or InversionConfig()
    if method == "analytic":
        return analytic_invert(observed, depth, params, cfg).image
    elif method == "graddesc":
        return invert_by_gradient_descent(observed, depth, params, cfg).image
    elif method == "udcp":
        return restore_udcp(observed, floor=cfg.transmission_floor)
    elif method == "dcp":
        return restore_dcp(observed, floor=cfg.transmission_floor)
    elif method == "he":
        return equalize_hist(observed)
    elif method == "grayworld":
        return gray_world_balance(observed)
    raise InvalidParameter("Unknown restoration method {}, choose from {}".format(method, ", ".join(METHODS)))
