"""Quality measures."""
import math

import numpy as np
import pytest

from uwsim.exceptions import InvalidInput, ShapeMismatch
from uwsim.losses import loss_l2, loss_ssim
from uwsim.metrics import PSNR_IDENTICAL, UIQM_WEIGHTS, assess_image, eme, mse, plip_add, plip_sub, psnr, psnr_from_mse, ssim_index, trimmed_mean, uicm, uiconm, uiqm, uiqm_combine, uism


def gray(value, size=32):
    return np.full((size, size, 3), value, dtype=np.float64)


def test_mse_values(rng):
    a = rng.uniform(0.2, 0.8, size=(8, 8, 3))
    assert mse(a, a) == 0
    assert mse(a, a + 0.1) == pytest.approx(0.01)
    b = rng.uniform(size=a.shape)
    assert mse(a, b) == pytest.approx(loss_l2(a, b).value, rel=1e-12)


def test_psnr_values():
    assert psnr_from_mse(0.01) == pytest.approx(20.0)
    assert psnr_from_mse(0.002) == pytest.approx(26.99, abs=0.01)
    assert psnr_from_mse(0.01, max_value=255) == pytest.approx(20.0 + 20 * math.log10(255))
    a = gray(0.5, 8)
    assert psnr(a, a) == PSNR_IDENTICAL
    assert psnr(a, a + 0.1) == pytest.approx(20.0)


def test_psnr_mse_relation(rng):
    a = rng.uniform(size=(16, 16, 3))
    b = np.clip(a + rng.normal(0, 0.05, size=a.shape), 0, 1)
    assert psnr(a, b) == pytest.approx(10 * math.log10(1 / mse(a, b)))


def test_ssim_identity_and_noise(rng):
    a = rng.uniform(size=(64, 64, 3))
    assert ssim_index(a, a) == pytest.approx(1.0)
    for _ in range(3):
        b = rng.uniform(size=a.shape)
        assert abs(ssim_index(a, b)) < 0.1


def test_ssim_agrees_with_loss(rng):
    a = rng.uniform(size=(32, 32, 3))
    b = np.clip(a + rng.normal(0, 0.1, size=a.shape), 0, 1)
    assert ssim_index(a, b) == pytest.approx(1 - loss_ssim(a, b).value, abs=1e-12)


def test_full_reference_errors():
    with pytest.raises(ShapeMismatch):
        mse(gray(0.1, 8), gray(0.1, 9))
    with pytest.raises(InvalidInput):
        ssim_index(gray(0.1, 8), gray(0.1, 8))


def test_trimmed_mean():
    assert trimmed_mean(np.arange(10.0)) == pytest.approx(4.5)
    assert trimmed_mean(np.array([-100.0, 1, 1, 1, 1, 1, 1, 1, 1, 100.0])) == pytest.approx(1.0)
    # Trimming everything falls back to the plain mean
    assert trimmed_mean(np.array([1.0, 3.0]), trim=(0.5, 0.5)) == pytest.approx(2.0)


def test_uicm_achromatic_is_zero(rng):
    assert uicm(gray(0.4)) == pytest.approx(0.0)
    v = rng.uniform(size=(16, 16, 1))
    assert uicm(np.repeat(v, 3, axis=2)) == pytest.approx(0.0)


def test_uicm_scales_with_opponent_offset():

    def opponent(delta):
        img = np.empty((16, 16, 3))
        img[:, :, 1] = 0.4
        img[:, :, 0] = 0.4 + delta
        img[:, :, 2] = 0.4 + delta / 2
        return img

    first = uicm(opponent(0.05))
    second = uicm(opponent(0.10))
    assert first == pytest.approx(-0.0268 * 255 * 0.05)
    assert second == pytest.approx(2 * first)


def test_uicm_rejects_gray_layout():
    with pytest.raises(InvalidInput):
        uicm(np.zeros((8, 8)))


def test_eme_flat_blocks():
    assert eme(np.full((16, 16), 42.0)) == 0
    x = np.full((8, 8), 10.0)
    x[0, 0] = 100.0
    assert eme(x) == pytest.approx(2 * math.log(10))


def test_eme_skips_zero_entries():
    x = np.full((8, 16), 10.0)
    x[0, 0] = 0.0
    x[0, 8] = 0.0
    x[0, 9] = 100.0
    # Left block: positive entries are all 10. Right block: 100 over 10 gives 2 ln 10
    assert eme(x) == pytest.approx(math.log(10))


def test_uism_constant_is_zero():
    assert uism(gray(0.3)) == 0


def test_uism_grows_with_step_height():

    def step(height):
        img = gray(0.2)
        img[:, 12:, :] += height
        return img

    values = [uism(step(h)) for h in (0.1, 0.3, 0.6)]
    assert values[0] > 0
    assert values[0] < values[1] < values[2]


def quantized(img):
    return np.round(img * 255) / 255


def test_uism_quantized_ramp_stays_small():
    # Shallow 8 bit ramp: equal runs of levels leave flat stretches in every block
    ramp = quantized(np.linspace(0.3, 0.5, 256))
    img = np.repeat(np.tile(ramp, (64, 1))[:, :, np.newaxis], 3, axis=2)
    assert 0 <= uism(img) < 0.5
    assert uiqm(img) < 1


def test_uism_textured_image_range(rng, make_image):
    img = make_image(64, 0.25, 0.75) + rng.normal(0, 0.08, size=(64, 64, 3))
    img = quantized(np.clip(img, 0, 1))
    value = uism(img)
    assert 3.5 < value < 10


def test_uism_rejects_tiny_images():
    with pytest.raises(InvalidInput):
        uism(gray(0.3, 4))


def test_uiconm_constant_is_zero():
    assert uiconm(gray(0.7)) == 0


def _checkerboard(lo, hi, size=16, cell=1):
    board = ((np.indices((size, size)) // cell).sum(axis=0) % 2).astype(np.float64)
    values = lo + (hi - lo) * board
    return np.repeat(values[:, :, np.newaxis], 3, axis=2)


def test_uiconm_checkerboard_is_maximal():
    assert uiconm(_checkerboard(0.0, 1.0)) == pytest.approx(1.0)
    # One period per 8x8 block, every block spans both levels
    assert uiconm(_checkerboard(0.0, 1.0, cell=4)) == pytest.approx(1.0)
    # Cells filling whole blocks leave every block flat
    assert uiconm(_checkerboard(0.0, 1.0, cell=8)) == 0


def test_uiconm_grows_with_block_contrast():
    hi = 0.9
    lows = np.linspace(0.85, 0.0, 18)
    values = [uiconm(_checkerboard(lo, hi)) for lo in lows]
    for value, lo in zip(values, lows):
        a, b = hi * 255, lo * 255
        q = plip_sub(a, b) / plip_add(a, b)
        assert value == pytest.approx(q * (1 - math.log(q)))
    assert np.all(np.diff(values) > 0)
    assert values[-1] == pytest.approx(1.0)


def test_uiconm_bounded(rng, make_image):
    for _ in range(10):
        img = np.clip(make_image(32) + rng.normal(0, 0.2, size=(32, 32, 3)), 0, 1)
        assert 0 <= uiconm(img) <= 1


def test_uiqm_combine_reference_rows():
    assert uiqm_combine(-0.332, 7.151, 0.593) == pytest.approx(4.22, abs=0.01)
    assert uiqm_combine(-0.273, 7.169, 0.506) == pytest.approx(3.920, abs=0.01)
    assert uiqm_combine(0, 0, 0) == 0


def test_uiqm_combine_linear():
    a, b, c = 0.7, 3.2, 0.4
    assert uiqm_combine(3 * a, 3 * b, 3 * c) == pytest.approx(3 * uiqm_combine(a, b, c), abs=1e-12)
    assert uiqm_combine(1, 0, 0, weights=(2, 3, 4)) == 2


def test_assess_image_reports(make_image):
    img = make_image(32)
    report = assess_image(img)
    assert report.mse is None and report.psnr is None and report.ssim is None
    assert report.uiqm == pytest.approx(uiqm(img), abs=1e-9)
    assert report.uiqm == pytest.approx(
        UIQM_WEIGHTS[0] * report.uicm + UIQM_WEIGHTS[1] * report.uism + UIQM_WEIGHTS[2] * report.uiconm, abs=1e-9)

    full = assess_image(img, reference=img, metrics=["mse", "psnr", "ssim"])
    assert full.as_dict() == {
        "uicm": None, "uism": None, "uiconm": None, "uiqm": None,
        "mse": 0.0, "psnr": PSNR_IDENTICAL, "ssim": pytest.approx(1.0),
    }
