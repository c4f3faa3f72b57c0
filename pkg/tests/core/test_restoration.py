"""Model inversion and classical baselines."""
import numpy as np
import pytest

from uwsim.exceptions import InvalidInput, InvalidParameter
from uwsim.imaging import WaterParams, synthesize_improved, water_preset
from uwsim.losses import LOSS_KINDS, LossSpec, loss_l1, loss_l2, max_msssim_scales
from uwsim.metrics import psnr, ssim_index
from uwsim.restoration import METHODS, InversionConfig, analytic_invert, equalize_hist, estimate_transmission_dcp, estimate_transmission_udcp, gray_world_balance, gray_world_gains, invert_by_gradient_descent, recover_with_transmission, restore, restore_udcp


COASTAL = water_preset("coastal-green").nominal()


def random_scene(seed, size=64, low=0.0, high=1.0, near=0.2, far=2.5):
    """Pixel noise scene, ranges and water with every transmission above 0.05."""
    rng = np.random.default_rng(seed)
    j = rng.uniform(low, high, size=(size, size, 3))
    d = rng.uniform(near, far, size=(size, size))
    params = WaterParams(rng.uniform(0.05, 1.0, size=3), rng.uniform(0.05, 0.95, size=3), alpha=rng.uniform(0.5, 1.5))
    return j, d, params


@pytest.mark.parametrize("seed", range(100))
def test_analytic_round_trip(seed):
    j, d, params = random_scene(seed)
    observed = synthesize_improved(j, d, params, clamp=False)
    result = analytic_invert(observed, d, params)
    assert not result.floor_mask.any()
    assert np.max(np.abs(result.raw - j)) < 1e-6


def test_analytic_zero_depth_is_identity(make_image):
    observed = make_image(16)
    result = analytic_invert(observed, np.zeros((16, 16)), COASTAL)
    assert np.array_equal(result.image, observed)


def test_analytic_flags_floor(make_image):
    observed = make_image(16)
    params = WaterParams(50.0, 0.5, alpha=1.0)
    result = analytic_invert(observed, np.full((16, 16), 1.0), params)
    assert result.floor_mask.all()
    assert result.image.min() >= 0 and result.image.max() <= 1


@pytest.mark.parametrize("seed", range(20))
def test_gradient_descent_recovers_scene(seed):
    j, d, params = random_scene(seed, low=0.1, high=0.6, near=0.5, far=1.5)
    observed = synthesize_improved(j, d, params, clamp=False)
    result = invert_by_gradient_descent(observed, d, params)
    assert psnr(result.image, j) >= 30
    assert result.trace[-1] <= 1e-6
    assert result.trace[-1] <= result.trace[0]
    assert not result.stalled


def test_gradient_descent_stationary_start(make_image):
    # Without water the observation is already the optimum
    observed = make_image(16)
    result = invert_by_gradient_descent(observed, np.zeros((16, 16)), COASTAL)
    assert result.iterations == 0
    assert result.trace == [0.0]
    assert np.array_equal(result.image, observed)


def test_gradient_descent_reports_stall():
    # Every channel would need J above 1 and the start already sits on that bound
    observed = np.ones((16, 16, 3))
    d = np.full((16, 16), 3.0)
    for kind in ("l2", "l1"):
        result = invert_by_gradient_descent(observed, d, COASTAL, InversionConfig(loss=LossSpec(kind)))
        assert result.stalled
        assert result.iterations == 0
        assert np.array_equal(result.image, observed)


def test_gradient_descent_trace_monotone(make_image, make_depth):
    j = make_image(32, 0.1, 0.6)
    d = make_depth(32, 0.5, 1.5)
    observed = synthesize_improved(j, d, COASTAL)
    cfg = InversionConfig(max_iters=30, loss=LossSpec("ssim"))
    result = invert_by_gradient_descent(observed, d, COASTAL, cfg)
    assert 1 <= result.iterations <= 30
    assert np.all(np.diff(result.trace) < 0)


@pytest.mark.parametrize("kind", LOSS_KINDS)
def test_every_loss_restores_coastal_scenes(kind, make_image, make_depth):
    spec = LossSpec(kind, msssim_scales=max_msssim_scales((64, 64)))
    for _ in range(3):
        j = make_image(64)
        d = make_depth(64, 0.5, 3.0)
        observed = synthesize_improved(j, d, COASTAL)
        result = invert_by_gradient_descent(observed, d, COASTAL, InversionConfig(loss=spec))
        assert ssim_index(result.image, j) >= 0.9
        assert result.trace[-1] < result.trace[0]
        assert not result.stalled


def test_combined_loss_trace_matches_components(make_image, make_depth):
    j = make_image(32, 0.1, 0.6)
    d = make_depth(32, 0.5, 1.5)
    observed = synthesize_improved(j, d, COASTAL)
    cfg = InversionConfig(max_iters=20, loss=LossSpec("l1l2", mix_alpha=0.8))
    result = invert_by_gradient_descent(observed, d, COASTAL, cfg)
    synthesized = synthesize_improved(result.image, d, COASTAL, clamp=False)
    expected = 0.8 * loss_l2(synthesized, observed).value + (1 - 0.8) * loss_l1(synthesized, observed).value
    assert result.trace[-1] == pytest.approx(expected, rel=1e-9, abs=1e-15)


def test_inversion_config_validation():
    with pytest.raises(InvalidParameter):
        InversionConfig(transmission_floor=0)
    with pytest.raises(InvalidParameter):
        InversionConfig(max_iters=0)
    with pytest.raises(InvalidParameter):
        InversionConfig(step_size=-1)
    assert InversionConfig().loss.kind == "l2"


def vivid(rng, size=32):
    """Colourful clear scene without any blue."""
    img = rng.uniform(0.2, 1.0, size=(size, size, 3))
    img[:, :, 2] = 0
    return img


def test_udcp_transmission_of_vivid_image(rng):
    img = vivid(rng)
    t = estimate_transmission_udcp(img)
    assert t.shape == img.shape
    assert t == pytest.approx(1.0)
    assert np.allclose(restore_udcp(img), img)


def test_udcp_transmission_of_uniform_ambient():
    img = np.full((20, 20, 3), 0.4)
    img[:, :, 2] = 0.7
    t = estimate_transmission_udcp(img, floor=0.01)
    assert t == pytest.approx(1 - 0.95)


def test_transmission_stays_within_bounds(rng):
    img = rng.uniform(size=(40, 40, 3))
    for estimate in (estimate_transmission_udcp, estimate_transmission_dcp):
        t = estimate(img, patch=7, floor=0.1)
        assert t.min() >= 0.1 and t.max() <= 1


def test_udcp_recovers_constant_fog(rng):
    ambient = np.array([0.2, 0.7, 0.8])
    j = vivid(rng, 64)
    j[:24, :24] = ambient
    t = 0.6
    observed = j * t + ambient * (1 - t)
    restored = restore_udcp(observed)
    # Away from the ambient patch the estimate is 0.05 + 0.95 t
    far = np.ones((64, 64), dtype=bool)
    far[:32, :32] = False
    assert np.max(np.abs(restored - j)[far]) < 0.03


def test_recover_with_unit_transmission(rng):
    img = rng.uniform(size=(8, 8, 3))
    assert np.allclose(recover_with_transmission(img, np.ones((8, 8)), [0.3, 0.5, 0.6]), img)


def test_bad_patch(rng):
    img = rng.uniform(size=(8, 8, 3))
    with pytest.raises(InvalidParameter):
        restore_udcp(img, patch=4)


def test_equalize_constant():
    img = np.full((8, 8, 3), 0.3)
    assert np.array_equal(equalize_hist(img), img)


def test_equalize_uniform_levels():
    ramp = (np.arange(256) / 255).reshape(16, 16)
    img = np.stack([ramp, ramp.T, ramp[::-1]], axis=2)
    assert np.allclose(equalize_hist(img), img, atol=0.5 / 255)


def test_equalize_flattens_histogram(rng):
    img = rng.beta(2, 5, size=(64, 64, 3))

    def spread(x):
        counts, _ = np.histogram(x, bins=16, range=(0, 1))
        return np.var(counts / counts.sum())

    out = equalize_hist(img)
    for c in range(3):
        assert spread(out[:, :, c]) <= spread(img[:, :, c])


def test_gray_world_gains():
    img = np.empty((4, 4, 3))
    img[:, :, 0] = 0.2
    img[:, :, 1] = 0.4
    img[:, :, 2] = 0.6
    assert gray_world_gains(img) == pytest.approx([2, 1, 2 / 3])


def test_gray_world_equalizes_means(rng):
    img = np.stack([
        rng.uniform(0.15, 0.25, size=(16, 16)),
        rng.uniform(0.35, 0.45, size=(16, 16)),
        rng.uniform(0.55, 0.65, size=(16, 16)),
    ], axis=2)
    means = gray_world_balance(img).reshape(-1, 3).mean(axis=0)
    assert means == pytest.approx([means.mean()] * 3, abs=1e-12)

    balanced = np.full((4, 4, 3), 0.5)
    assert np.array_equal(gray_world_balance(balanced), balanced)


def test_gray_world_zero_channel():
    with pytest.raises(InvalidInput):
        gray_world_gains(np.zeros((4, 4, 3)))


@pytest.mark.parametrize("method", METHODS)
def test_restore_keeps_shape_and_range(method, make_image, make_depth):
    j = make_image(32, 0.1, 0.6)
    d = make_depth(32, 0.5, 1.5)
    observed = synthesize_improved(j, d, COASTAL)
    out = restore(method, observed, d, COASTAL, InversionConfig(max_iters=10))
    assert out.shape == observed.shape
    assert out.min() >= 0 and out.max() <= 1


def test_restore_needs_model_inputs(make_image):
    with pytest.raises(InvalidInput):
        restore("analytic", make_image(16))
    with pytest.raises(InvalidParameter):
        restore("unet", make_image(16))
