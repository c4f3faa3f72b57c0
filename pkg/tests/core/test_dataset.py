"""RGB-D ingestion and synthetic dataset generation."""
import json
import os

import numpy as np
import png
import pytest
from PIL import Image

from uwsim.dataset import CONFIG_NAME, ParamSampler, RgbdPair, center_crop_resize, discover_pairs, generate_batch, load_entry, load_rgbd_pair, normalize_depth, read_manifest, resize_depth, sample_params, verify_entry
from uwsim.exceptions import ImageFormatError, ImageReadError, InvalidInput, InvalidParameter
from uwsim.imagefiles import read_depth16, read_rgb, write_depth16


def write_png8(path, data):
    Image.fromarray(np.asarray(data, dtype=np.uint8)).save(path)


def test_read_rgb_maps_8bit_to_unit_range(tmp_path):
    data = np.zeros((2, 3, 3), dtype=np.uint8)
    data[0, 0] = (255, 128, 0)
    path = str(tmp_path / "img.png")
    write_png8(path, data)
    img = read_rgb(path)
    assert img.shape == (2, 3, 3)
    assert img[0, 0].tolist() == [1.0, 128 / 255, 0.0]


def test_read_rgb_rejects_16bit(tmp_path):
    path = str(tmp_path / "deep.png")
    write_depth16(path, np.full((4, 4), 1000))
    with pytest.raises(ImageFormatError):
        read_rgb(path)


def test_read_rgb_rejects_48bit_colour(tmp_path):
    path = str(tmp_path / "deep_colour.png")
    rows = np.full((4, 4 * 3), 40000, dtype=np.uint16)
    writer = png.Writer(width=4, height=4, greyscale=False, bitdepth=16)
    with open(path, "wb") as f:
        writer.write(f, rows.tolist())
    with pytest.raises(ImageFormatError):
        read_rgb(path)


def test_read_rgb_missing(tmp_path):
    with pytest.raises(ImageReadError):
        read_rgb(str(tmp_path / "nothing.png"))


def test_depth_units_to_meters(tmp_path):
    image_path = str(tmp_path / "a.png")
    depth_path = str(tmp_path / "a_depth.png")
    write_png8(image_path, np.full((3, 4, 3), 100))
    write_depth16(depth_path, np.full((3, 4), 1000))
    pair = load_rgbd_pair(image_path, depth_path)
    assert pair.source_id == "a"
    assert pair.depth == pytest.approx(1.0)
    assert read_depth16(depth_path).dtype == np.uint16


def test_depth_is_upsampled_to_image_size(tmp_path):
    image_path = str(tmp_path / "a.png")
    depth_path = str(tmp_path / "a_depth.png")
    write_png8(image_path, np.zeros((6, 8, 3)))
    write_depth16(depth_path, np.arange(12).reshape(3, 4) * 100 + 100)
    pair = load_rgbd_pair(image_path, depth_path)
    assert pair.depth.shape == (6, 8)
    # Nearest neighbour never invents ranges
    assert set(np.rint(pair.depth.ravel() * 1000).astype(int)) == set(range(100, 1300, 100))


def test_8bit_depth_is_rejected(tmp_path):
    path = str(tmp_path / "d.png")
    with open(path, "wb") as f:
        png.Writer(width=4, height=2, greyscale=True, bitdepth=8).write(f, [[1, 2, 3, 4], [5, 6, 7, 8]])
    with pytest.raises(ImageFormatError):
        read_depth16(path)


def test_bad_depth_scale(tmp_path):
    with pytest.raises(InvalidParameter):
        load_rgbd_pair("a.png", "a_depth.png", depth_scale=0)


def test_normalize_depth():
    depth = np.array([[0.0, 2.0, 3.0], [3.0, 0.0, 11.0]])
    out = normalize_depth(depth, max_range=10)
    assert out.tolist() == [[3.0, 2.0, 3.0], [3.0, 3.0, 10.0]]
    # The input is left alone
    assert depth[0, 0] == 0


def test_normalize_depth_all_missing():
    with pytest.raises(InvalidInput):
        normalize_depth(np.zeros((4, 4)))


def test_center_crop_resize(make_image, make_depth):
    image = make_image(48)[:40, :48]
    depth = make_depth(48)[:40, :48]
    out_image, out_depth = center_crop_resize(image, depth, 32)
    assert out_image.shape == (32, 32, 3)
    assert out_depth.shape == (32, 32)
    assert out_image.min() >= 0 and out_image.max() <= 1

    same_image, same_depth = center_crop_resize(image[:, 4:44], depth[:, 4:44], 40)
    assert np.array_equal(same_image, image[:, 4:44])
    assert np.array_equal(same_depth, depth[:, 4:44])


def test_resize_depth_nearest():
    depth = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert resize_depth(depth, 4, 4).tolist() == [
        [1.0, 1.0, 2.0, 2.0],
        [1.0, 1.0, 2.0, 2.0],
        [3.0, 3.0, 4.0, 4.0],
        [3.0, 3.0, 4.0, 4.0],
    ]


def test_rgbd_pair_sizes_must_match():
    with pytest.raises(InvalidInput):
        RgbdPair(np.zeros((4, 4, 3)), np.zeros((4, 5)), "bad")


def test_sample_params_deterministic():
    sampler = ParamSampler.from_preset("coastal-green", seed=42)
    assert sample_params(sampler, 7) == sample_params(sampler, 7)
    assert sample_params(sampler, 7) != sample_params(sampler, 8)
    other = ParamSampler.from_preset("coastal-green", seed=43)
    assert sample_params(sampler, 7) != sample_params(other, 7)


def test_sample_params_degenerate_ranges():
    sampler = ParamSampler("fixed", [(0.5, 0.5), (0.2, 0.2), (0.1, 0.1)], [(0.3, 0.3)] * 3, (1.0, 1.0))
    params = sample_params(sampler, 123)
    assert params.beta.tolist() == [0.5, 0.2, 0.1]
    assert params.ambient.tolist() == [0.3, 0.3, 0.3]
    assert params.alpha == 1.0


def test_sample_params_uniform_means():
    sampler = ParamSampler("test", [(0.2, 0.6), (0.1, 0.3), (0.0, 0.4)], [(0.1, 0.5)] * 3, (0.5, 1.5), seed=1)
    draws = [sample_params(sampler, i) for i in range(4000)]
    betas = np.array([p.beta for p in draws])
    assert betas.mean(axis=0) == pytest.approx([0.4, 0.2, 0.2], abs=0.02)
    assert np.mean([p.alpha for p in draws]) == pytest.approx(1.0, abs=0.02)
    assert betas.min() >= 0 and betas[:, 0].max() <= 0.6


@pytest.mark.parametrize("name", ["clear-oceanic", "coastal-green", "turbid-green"])
def test_preset_draws_are_ordered(name):
    sampler = ParamSampler.from_preset(name, seed=5)
    draws = [sample_params(sampler, i) for i in range(500)]
    assert all(p.is_ordered() for p in draws)
    for p, (lo, hi) in zip(np.array([d.beta for d in draws]).T, sampler.beta_ranges):
        assert p.min() >= lo and p.max() <= hi


def test_ordered_draws_are_uniform_over_ordered_ranges():
    # Green (0.12, 0.22) and blue (0.10, 0.18) overlap. Conditioned on green >= blue,
    # green lands above 0.18 with probability 0.04 / 0.0775
    sampler = ParamSampler.from_preset("coastal-green", seed=9)
    betas = np.array([sample_params(sampler, i).beta for i in range(4000)])
    assert not np.any(betas[:, 1] == betas[:, 2])
    assert np.mean(betas[:, 1] >= 0.18) == pytest.approx(0.04 / 0.0775, abs=0.03)


def test_ordered_sampler_needs_feasible_ranges():
    with pytest.raises(InvalidParameter):
        ParamSampler("inverted", [(0.1, 0.2), (0.3, 0.4), (0.0, 0.1)], [(0.3, 0.3)] * 3, (1.0, 1.0), ordered=True)


def test_sampler_validation():
    with pytest.raises(InvalidParameter):
        ParamSampler("x", [(0.5, 0.1)] * 3, [(0.1, 0.2)] * 3, (1, 1))
    with pytest.raises(InvalidParameter):
        ParamSampler("x", [(0.1, 0.5)] * 3, [(0.1, 1.2)] * 3, (1, 1))
    with pytest.raises(InvalidParameter):
        ParamSampler.from_preset("lake")


def test_discover_pairs(logger, caplog, rgbd_dir):
    write_png8(os.path.join(rgbd_dir, "orphan.png"), np.zeros((4, 4, 3)))
    found = discover_pairs(logger, rgbd_dir)
    assert [f[0] for f in found] == ["scene0", "scene1"]
    assert "orphan.png" in caplog.text


def test_discover_pairs_missing_dir(logger, tmp_path):
    with pytest.raises(ImageReadError):
        discover_pairs(logger, str(tmp_path / "nope"))


def _pairs(input_dir):
    return [load_rgbd_pair(os.path.join(input_dir, "scene{}.png".format(i)), os.path.join(input_dir, "scene{}_depth.png".format(i))) for i in range(2)]


def test_generate_batch_layout(logger, rgbd_dir, tmp_path):
    sampler = ParamSampler.from_preset("coastal-green", seed=11)
    out = str(tmp_path / "out")
    manifest = generate_batch(logger, _pairs(rgbd_dir), sampler, 3, out, size=32)

    assert len(manifest.entries) == 6
    assert manifest.errors == []
    assert [(e.source_id, e.sample_index) for e in manifest.entries] == [
        ("scene0", 0), ("scene0", 1), ("scene0", 2),
        ("scene1", 0), ("scene1", 1), ("scene1", 2),
    ]
    for i, entry in enumerate(manifest.entries):
        assert entry.params == sample_params(sampler, i)
        for rel in (entry.degraded_path, entry.clear_path, entry.depth_path):
            assert not os.path.isabs(rel)
            assert os.path.exists(manifest.resolve(rel))
        degraded, clear, depth = load_entry(manifest, entry)
        assert degraded.shape == (32, 32, 3)
        assert depth.shape == (32, 32)
        assert entry.depth_min == pytest.approx(depth.min())

    with open(os.path.join(out, CONFIG_NAME)) as f:
        config = json.load(f)
    assert config["seed"] == 11
    assert config["preset"] == "coastal-green"
    assert config["entries"] == 6
    assert config["size"] == 32


def test_generate_batch_reproducible(logger, rgbd_dir, tmp_path):
    sampler = ParamSampler.from_preset("turbid-green", seed=2)
    first = generate_batch(logger, _pairs(rgbd_dir), sampler, 2, str(tmp_path / "a"), size=32, threads=1)
    second = generate_batch(logger, list(reversed(_pairs(rgbd_dir))), sampler, 2, str(tmp_path / "b"), size=32, threads=4)

    with open(first.path) as f, open(second.path) as g:
        assert f.read() == g.read()
    for a, b in zip(first.entries, second.entries):
        assert np.array_equal(load_entry(first, a)[0], load_entry(second, b)[0])


def test_manifest_round_trip_and_verify(logger, synthetic_dataset):
    manifest = read_manifest(synthetic_dataset.root)
    assert manifest.seed == 3
    assert manifest.preset == "turbid-green"
    assert len(manifest.entries) == 4
    for written, parsed in zip(synthetic_dataset.entries, manifest.entries):
        assert parsed.params == written.params
        assert verify_entry(manifest, parsed) <= 1 / 255


def test_read_manifest_missing(tmp_path):
    with pytest.raises(ImageReadError):
        read_manifest(str(tmp_path))


def test_degraded_red_is_darker_than_blue(synthetic_dataset):
    red, blue = [], []
    for entry in synthetic_dataset.entries:
        degraded, _, _ = load_entry(synthetic_dataset, entry)
        red.append(degraded[:, :, 0].mean())
        blue.append(degraded[:, :, 2].mean())
    assert np.mean(red) < np.mean(blue)


def test_generate_batch_validation(logger, tmp_path):
    sampler = ParamSampler.from_preset("turbid-green")
    with pytest.raises(InvalidInput):
        generate_batch(logger, [], sampler, 1, str(tmp_path))
    pair = RgbdPair(np.zeros((8, 8, 3)), np.ones((8, 8)), "p")
    with pytest.raises(InvalidParameter):
        generate_batch(logger, [pair], sampler, 0, str(tmp_path))


def test_generate_batch_records_bad_pairs(logger, tmp_path):
    sampler = ParamSampler.from_preset("turbid-green")
    good = RgbdPair(np.full((8, 8, 3), 0.5), np.ones((8, 8)), "good")
    empty = RgbdPair(np.full((8, 8, 3), 0.5), np.zeros((8, 8)), "empty")
    manifest = generate_batch(logger, [good, empty], sampler, 2, str(tmp_path / "out"), size=8, errors=[("unreadable", -1, "broken file")])
    assert len(manifest.entries) == 2
    assert [e[:2] for e in manifest.errors] == [("unreadable", -1), ("empty", 0), ("empty", 1)]
    assert read_manifest(manifest.root).errors[0] == ("unreadable", -1, "broken file")

