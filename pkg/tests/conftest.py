"""Test fixtures for synthesis, restoration and the command line."""
import logging
import os

import numpy as np
import pytest
from click.testing import CliRunner

from uwsim.dataset import ParamSampler, RgbdPair, generate_batch
from uwsim.imagefiles import write_depth16, write_rgb


@pytest.fixture()
def db_path(tmp_path):
    return str(tmp_path / 'runs.sqlite')


@pytest.fixture()
def logger(caplog):
    # caplog is pytest built in fixtur
    # https://docs.pytest.org/en/latest/logging.html
    caplog.set_level(logging.DEBUG)
    logger = logging.getLogger()
    return logger


@pytest.fixture
def click_runner():
    return CliRunner()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def smooth_image(rng, size: int, low: float=0.1, high: float=0.9) -> np.ndarray:
    """Random low frequency colour image within [low, high]."""
    y, x = np.mgrid[0:size, 0:size] / size
    channels = []
    for _ in range(3):
        fx, fy = rng.uniform(0.5, 2.0, size=2)
        phase = rng.uniform(0, 2 * np.pi, size=2)
        c = np.sin(2 * np.pi * fx * x + phase[0]) + np.cos(2 * np.pi * fy * y + phase[1]) + rng.uniform(-1, 1) * x
        c = (c - c.min()) / (c.max() - c.min())
        channels.append(low + (high - low) * c)
    return np.stack(channels, axis=2)


def smooth_depth(rng, size: int, near: float=0.5, far: float=3.0) -> np.ndarray:
    """Tilted plane with a bump, ranges within [near, far]."""
    y, x = np.mgrid[0:size, 0:size] / size
    tilt = rng.uniform(0.3, 1.0)
    d = tilt * y + (1 - tilt) * x + 0.3 * np.exp(-((x - 0.5) ** 2 + (y - 0.5) ** 2) * 8)
    d = (d - d.min()) / (d.max() - d.min())
    return near + (far - near) * d


@pytest.fixture
def make_image(rng):
    def _make_image(size=32, low=0.1, high=0.9):
        return smooth_image(rng, size, low, high)
    return _make_image


@pytest.fixture
def make_depth(rng):
    def _make_depth(size=32, near=0.5, far=3.0):
        return smooth_depth(rng, size, near, far)
    return _make_depth


def write_rgbd_dir(path: str, count: int, width: int=48, height: int=40, seed: int=7, high: float=0.6, far: float=1.5):
    """Write ``count`` RGB-D pairs named ``scene0``, ``scene1``, ..."""
    os.makedirs(path, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(count):
        size = max(width, height)
        img = smooth_image(rng, size, 0.1, high)[:height, :width]
        depth = smooth_depth(rng, size, 0.5, far)[:height, :width]
        write_rgb(os.path.join(path, "scene{}.png".format(i)), img)
        write_depth16(os.path.join(path, "scene{}_depth.png".format(i)), depth / 0.001)
    return path


@pytest.fixture
def rgbd_dir(tmp_path):
    """Two 48x40 RGB-D pairs."""
    return write_rgbd_dir(str(tmp_path / "rgbd"), 2)


@pytest.fixture
def synthetic_dataset(logger, tmp_path):
    """Four 32x32 turbid water samples whose degraded images never clamp."""
    rng = np.random.default_rng(99)
    pairs = [RgbdPair(smooth_image(rng, 32, 0.1, 0.6), smooth_depth(rng, 32, 0.5, 1.5), "pair{}".format(i)) for i in range(4)]
    sampler = ParamSampler.from_preset("turbid-green", seed=3)
    out = str(tmp_path / "dataset")
    return generate_batch(logger, pairs, sampler, 1, out, size=32)
